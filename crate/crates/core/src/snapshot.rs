//! Binary field container and JSON sidecar used for outputs and checkpoints.
//!
//! Container layout, all integers and floats little-endian:
//!
//! | offset | size | content                                  |
//! |--------|------|------------------------------------------|
//! | 0      | 4    | magic `SNSF`                             |
//! | 4      | 4    | format version (u32, currently 1)        |
//! | 8      | 4    | dim (u32)                                |
//! | 12     | 4    | grid_n (u32)                             |
//! | 16     | 8    | number of modes (u64)                    |
//! | 24     | 4    | flags (u32; bit 0 = solenoidal)          |
//! | 28     | 4    | reserved, zero                           |
//! | 32     | ...  | coefficients, f64 pairs (re, im)         |
//!
//! Coefficients are stored mode-major: for each flat mode index in FFT order,
//! the `dim` components follow one another.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::SpectralField;
use crate::galerkin::{SimState, StopRecord};
use crate::lattice::WaveLattice;

pub const MAGIC: &[u8; 4] = b"SNSF";
pub const VERSION: u32 = 1;
const HEADER_LEN: usize = 32;
const FLAG_SOLENOIDAL: u32 = 1;

pub fn encode_field(f: &SpectralField) -> Vec<u8> {
    let lat = f.lattice();
    let dim = lat.dim();
    let mut out = Vec::with_capacity(HEADER_LEN + lat.n_modes() * dim * 16);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(dim as u32).to_le_bytes());
    out.extend_from_slice(&(lat.grid_n() as u32).to_le_bytes());
    out.extend_from_slice(&(lat.n_modes() as u64).to_le_bytes());
    let flags = if f.is_solenoidal() { FLAG_SOLENOIDAL } else { 0 };
    out.extend_from_slice(&flags.to_le_bytes());
    out.extend_from_slice(&0u32.to_le_bytes());
    for idx in lat.indices() {
        for c in 0..dim {
            let z = f.component(c)[idx];
            out.extend_from_slice(&z.re.to_le_bytes());
            out.extend_from_slice(&z.im.to_le_bytes());
        }
    }
    out
}

fn u32_at(bytes: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(bytes[at..at + 4].try_into().expect("4 bytes"))
}

/// Decodes a container. With `lattice` given, the header must match it and
/// the field shares it; otherwise a lattice is built from the header.
pub fn decode_field(bytes: &[u8], lattice: Option<&Arc<WaveLattice>>) -> Result<SpectralField> {
    if bytes.len() < HEADER_LEN || &bytes[..4] != MAGIC {
        return Err(Error::Format("not a field container".into()));
    }
    let version = u32_at(bytes, 4);
    if version != VERSION {
        return Err(Error::Format(format!("unsupported container version {version}")));
    }
    let dim = u32_at(bytes, 8) as usize;
    let grid_n = u32_at(bytes, 12) as usize;
    let n_modes = u64::from_le_bytes(bytes[16..24].try_into().expect("8 bytes")) as usize;
    let flags = u32_at(bytes, 24);
    let lat = match lattice {
        Some(l) if l.dim() == dim && l.grid_n() == grid_n => l.clone(),
        Some(l) => {
            return Err(Error::Format(format!(
                "container holds dim {dim} grid {grid_n}, expected dim {} grid {}",
                l.dim(),
                l.grid_n()
            )))
        }
        None => Arc::new(WaveLattice::new(dim, grid_n)?),
    };
    if n_modes != lat.n_modes() || bytes.len() != HEADER_LEN + n_modes * dim * 16 {
        return Err(Error::Format("container length does not match its header".into()));
    }
    let mut comps = vec![vec![Complex64::new(0.0, 0.0); n_modes]; dim];
    let mut at = HEADER_LEN;
    let mut next = || {
        let v = f64::from_le_bytes(bytes[at..at + 8].try_into().expect("8 bytes"));
        at += 8;
        v
    };
    for idx in 0..n_modes {
        for comp in comps.iter_mut() {
            let re = next();
            let im = next();
            comp[idx] = Complex64::new(re, im);
        }
    }
    Ok(SpectralField::from_components(&lat, comps)?.tagged_solenoidal(flags & FLAG_SOLENOIDAL != 0))
}

/// Metadata stored next to a container.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub field_file: String,
    pub t: f64,
    pub step: u64,
    pub seed: u64,
    pub path_index: u64,
    pub cutoff: usize,
    pub phi: f64,
    pub initial_enstrophy: f64,
    pub budget_sup: f64,
    pub budget_int: f64,
    pub h2_int: f64,
    pub stops: Vec<StopRecord>,
}

/// Writes `<stem>.snsf` and `<stem>.json` under `dir`.
pub fn write_checkpoint(
    dir: &Path,
    stem: &str,
    state: &SimState,
    seed: u64,
    path_index: u64,
    cutoff: usize,
    phi: f64,
) -> Result<(PathBuf, PathBuf)> {
    fs::create_dir_all(dir)?;
    let field_path = dir.join(format!("{stem}.snsf"));
    let meta_path = dir.join(format!("{stem}.json"));
    fs::write(&field_path, encode_field(&state.u))?;
    let sidecar = Sidecar {
        field_file: format!("{stem}.snsf"),
        t: state.t,
        step: state.step,
        seed,
        path_index,
        cutoff,
        phi,
        initial_enstrophy: state.initial_enstrophy,
        budget_sup: state.budget_sup,
        budget_int: state.budget_int,
        h2_int: state.h2_int,
        stops: state.stops.clone(),
    };
    let text = serde_json::to_string_pretty(&sidecar).map_err(|e| Error::Format(e.to_string()))?;
    fs::write(&meta_path, text + "\n")?;
    Ok((field_path, meta_path))
}

/// Reads a checkpoint written by [`write_checkpoint`].
pub fn read_checkpoint(dir: &Path, stem: &str, lattice: Option<&Arc<WaveLattice>>) -> Result<(SimState, Sidecar)> {
    let text = fs::read_to_string(dir.join(format!("{stem}.json")))?;
    let sidecar: Sidecar = serde_json::from_str(&text).map_err(|e| Error::Format(e.to_string()))?;
    let u = decode_field(&fs::read(dir.join(&sidecar.field_file))?, lattice)?;
    let state = SimState {
        step: sidecar.step,
        t: sidecar.t,
        u,
        initial_enstrophy: sidecar.initial_enstrophy,
        budget_sup: sidecar.budget_sup,
        budget_int: sidecar.budget_int,
        h2_int: sidecar.h2_int,
        stops: sidecar.stops.clone(),
    };
    Ok((state, sidecar))
}
