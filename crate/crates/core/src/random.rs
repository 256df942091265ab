//! Random spectral fields with prescribed modulus profiles.
//!
//! Draws are keyed by the wavevector, so the same seed produces the same
//! coefficients for a given `k` on every lattice that contains it.

use std::sync::Arc;

use num_complex::Complex64;

use crate::field::SpectralField;
use crate::lattice::WaveLattice;
use crate::rng::{tag, wavevector_code, KeyedStream};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldKind {
    /// `û_k ⊥ k`.
    Solenoidal,
    /// Mean-free, no divergence constraint.
    General,
}

/// Random Hermitian field on the dealiased modes with `|û_k| = profile(|k|)`.
pub fn random_field<F>(lattice: &Arc<WaveLattice>, kind: FieldKind, seed: u64, profile: F) -> SpectralField
where
    F: Fn(f64) -> f64,
{
    random_field_within(lattice, kind, seed, None, profile)
}

/// As [`random_field`], additionally restricted to `|k| <= cutoff`.
pub fn random_field_within<F>(
    lattice: &Arc<WaveLattice>,
    kind: FieldKind,
    seed: u64,
    cutoff: Option<usize>,
    profile: F,
) -> SpectralField
where
    F: Fn(f64) -> f64,
{
    random_field_keyed(lattice, kind, [seed, lattice.dim() as u64, 0, tag::SAMPLE], cutoff, profile)
}

/// As [`random_field_within`] with an explicit stream key.
pub fn random_field_keyed<F>(
    lattice: &Arc<WaveLattice>,
    kind: FieldKind,
    key: [u64; 4],
    cutoff: Option<usize>,
    profile: F,
) -> SpectralField
where
    F: Fn(f64) -> f64,
{
    let dim = lattice.dim();
    let mut stream = KeyedStream::new(key);
    let mut out = SpectralField::zeros(lattice);
    let lim = cutoff.map(|n| (n * n) as f64);
    for idx in lattice.indices() {
        if !lattice.is_active(idx) || !lattice.in_dealias_mask(idx) || !lattice.is_canonical(idx) {
            continue;
        }
        let ksq = lattice.norm_sq(idx);
        if lim.map_or(false, |l| ksq > l) {
            continue;
        }
        let k = lattice.wavevector(idx);
        let base = wavevector_code(&k) * 8;
        let mut z = [Complex64::new(0.0, 0.0); 3];
        for c in 0..dim {
            let re = stream.normal(base + 2 * c as u128);
            let im = stream.normal(base + 2 * c as u128 + 1);
            z[c] = Complex64::new(re, im);
        }
        if kind == FieldKind::Solenoidal {
            let mut dot = Complex64::new(0.0, 0.0);
            for c in 0..dim {
                dot += z[c] * k[c] as f64;
            }
            for c in 0..dim {
                z[c] -= dot * (k[c] as f64 / ksq);
            }
        }
        let norm = z[..dim].iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let amp = profile(ksq.sqrt()) / norm;
        let mode: Vec<Complex64> = z[..dim].iter().map(|v| v * amp).collect();
        let conj: Vec<Complex64> = mode.iter().map(|v| v.conj()).collect();
        out.set_mode(idx, &mode);
        out.set_mode(lattice.negation(idx), &conj);
    }
    out.tagged_solenoidal(kind == FieldKind::Solenoidal)
}
