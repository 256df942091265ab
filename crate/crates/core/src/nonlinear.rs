//! Pseudospectral convection, transport and Itô-corrector operators.
//!
//! Quadratic products are formed on a padded grid sized by
//! [`TransformWorkspace::for_product`], so every retained mode is alias-free.

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{GevreyWeight, SpectralField};
use crate::lattice::WaveLattice;
use crate::transform::{smooth_size, TransformWorkspace};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// A transport coefficient `ξ`.
#[derive(Debug, Clone)]
pub enum TransportField {
    /// Spatially constant vector; acts on mode `k` as the multiplier `i(ξ·k)`.
    Constant(Vec<f64>),
    /// General divergence-free field (experimental).
    Field(SpectralField),
}

impl TransportField {
    pub fn is_constant(&self) -> bool {
        matches!(self, TransportField::Constant(_))
    }

    /// `ξ·k` for a constant coefficient.
    fn symbol(xi: &[f64], k: &[i64; 3]) -> f64 {
        xi.iter().zip(k).map(|(x, &c)| x * c as f64).sum()
    }
}

/// Serializable description of a transport coefficient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TransportDescriptor {
    Constant {
        vector: Vec<f64>,
    },
    /// `amplitude · (polarization ⊥ k) e^{ik·x} + c.c.`
    SingleMode {
        wavevector: Vec<i64>,
        amplitude: f64,
    },
}

impl TransportDescriptor {
    pub fn build(&self, lattice: &Arc<WaveLattice>) -> Result<TransportField> {
        match self {
            TransportDescriptor::Constant { vector } => {
                if vector.len() != lattice.dim() {
                    return Err(Error::InvalidArgument(format!(
                        "constant transport vector must have {} components",
                        lattice.dim()
                    )));
                }
                Ok(TransportField::Constant(vector.clone()))
            }
            TransportDescriptor::SingleMode { wavevector, amplitude } => {
                let idx = lattice
                    .index_of(wavevector)
                    .filter(|&i| lattice.is_active(i))
                    .ok_or_else(|| Error::InvalidArgument(format!("wavevector {wavevector:?} not on lattice")))?;
                let k = lattice.wavevector(idx);
                let mut pol = [0.0f64; 3];
                if lattice.dim() == 2 {
                    pol[0] = -k[1] as f64;
                    pol[1] = k[0] as f64;
                } else {
                    // k × e for the axis least aligned with k
                    let axis = (0..3).min_by_key(|&a| k[a].abs()).unwrap();
                    let mut e = [0.0; 3];
                    e[axis] = 1.0;
                    pol = [
                        k[1] as f64 * e[2] - k[2] as f64 * e[1],
                        k[2] as f64 * e[0] - k[0] as f64 * e[2],
                        k[0] as f64 * e[1] - k[1] as f64 * e[0],
                    ];
                }
                let norm = pol.iter().map(|p| p * p).sum::<f64>().sqrt();
                let mode: Vec<Complex64> =
                    pol[..lattice.dim()].iter().map(|p| Complex64::new(0.5 * amplitude * p / norm, 0.0)).collect();
                let mut f = SpectralField::zeros(lattice);
                f.set_mode(idx, &mode);
                f.set_mode(lattice.negation(idx), &mode);
                Ok(TransportField::Field(f.tagged_solenoidal(true)))
            }
        }
    }
}

/// Zeroes modes outside the 2/3-rule mask.
pub fn dealias(f: &SpectralField) -> SpectralField {
    f.dealias()
}

/// `(a·∇)b`, exact on every mode with component extent `<= out_extent`.
pub fn advect(a: &SpectralField, b: &SpectralField, out_extent: usize) -> Result<SpectralField> {
    a.check_lattice(b)?;
    let lat = a.lattice().clone();
    let dim = lat.dim();
    let out_extent = out_extent.min(lat.dealias_extent());
    let input = a.extent().max(b.extent());
    if input == 0 {
        return Ok(SpectralField::zeros(&lat));
    }
    let mut ws = TransformWorkspace::for_product(dim, input, out_extent);

    let a_phys: Vec<Vec<f64>> = (0..dim).map(|j| ws.to_physical(&lat, a.component(j))).collect();
    let mut acc = vec![vec![0.0f64; ws.n_points()]; dim];
    for i in 0..dim {
        for j in 0..dim {
            let deriv: Vec<Complex64> =
                b.component(i).iter().enumerate().map(|(idx, &z)| z * I * lat.wavevector(idx)[j] as f64).collect();
            let d_phys = ws.to_physical(&lat, &deriv);
            for ((o, &x), &y) in acc[i].iter_mut().zip(&a_phys[j]).zip(&d_phys) {
                *o += x * y;
            }
        }
    }
    let comps = acc.iter().map(|v| ws.to_spectral(&lat, v, out_extent)).collect();
    SpectralField::from_components(&lat, comps)
}

/// `P((u·∇)v)`, dealiased.
pub fn convect(u: &SpectralField, v: &SpectralField) -> Result<SpectralField> {
    let ext = u.lattice().dealias_extent();
    convect_within(u, v, ext)
}

/// `P((u·∇)v)` restricted to component extent `out_extent`.
pub fn convect_within(u: &SpectralField, v: &SpectralField, out_extent: usize) -> Result<SpectralField> {
    Ok(advect(u, v, out_extent)?.leray_project())
}

/// `(ξ·∇)u`.
pub fn transport(xi: &TransportField, u: &SpectralField) -> Result<SpectralField> {
    match xi {
        TransportField::Constant(v) => {
            if v.len() != u.dim() {
                return Err(Error::LatticeMismatch);
            }
            let lat = u.lattice().clone();
            Ok(u.map_scalar(|idx, _| I * TransportField::symbol(v, &lat.wavevector(idx))))
        }
        TransportField::Field(f) => {
            let ext = u.lattice().dealias_extent();
            advect(f, u, ext)
        }
    }
}

/// `½ Σ_k P((ξ_k·∇)(ξ_k·∇)u)`.
pub fn ito_corrector(xis: &[TransportField], u: &SpectralField) -> Result<SpectralField> {
    let lat = u.lattice().clone();
    if xis.is_empty() {
        return Ok(SpectralField::zeros(&lat));
    }
    if xis.iter().all(TransportField::is_constant) {
        for xi in xis {
            if let TransportField::Constant(v) = xi {
                if v.len() != u.dim() {
                    return Err(Error::LatticeMismatch);
                }
            }
        }
        let out = u.map_scalar(|idx, _| {
            let k = lat.wavevector(idx);
            let s: f64 = xis
                .iter()
                .map(|xi| match xi {
                    TransportField::Constant(v) => TransportField::symbol(v, &k).powi(2),
                    TransportField::Field(_) => 0.0,
                })
                .sum();
            Complex64::new(-0.5 * s, 0.0)
        });
        return Ok(out.leray_project());
    }
    let mut acc = SpectralField::zeros(&lat);
    for xi in xis {
        let once = transport(xi, u)?;
        let twice = transport(xi, &once)?;
        acc = acc.axpy(0.5, &twice)?;
    }
    Ok(acc.leray_project())
}

/// `‖A^{1/2} e^{φA^{1/2s}} (u·v)‖²_{L²}` of the scalar product `u·v`,
/// evaluated on a grid large enough to hold the full product spectrum.
pub fn product_gevrey_h1_norm_sq(u: &SpectralField, v: &SpectralField, w: &GevreyWeight) -> Result<f64> {
    u.check_lattice(v)?;
    let lat = u.lattice().clone();
    let dim = lat.dim();
    let input = u.extent().max(v.extent());
    if input == 0 {
        return Ok(0.0);
    }
    let size = smooth_size(4 * input + 1);
    let mut ws = TransformWorkspace::new(dim, size);
    let mut prod = vec![0.0f64; ws.n_points()];
    for c in 0..dim {
        let a = ws.to_physical(&lat, u.component(c));
        let b = ws.to_physical(&lat, v.component(c));
        for ((p, x), y) in prod.iter_mut().zip(&a).zip(&b) {
            *p += x * y;
        }
    }
    let mut buf: Vec<Complex64> = prod.into_iter().map(|x| Complex64::new(x, 0.0)).collect();
    ws.transform(&mut buf, false);
    let scale = 1.0 / ws.n_points() as f64;
    let s = size as i64;
    let mut total = 0.0;
    for (pos, z) in buf.iter().enumerate() {
        let mut rem = pos;
        let mut ksq = 0i64;
        for _ in 0..dim {
            let i = (rem % size) as i64;
            rem /= size;
            let k = if 2 * i <= s { i } else { i - s };
            ksq += k * k;
        }
        if ksq == 0 {
            continue;
        }
        let m = w.multiplier(ksq as f64);
        total += m * m * (z * scale).norm_sqr();
    }
    Ok(total)
}
