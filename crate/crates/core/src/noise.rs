//! Noise families `(g_k)` and `(ξ_k)` and executable checks of their
//! structural assumptions.
//!
//! Each family occupies a set of Wiener indices. The default configuration
//! gives the two families disjoint index sets, which makes the orthogonality
//! between multiplicative and transport noise hold identically.

use std::collections::BTreeSet;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{GevreyWeight, SpectralField};
use crate::lattice::WaveLattice;
use crate::nonlinear::{transport, TransportDescriptor, TransportField};
use crate::random::{random_field, FieldKind};

/// Seed of the random probe fields used by the validators.
const PROBE_SEED: u64 = 0x6e6f_6973_6550_7262;

/// Relative tolerance for identities that hold exactly up to rounding.
pub const EXACT_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub enum MultiplicativeVariant {
    Zero,
    /// Fixed mean-free fields `σ_k`.
    Additive(Vec<SpectralField>),
    /// `g_k(u) = c_k u`.
    LinearMultiplicative(Vec<f64>),
}

#[derive(Debug, Clone)]
pub struct MultiplicativeNoise {
    pub variant: MultiplicativeVariant,
    pub index_set: Vec<usize>,
}

impl MultiplicativeNoise {
    pub fn zero() -> Self {
        MultiplicativeNoise { variant: MultiplicativeVariant::Zero, index_set: Vec::new() }
    }

    fn len(&self) -> Option<usize> {
        match &self.variant {
            MultiplicativeVariant::Zero => None,
            MultiplicativeVariant::Additive(f) => Some(f.len()),
            MultiplicativeVariant::LinearMultiplicative(c) => Some(c.len()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct TransportNoise {
    pub coefficients: Vec<TransportField>,
    pub index_set: Vec<usize>,
}

impl TransportNoise {
    pub fn none() -> Self {
        TransportNoise { coefficients: Vec::new(), index_set: Vec::new() }
    }

    /// Constant vectors with magnitudes `c_k = K 2^{-k}`, `k = 1..=k_max`,
    /// directed along coordinate axes in turn.
    pub fn geometric(dim: usize, k_max: usize, magnitude: f64, first_index: usize) -> Self {
        let coefficients = (1..=k_max)
            .map(|k| {
                let mut v = vec![0.0; dim];
                v[(k - 1) % dim] = magnitude * 0.5f64.powi(k as i32);
                TransportField::Constant(v)
            })
            .collect();
        TransportNoise { coefficients, index_set: (first_index..first_index + k_max).collect() }
    }

    pub fn all_constant(&self) -> bool {
        self.coefficients.iter().all(TransportField::is_constant)
    }
}

/// The pair of noise families driven by a common set of Wiener processes.
#[derive(Debug, Clone)]
pub struct NoiseSystem {
    pub g: MultiplicativeNoise,
    pub xi: TransportNoise,
    n_wiener: usize,
    validated: bool,
}

impl NoiseSystem {
    pub fn new(g: MultiplicativeNoise, xi: TransportNoise) -> Result<Self> {
        if let Some(n) = g.len() {
            if n != g.index_set.len() {
                return Err(Error::NoiseConfig(format!(
                    "multiplicative family has {n} members but {} indices",
                    g.index_set.len()
                )));
            }
        }
        if xi.coefficients.len() != xi.index_set.len() {
            return Err(Error::NoiseConfig(format!(
                "transport family has {} members but {} indices",
                xi.coefficients.len(),
                xi.index_set.len()
            )));
        }
        for set in [&g.index_set, &xi.index_set] {
            let unique: BTreeSet<_> = set.iter().collect();
            if unique.len() != set.len() {
                return Err(Error::NoiseConfig("duplicate Wiener index within a family".into()));
            }
        }
        let n_wiener = g.index_set.iter().chain(&xi.index_set).map(|&i| i + 1).max().unwrap_or(0);
        Ok(NoiseSystem { g, xi, n_wiener, validated: false })
    }

    /// No noise at all.
    pub fn deterministic() -> Self {
        NoiseSystem::new(MultiplicativeNoise::zero(), TransportNoise::none()).expect("empty system")
    }

    pub fn n_wiener(&self) -> usize {
        self.n_wiener
    }

    pub fn is_validated(&self) -> bool {
        self.validated
    }

    pub fn transport_at(&self, k_index: usize) -> Option<&TransportField> {
        self.xi.index_set.iter().position(|&i| i == k_index).map(|p| &self.xi.coefficients[p])
    }

    pub fn overlap(&self) -> Vec<usize> {
        let g: BTreeSet<_> = self.g.index_set.iter().copied().collect();
        self.xi.index_set.iter().copied().filter(|i| g.contains(i)).collect()
    }

    /// `g_k(t, u)`; zero for indices outside the multiplicative family.
    pub fn eval_g(&self, k_index: usize, _t: f64, u: &SpectralField) -> SpectralField {
        let lat = u.lattice();
        let Some(p) = self.g.index_set.iter().position(|&i| i == k_index) else {
            return SpectralField::zeros(lat);
        };
        let out = match &self.g.variant {
            MultiplicativeVariant::Zero => SpectralField::zeros(lat),
            MultiplicativeVariant::Additive(fields) => fields[p].clone(),
            MultiplicativeVariant::LinearMultiplicative(c) => u.scale(c[p]),
        };
        match lat.index_of(&[0, 0, 0]) {
            Some(zero) => {
                let mut out = out;
                out.set_mode(zero, &[Complex64::new(0.0, 0.0); 3]);
                out
            }
            None => out,
        }
    }

    /// Empirical constants of the growth and Lipschitz bounds over random probes.
    pub fn validate_growth_lipschitz(
        &self,
        lattice: &Arc<WaveLattice>,
        w: &GevreyWeight,
        n_samples: usize,
    ) -> Result<GrowthReport> {
        if n_samples < 2 {
            return Err(Error::InvalidArgument("n_samples must be >= 2".into()));
        }
        let samples = probe_fields(lattice, n_samples);
        let mut c_growth = 0.0f64;
        for v in &samples {
            let mut sum = 0.0;
            for &k in &self.g.index_set {
                sum += self.eval_g(k, 0.0, v).gevrey_sobolev_norm(w)?;
            }
            c_growth = c_growth.max(sum / (1.0 + v.gevrey_sobolev_norm(w)?));
        }
        let mut c_lip = 0.0f64;
        for pair in samples.windows(2) {
            let diff = pair[0].sub(&pair[1])?;
            let denom = diff.gevrey_sobolev_norm(w)?;
            if denom == 0.0 {
                continue;
            }
            let mut sum = 0.0;
            for &k in &self.g.index_set {
                let d = self.eval_g(k, 0.0, &pair[0]).sub(&self.eval_g(k, 0.0, &pair[1]))?;
                sum += d.gevrey_sobolev_norm(w)?;
            }
            c_lip = c_lip.max(sum / denom);
        }
        Ok(GrowthReport { c_growth, c_lip, n_samples })
    }

    /// `Σ_k ‖e^{σ₂ A^{1/2s}} ξ_k‖_{H^r}` with `σ₂ = w.phi`. Constant vectors
    /// contribute their Euclidean length.
    pub fn validate_xi_bound(&self, w: &GevreyWeight, r: f64) -> Result<f64> {
        if r < 0.0 {
            return Err(Error::InvalidArgument("r must be >= 0".into()));
        }
        let w = w.with_r(r);
        let mut total = 0.0;
        for xi in &self.xi.coefficients {
            total += match xi {
                TransportField::Constant(v) => v.iter().map(|x| x * x).sum::<f64>().sqrt(),
                TransportField::Field(f) => f.gevrey_sobolev_norm(&w)?,
            };
        }
        Ok(total)
    }

    /// Inner products behind the orthogonality constraint, on every Wiener
    /// index shared by the two families.
    pub fn validate_orthogonality(
        &self,
        lattice: &Arc<WaveLattice>,
        w: &GevreyWeight,
        r: f64,
        samples: usize,
    ) -> Result<OrthogonalityReport> {
        let overlap = self.overlap();
        let weight = w.with_r(2.0 * r);
        let probes = probe_fields(lattice, samples.max(2) + 1);
        let mut inner_products = Vec::new();
        let mut max_relative = 0.0f64;
        for &k in &overlap {
            let xi = self.transport_at(k).expect("overlap index has a transport member");
            for pair in probes[1..].windows(2) {
                let g = self.eval_g(k, 0.0, &pair[0]);
                let t = transport(xi, &pair[1])?;
                let ip = g.gevrey_inner(&t, &weight)?;
                let scale = g.gevrey_sobolev_norm(&weight)? * t.gevrey_sobolev_norm(&weight)?;
                let rel = if scale == 0.0 { 0.0 } else { ip.abs() / scale };
                max_relative = max_relative.max(rel);
                inner_products.push((k, ip));
            }
        }
        Ok(OrthogonalityReport {
            by_construction: overlap.is_empty(),
            violation: max_relative > EXACT_TOL,
            overlap,
            inner_products,
            max_relative,
        })
    }

    /// Runs every validator; the integrator refuses systems that fail.
    pub fn validate(&mut self, lattice: &Arc<WaveLattice>, w: &GevreyWeight, xi_r: f64) -> Result<ValidationReport> {
        let growth = self.validate_growth_lipschitz(lattice, w, 6)?;
        let xi_bound = self.validate_xi_bound(w, xi_r)?;
        let orthogonality = self.validate_orthogonality(lattice, w, w.r, 3)?;
        let probe = probe_fields(lattice, 2).pop().expect("two probes");
        let mut commutativity = Vec::new();
        for xi in &self.xi.coefficients {
            let residual = validate_commutativity(xi, &probe, w, w.r)?;
            let scale = probe.gevrey_sobolev_norm(&w.with_r(2.0 * w.r + 1.0))?.max(f64::MIN_POSITIVE);
            commutativity
                .push(CommutativityEntry { experimental: !xi.is_constant(), relative_residual: residual / scale });
        }
        let commutes = commutativity.iter().all(|c| c.experimental || c.relative_residual <= EXACT_TOL);
        let passed = growth.c_growth.is_finite()
            && growth.c_lip.is_finite()
            && xi_bound.is_finite()
            && orthogonality.by_construction
            && commutes;
        self.validated = passed;
        Ok(ValidationReport { growth, xi_bound, orthogonality, commutativity, passed })
    }
}

/// `‖A^r e((ξ·∇)u) − (ξ·∇)A^r e u‖_{L²}` with `e = exp(φ A^{1/2s})`.
pub fn validate_commutativity(xi: &TransportField, u: &SpectralField, w: &GevreyWeight, r: f64) -> Result<f64> {
    let weight = w.with_r(2.0 * r);
    let lhs = transport(xi, u)?.gevrey_weighted(&weight)?;
    let rhs = transport(xi, &u.gevrey_weighted(&weight)?)?;
    Ok(lhs.sub(&rhs)?.l2_norm())
}

fn probe_fields(lattice: &Arc<WaveLattice>, n: usize) -> Vec<SpectralField> {
    let mut out = vec![SpectralField::zeros(lattice).tagged_solenoidal(true)];
    for i in 1..n {
        let scale = 10f64.powi((i % 5) as i32 - 2);
        out.push(random_field(lattice, FieldKind::Solenoidal, PROBE_SEED + i as u64, move |k| scale * (-k).exp()));
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthReport {
    pub c_growth: f64,
    pub c_lip: f64,
    pub n_samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrthogonalityReport {
    /// No Wiener index is shared between the two families.
    pub by_construction: bool,
    pub overlap: Vec<usize>,
    pub inner_products: Vec<(usize, f64)>,
    pub max_relative: f64,
    /// Some shared index produced a nonzero inner product.
    pub violation: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CommutativityEntry {
    pub experimental: bool,
    pub relative_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub growth: GrowthReport,
    pub xi_bound: f64,
    pub orthogonality: OrthogonalityReport,
    pub commutativity: Vec<CommutativityEntry>,
    pub passed: bool,
}

// ----- configuration ----------------------------------------------------

/// One Fourier mode of an additive forcing field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeSpec {
    pub wavevector: Vec<i64>,
    pub amplitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case", deny_unknown_fields)]
pub enum GConfig {
    Zero,
    Additive {
        modes: Vec<ModeSpec>,
        #[serde(default)]
        indices: Option<Vec<usize>>,
    },
    LinearMultiplicative {
        coefficients: Vec<f64>,
        #[serde(default)]
        indices: Option<Vec<usize>>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case", deny_unknown_fields)]
pub enum XiConfig {
    None,
    /// `c_k = magnitude · 2^{-k}`, `k = 1..=k_max`.
    Geometric {
        k_max: usize,
        magnitude: f64,
        #[serde(default)]
        indices: Option<Vec<usize>>,
    },
    Explicit {
        coefficients: Vec<TransportDescriptor>,
        #[serde(default)]
        indices: Option<Vec<usize>>,
    },
}

/// Noise block of the experiment configuration. Without explicit indices the
/// transport family takes Wiener indices `0..n_ξ` and the multiplicative
/// family the indices after it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    pub g: GConfig,
    pub xi: XiConfig,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig { g: GConfig::Zero, xi: XiConfig::Geometric { k_max: 4, magnitude: 0.5, indices: None } }
    }
}

impl NoiseConfig {
    pub fn off() -> Self {
        NoiseConfig { g: GConfig::Zero, xi: XiConfig::None }
    }

    pub fn build(&self, lattice: &Arc<WaveLattice>) -> Result<NoiseSystem> {
        let dim = lattice.dim();
        let xi = match &self.xi {
            XiConfig::None => TransportNoise::none(),
            XiConfig::Geometric { k_max, magnitude, indices } => {
                let mut t = TransportNoise::geometric(dim, *k_max, *magnitude, 0);
                if let Some(ix) = indices {
                    t.index_set = ix.clone();
                }
                t
            }
            XiConfig::Explicit { coefficients, indices } => {
                let coefficients = coefficients.iter().map(|d| d.build(lattice)).collect::<Result<Vec<_>>>()?;
                let index_set = indices.clone().unwrap_or_else(|| (0..coefficients.len()).collect());
                TransportNoise { coefficients, index_set }
            }
        };
        let first = xi.index_set.iter().map(|&i| i + 1).max().unwrap_or(0);
        let g = match &self.g {
            GConfig::Zero => MultiplicativeNoise::zero(),
            GConfig::Additive { modes, indices } => {
                let fields = modes
                    .iter()
                    .map(|m| additive_mode(lattice, &m.wavevector, m.amplitude))
                    .collect::<Result<Vec<_>>>()?;
                let index_set = indices.clone().unwrap_or_else(|| (first..first + fields.len()).collect());
                MultiplicativeNoise { variant: MultiplicativeVariant::Additive(fields), index_set }
            }
            GConfig::LinearMultiplicative { coefficients, indices } => {
                let index_set = indices.clone().unwrap_or_else(|| (first..first + coefficients.len()).collect());
                MultiplicativeNoise {
                    variant: MultiplicativeVariant::LinearMultiplicative(coefficients.clone()),
                    index_set,
                }
            }
        };
        NoiseSystem::new(g, xi)
    }
}

/// Divergence-free single-mode field `amplitude · p e^{ik·x} + c.c.` with
/// unit polarization `p ⊥ k`.
pub fn additive_mode(lattice: &Arc<WaveLattice>, wavevector: &[i64], amplitude: f64) -> Result<SpectralField> {
    match (TransportDescriptor::SingleMode { wavevector: wavevector.to_vec(), amplitude: 2.0 * amplitude })
        .build(lattice)?
    {
        TransportField::Field(f) => Ok(f),
        TransportField::Constant(_) => unreachable!("single-mode descriptor builds a field"),
    }
}
