//! Spectral vector fields, projectors, Stokes powers, Gevrey multipliers and norms.
//!
//! A [`SpectralField`] holds one complex coefficient array per velocity
//! component, indexed by the flat mode index of its [`WaveLattice`]. All
//! operators are diagonal (or block-diagonal per mode) in Fourier space and
//! return new fields; fields are never mutated behind a shared reference.

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::WaveLattice;
use crate::transform::TransformWorkspace;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Parameters of the multiplier `|k|^r exp(φ |k|^{1/s})`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GevreyWeight {
    /// Gevrey index.
    pub s: f64,
    /// Sobolev corrector.
    pub r: f64,
    /// Analyticity width.
    pub phi: f64,
    /// Largest exponent evaluated before clamping.
    pub exp_guard: f64,
}

impl Default for GevreyWeight {
    fn default() -> Self {
        GevreyWeight { s: 1.0, r: 1.0, phi: 0.0, exp_guard: 650.0 }
    }
}

impl GevreyWeight {
    pub fn new(s: f64, r: f64, phi: f64) -> Self {
        GevreyWeight { s, r, phi, ..Default::default() }
    }

    /// Same weight with `φ(t) = min(t, phi_cap)`.
    pub fn at_time(self, t: f64, phi_cap: f64) -> Self {
        GevreyWeight { phi: t.min(phi_cap).max(0.0), ..self }
    }

    pub fn with_r(self, r: f64) -> Self {
        GevreyWeight { r, ..self }
    }

    pub fn with_phi(self, phi: f64) -> Self {
        GevreyWeight { phi, ..self }
    }

    /// Unclamped exponent `φ |k|^{1/s}` for a mode with `|k|^2 = ksq`.
    pub fn exponent(&self, ksq: f64) -> f64 {
        if self.phi == 0.0 {
            0.0
        } else {
            self.phi * ksq.powf(0.5 / self.s)
        }
    }

    /// `|k|^r exp(min(φ|k|^{1/s}, guard))`.
    pub fn multiplier(&self, ksq: f64) -> f64 {
        sobolev_factor(ksq, self.r) * self.exponent(ksq).min(self.exp_guard).exp()
    }
}

/// `|k|^r` with `0^0 = 1`.
fn sobolev_factor(ksq: f64, r: f64) -> f64 {
    if r == 0.0 {
        1.0
    } else {
        ksq.powf(0.5 * r)
    }
}

/// Residuals of the structural invariants of a field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalReport {
    /// `max |conj(û_k) - û_{-k}|` over non-Nyquist modes.
    pub hermitian: f64,
    /// `|û_0|`.
    pub mean: f64,
    /// `max |û_k · k|`; `None` unless the field is tagged divergence-free.
    pub divergence: Option<f64>,
    /// Largest coefficient modulus on the Nyquist rows.
    pub nyquist: f64,
}

impl PhysicalReport {
    pub fn max_residual(&self) -> f64 {
        self.hermitian.max(self.mean).max(self.divergence.unwrap_or(0.0)).max(self.nyquist)
    }
}

/// Complex Fourier coefficients of a mean-free real vector field.
#[derive(Debug, Clone)]
pub struct SpectralField {
    lattice: Arc<WaveLattice>,
    comps: Vec<Vec<Complex64>>,
    solenoidal: bool,
}

/// Equal lattices (by pointer or value), coefficients and solenoidal tag.
impl PartialEq for SpectralField {
    fn eq(&self, other: &Self) -> bool {
        (Arc::ptr_eq(&self.lattice, &other.lattice) || self.lattice == other.lattice)
            && self.comps == other.comps
            && self.solenoidal == other.solenoidal
    }
}

impl SpectralField {
    pub fn zeros(lattice: &Arc<WaveLattice>) -> Self {
        let n = lattice.n_modes();
        SpectralField { lattice: lattice.clone(), comps: vec![vec![ZERO; n]; lattice.dim()], solenoidal: false }
    }

    pub fn from_components(lattice: &Arc<WaveLattice>, comps: Vec<Vec<Complex64>>) -> Result<Self> {
        if comps.len() != lattice.dim() || comps.iter().any(|c| c.len() != lattice.n_modes()) {
            return Err(Error::InvalidArgument(format!(
                "expected {} components of length {}",
                lattice.dim(),
                lattice.n_modes()
            )));
        }
        Ok(SpectralField { lattice: lattice.clone(), comps, solenoidal: false })
    }

    /// Builds a field mode by mode; `f` writes the `dim` coefficients of mode `idx`.
    pub fn from_modes<F>(lattice: &Arc<WaveLattice>, mut f: F) -> Self
    where
        F: FnMut(usize, &mut [Complex64]),
    {
        let mut out = Self::zeros(lattice);
        let dim = lattice.dim();
        let mut buf = [ZERO; 3];
        for idx in lattice.indices() {
            buf[..dim].fill(ZERO);
            f(idx, &mut buf[..dim]);
            for c in 0..dim {
                out.comps[c][idx] = buf[c];
            }
        }
        out
    }

    pub fn lattice(&self) -> &Arc<WaveLattice> {
        &self.lattice
    }

    pub fn dim(&self) -> usize {
        self.lattice.dim()
    }

    pub fn component(&self, c: usize) -> &[Complex64] {
        &self.comps[c]
    }

    pub fn components(&self) -> &[Vec<Complex64>] {
        &self.comps
    }

    pub fn components_mut(&mut self) -> &mut [Vec<Complex64>] {
        &mut self.comps
    }

    pub fn mode(&self, idx: usize) -> [Complex64; 3] {
        let mut m = [ZERO; 3];
        for (c, comp) in self.comps.iter().enumerate() {
            m[c] = comp[idx];
        }
        m
    }

    pub fn set_mode(&mut self, idx: usize, value: &[Complex64]) {
        for (c, comp) in self.comps.iter_mut().enumerate() {
            comp[idx] = value[c];
        }
    }

    /// `|û_k|^2` summed over components.
    pub fn mode_norm_sq(&self, idx: usize) -> f64 {
        self.comps.iter().map(|c| c[idx].norm_sqr()).sum()
    }

    pub fn is_solenoidal(&self) -> bool {
        self.solenoidal
    }

    pub fn tagged_solenoidal(mut self, tag: bool) -> Self {
        self.solenoidal = tag;
        self
    }

    pub fn check_lattice(&self, other: &SpectralField) -> Result<()> {
        if Arc::ptr_eq(&self.lattice, &other.lattice) || *self.lattice == *other.lattice {
            Ok(())
        } else {
            Err(Error::LatticeMismatch)
        }
    }

    /// Largest `|k_i|` over modes carrying a nonzero coefficient.
    pub fn extent(&self) -> usize {
        let mut ext = 0;
        for idx in self.lattice.indices() {
            if self.comps.iter().any(|c| c[idx] != ZERO) {
                let k = self.lattice.wavevector(idx);
                ext = ext.max(k.iter().map(|c| c.unsigned_abs() as usize).max().unwrap_or(0));
            }
        }
        ext
    }

    pub fn is_finite(&self) -> bool {
        self.comps.iter().all(|c| c.iter().all(|z| z.re.is_finite() && z.im.is_finite()))
    }

    // ----- linear algebra -------------------------------------------------

    fn zip_with<F>(&self, other: &SpectralField, f: F) -> Result<SpectralField>
    where
        F: Fn(Complex64, Complex64) -> Complex64,
    {
        self.check_lattice(other)?;
        let comps = self
            .comps
            .iter()
            .zip(&other.comps)
            .map(|(a, b)| a.iter().zip(b).map(|(&x, &y)| f(x, y)).collect())
            .collect();
        Ok(SpectralField { lattice: self.lattice.clone(), comps, solenoidal: self.solenoidal && other.solenoidal })
    }

    pub fn add(&self, other: &SpectralField) -> Result<SpectralField> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &SpectralField) -> Result<SpectralField> {
        self.zip_with(other, |a, b| a - b)
    }

    /// `self + a * other`.
    pub fn axpy(&self, a: f64, other: &SpectralField) -> Result<SpectralField> {
        self.zip_with(other, |x, y| x + y * a)
    }

    pub fn scale(&self, a: f64) -> SpectralField {
        self.map_scalar(|_, _| Complex64::new(a, 0.0))
    }

    /// Multiplies mode `idx` by the scalar `m(idx, |k|^2)` on every component.
    pub fn map_scalar<F>(&self, m: F) -> SpectralField
    where
        F: Fn(usize, f64) -> Complex64,
    {
        let factors: Vec<Complex64> = self.lattice.indices().map(|idx| m(idx, self.lattice.norm_sq(idx))).collect();
        let comps = self.comps.iter().map(|c| c.iter().zip(&factors).map(|(&z, &f)| z * f).collect()).collect();
        SpectralField { lattice: self.lattice.clone(), comps, solenoidal: self.solenoidal }
    }

    /// Keeps modes where `keep(idx)` holds; zeroes the rest.
    pub fn restrict<F>(&self, keep: F) -> SpectralField
    where
        F: Fn(usize) -> bool,
    {
        self.map_scalar(|idx, _| if keep(idx) { Complex64::new(1.0, 0.0) } else { ZERO })
    }

    // ----- projectors -----------------------------------------------------

    /// Leray projection `û_k ↦ (I - k kᵀ/|k|²) û_k`. The zero mode is left
    /// untouched; Nyquist rows are zeroed.
    pub fn leray_project(&self) -> SpectralField {
        let lat = &self.lattice;
        let dim = lat.dim();
        let mut out = self.clone();
        for idx in lat.indices() {
            if lat.norm_sq(idx) == 0.0 {
                continue;
            }
            if lat.is_nyquist(idx) {
                for c in 0..dim {
                    out.comps[c][idx] = ZERO;
                }
                continue;
            }
            let k = lat.wavevector(idx);
            let ksq = lat.norm_sq(idx);
            let mut dot = ZERO;
            for c in 0..dim {
                dot += self.comps[c][idx] * k[c] as f64;
            }
            let dot = dot / ksq;
            for c in 0..dim {
                out.comps[c][idx] = self.comps[c][idx] - dot * k[c] as f64;
            }
        }
        out.solenoidal = true;
        out
    }

    /// `P^N`: keeps modes with `|k| <= N`.
    pub fn galerkin_project(&self, cutoff: usize) -> SpectralField {
        let lim = (cutoff * cutoff) as f64;
        let lat = self.lattice.clone();
        self.restrict(|idx| lat.norm_sq(idx) <= lim)
    }

    /// `Q^N = I - P^N`: keeps modes with `|k| > N`.
    pub fn galerkin_complement(&self, cutoff: usize) -> SpectralField {
        let lim = (cutoff * cutoff) as f64;
        let lat = self.lattice.clone();
        self.restrict(|idx| lat.norm_sq(idx) > lim)
    }

    /// Zeroes modes outside the 2/3-rule mask.
    pub fn dealias(&self) -> SpectralField {
        let lat = self.lattice.clone();
        self.restrict(|idx| lat.in_dealias_mask(idx))
    }

    /// Fractional Stokes power: mode `k` scaled by `|k|^{2r}`.
    pub fn stokes_power(&self, r: f64) -> SpectralField {
        self.map_scalar(|_, ksq| {
            if ksq == 0.0 {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::new(sobolev_factor(ksq, 2.0 * r), 0.0)
            }
        })
    }

    /// Applies `exp(φ A^{1/2s})`, ignoring `w.r`.
    pub fn gevrey_apply(&self, w: &GevreyWeight) -> Result<SpectralField> {
        self.check_exponents(w)?;
        Ok(self.map_scalar(|_, ksq| Complex64::new(w.exponent(ksq).exp(), 0.0)))
    }

    /// Applies the full multiplier `|k|^r exp(φ|k|^{1/s})`.
    pub fn gevrey_weighted(&self, w: &GevreyWeight) -> Result<SpectralField> {
        self.check_exponents(w)?;
        Ok(self.map_scalar(|_, ksq| Complex64::new(w.multiplier(ksq), 0.0)))
    }

    fn check_exponents(&self, w: &GevreyWeight) -> Result<()> {
        if w.phi == 0.0 {
            return Ok(());
        }
        let mut worst = 0.0f64;
        for idx in self.lattice.indices() {
            if self.mode_norm_sq(idx) > 0.0 {
                worst = worst.max(w.exponent(self.lattice.norm_sq(idx)));
            }
        }
        if worst > w.exp_guard {
            Err(Error::OverflowRisk { exponent: worst, guard: w.exp_guard })
        } else {
            Ok(())
        }
    }

    // ----- norms and inner products --------------------------------------

    /// `Σ_k |k|^{2r} |û_k|²`.
    pub fn sobolev_norm_sq(&self, r: f64) -> f64 {
        self.lattice
            .indices()
            .map(|idx| {
                let e = self.mode_norm_sq(idx);
                if e == 0.0 {
                    0.0
                } else {
                    sobolev_factor(self.lattice.norm_sq(idx), 2.0 * r) * e
                }
            })
            .sum()
    }

    pub fn sobolev_norm(&self, r: f64) -> f64 {
        self.sobolev_norm_sq(r).sqrt()
    }

    pub fn l2_norm(&self) -> f64 {
        self.sobolev_norm(0.0)
    }

    /// Natural log of `‖e^{φA^{1/2s}} f‖²_{H^r}`, accumulated by log-sum-exp.
    pub fn gevrey_log_norm_sq(&self, w: &GevreyWeight) -> Result<f64> {
        self.check_exponents(w)?;
        let mut terms = Vec::new();
        for idx in self.lattice.indices() {
            let e = self.mode_norm_sq(idx);
            if e == 0.0 {
                continue;
            }
            let ksq = self.lattice.norm_sq(idx);
            let log_sob = if w.r == 0.0 {
                0.0
            } else if ksq == 0.0 {
                continue;
            } else {
                w.r * ksq.ln()
            };
            terms.push(log_sob + 2.0 * w.exponent(ksq) + e.ln());
        }
        if terms.is_empty() {
            return Ok(f64::NEG_INFINITY);
        }
        let peak = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = terms.iter().map(|t| (t - peak).exp()).sum();
        Ok(peak + sum.ln())
    }

    /// `‖e^{φA^{1/2s}} f‖²_{H^r}`; overflow is reported, never returned as infinity.
    pub fn gevrey_sobolev_norm_sq(&self, w: &GevreyWeight) -> Result<f64> {
        if w.phi == 0.0 {
            return Ok(self.sobolev_norm_sq(w.r));
        }
        self.check_exponents(w)?;
        let direct: f64 = self
            .lattice
            .indices()
            .map(|idx| {
                let e = self.mode_norm_sq(idx);
                if e == 0.0 {
                    return 0.0;
                }
                let ksq = self.lattice.norm_sq(idx);
                sobolev_factor(ksq, 2.0 * w.r) * (2.0 * w.exponent(ksq)).exp() * e
            })
            .sum();
        if direct.is_finite() {
            return Ok(direct);
        }
        let log = self.gevrey_log_norm_sq(w)?;
        let v = log.exp();
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Overflow { log_norm: 0.5 * log })
        }
    }

    pub fn gevrey_sobolev_norm(&self, w: &GevreyWeight) -> Result<f64> {
        self.gevrey_sobolev_norm_sq(w).map(f64::sqrt)
    }

    /// Real part of `Σ_k m(|k|²) û_k · conj(v̂_k)`.
    pub fn weighted_inner<F>(&self, other: &SpectralField, m: F) -> Result<f64>
    where
        F: Fn(f64) -> f64,
    {
        self.check_lattice(other)?;
        let mut acc = 0.0;
        for idx in self.lattice.indices() {
            let mut s = ZERO;
            for c in 0..self.dim() {
                s += self.comps[c][idx] * other.comps[c][idx].conj();
            }
            if s != ZERO {
                acc += m(self.lattice.norm_sq(idx)) * s.re;
            }
        }
        Ok(acc)
    }

    /// `L²` inner product (normalized measure on the torus).
    pub fn inner(&self, other: &SpectralField) -> Result<f64> {
        self.weighted_inner(other, |_| 1.0)
    }

    /// `⟨A^{r/2}e f, A^{r/2}e g⟩` for the Gevrey weight `w` (clamped multiplier).
    pub fn gevrey_inner(&self, other: &SpectralField, w: &GevreyWeight) -> Result<f64> {
        self.weighted_inner(other, |ksq| {
            let m = w.multiplier(ksq);
            m * m
        })
    }

    // ----- checks ---------------------------------------------------------

    pub fn validate_physical(&self) -> PhysicalReport {
        let lat = &self.lattice;
        let dim = self.dim();
        let mut hermitian = 0.0f64;
        let mut nyquist = 0.0f64;
        let mut divergence = 0.0f64;
        let mut mean = 0.0f64;
        for idx in lat.indices() {
            if lat.is_nyquist(idx) {
                for c in 0..dim {
                    nyquist = nyquist.max(self.comps[c][idx].norm());
                }
                continue;
            }
            let neg = lat.negation(idx);
            let k = lat.wavevector(idx);
            let mut dot = ZERO;
            for c in 0..dim {
                hermitian = hermitian.max((self.comps[c][idx].conj() - self.comps[c][neg]).norm());
                dot += self.comps[c][idx] * k[c] as f64;
            }
            divergence = divergence.max(dot.norm());
            if lat.norm_sq(idx) == 0.0 {
                mean = (0..dim).map(|c| self.comps[c][idx].norm_sqr()).sum::<f64>().sqrt();
            }
        }
        PhysicalReport { hermitian, mean, divergence: self.solenoidal.then_some(divergence), nyquist }
    }

    // ----- physical space -------------------------------------------------

    /// Grid values on the lattice's own `grid_n^d` grid, one array per component.
    pub fn to_physical(&self) -> Vec<Vec<f64>> {
        let mut ws = TransformWorkspace::new(self.dim(), self.lattice.grid_n());
        self.comps.iter().map(|c| ws.to_physical(&self.lattice, c)).collect()
    }

    /// Inverse of [`SpectralField::to_physical`]; Nyquist rows and the mean are dropped.
    pub fn from_physical(lattice: &Arc<WaveLattice>, values: &[Vec<f64>]) -> Result<SpectralField> {
        let mut ws = TransformWorkspace::new(lattice.dim(), lattice.grid_n());
        if values.len() != lattice.dim() || values.iter().any(|v| v.len() != ws.n_points()) {
            return Err(Error::InvalidArgument("physical array shape mismatch".into()));
        }
        let ext = lattice.grid_n() / 2;
        let comps = values.iter().map(|v| ws.to_spectral(lattice, v, ext)).collect();
        SpectralField::from_components(lattice, comps)
    }

    /// Mean of `|u(x)|²` over the physical grid.
    pub fn physical_energy(&self) -> f64 {
        let vals = self.to_physical();
        let n = vals[0].len() as f64;
        vals.iter().flat_map(|c| c.iter()).map(|v| v * v).sum::<f64>() / n
    }
}
