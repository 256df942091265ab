//! Shell spectra, analyticity-radius and decay-rate fits, Galerkin error
//! splits, estimate checks and ensemble statistics.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{GevreyWeight, SpectralField};
use crate::lattice::WaveLattice;
use crate::nonlinear::{convect, product_gevrey_h1_norm_sq, transport, TransportField};
use crate::random::{random_field_keyed, FieldKind};
use crate::rng::tag;

/// Shells with amplitude below this are ignored by the radius fit.
pub const AMPLITUDE_FLOOR: f64 = 1e-14;

/// Fraction of the dealiasing extent beyond which shells are not fitted.
pub const FIT_EXTENT_FRACTION: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShellEntry {
    pub kappa: usize,
    /// `max |û_k|` over the shell.
    pub max_modulus: f64,
    /// `|k|` of the mode attaining the maximum.
    pub k_at_max: f64,
    /// `Σ |û_k|²` over the shell.
    pub energy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShellSpectrum {
    pub t: f64,
    pub dealias_extent: usize,
    pub shells: Vec<ShellEntry>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub n_points: usize,
    pub floor: f64,
}

impl FitResult {
    /// `-slope`: the analyticity radius for [`fit_radius`], the decay rate for
    /// [`fit_exp_rate`].
    pub fn rate(&self) -> f64 {
        -self.slope
    }
}

/// Per-shell maximum modulus and energy over the dealiased modes.
pub fn shell_spectrum(u: &SpectralField, t: f64) -> ShellSpectrum {
    let lat = u.lattice();
    let mut shells = Vec::new();
    for (&kappa, members) in lat.shells() {
        let mut entry = ShellEntry { kappa, max_modulus: 0.0, k_at_max: f64::INFINITY, energy: 0.0 };
        let mut any = false;
        for &idx in members {
            if !lat.is_active(idx) || !lat.in_dealias_mask(idx) {
                continue;
            }
            any = true;
            let e = u.mode_norm_sq(idx);
            entry.energy += e;
            let m = e.sqrt();
            let k = lat.norm(idx);
            if m > entry.max_modulus || (m == entry.max_modulus && k < entry.k_at_max) {
                entry.max_modulus = m;
                entry.k_at_max = k;
            }
        }
        if any {
            shells.push(entry);
        }
    }
    ShellSpectrum { t, dealias_extent: lat.dealias_extent(), shells }
}

/// Least squares of `ln(|k|·amp)` on `|k|` over the usable shells; `rate()`
/// estimates the analyticity radius.
pub fn fit_radius(spec: &ShellSpectrum) -> Result<FitResult> {
    let limit = FIT_EXTENT_FRACTION * spec.dealias_extent as f64;
    let (xs, ys): (Vec<f64>, Vec<f64>) = spec
        .shells
        .iter()
        .filter(|s| s.max_modulus > AMPLITUDE_FLOOR && s.k_at_max <= limit)
        .map(|s| (s.k_at_max, (s.k_at_max * s.max_modulus).ln()))
        .unzip();
    if xs.len() < 3 {
        return Err(Error::FitRefused(format!("{} usable shells, need 3", xs.len())));
    }
    linear_fit(&xs, &ys, AMPLITUDE_FLOOR)
}

/// Least squares of `ln(error)` on `N`; `rate()` is the exponential rate.
pub fn fit_exp_rate(cutoffs: &[usize], errors: &[f64]) -> Result<FitResult> {
    if cutoffs.len() != errors.len() || cutoffs.len() < 3 {
        return Err(Error::FitRefused("need at least 3 (cutoff, error) pairs".into()));
    }
    if errors.iter().any(|&e| !(e > 0.0) || !e.is_finite()) {
        return Err(Error::FitRefused("errors must be positive and finite".into()));
    }
    let xs: Vec<f64> = cutoffs.iter().map(|&n| n as f64).collect();
    let ys: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    linear_fit(&xs, &ys, 0.0)
}

/// Ordinary least squares; `r_squared` is 1 when the data are constant.
pub fn linear_fit(xs: &[f64], ys: &[f64], floor: f64) -> Result<FitResult> {
    let n = xs.len();
    if n < 3 || ys.len() != n {
        return Err(Error::FitRefused(format!("{n} points, need 3")));
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(Error::FitRefused("abscissae are all equal".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let ss_res: f64 = xs.iter().zip(ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let r_squared = if ss_tot == 0.0 { 1.0 } else { (1.0 - ss_res / ss_tot).clamp(0.0, 1.0) };
    Ok(FitResult { slope, intercept, r_squared, n_points: n, floor })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GalerkinError {
    pub total: f64,
    /// `‖Q^N u_ref‖`.
    pub tail: f64,
    /// `‖P^N u_ref - u^N‖`.
    pub resolved: f64,
}

/// H^r distance between a reference field and a cutoff-`N` approximation,
/// split into tail and resolved parts.
pub fn galerkin_error(
    reference: &SpectralField,
    approx: &SpectralField,
    cutoff: usize,
    r: f64,
) -> Result<GalerkinError> {
    let total = reference.sub(approx)?.sobolev_norm(r);
    let tail = reference.galerkin_complement(cutoff).sobolev_norm(r);
    let resolved = reference.galerkin_project(cutoff).sub(approx)?.sobolev_norm(r);
    Ok(GalerkinError { total, tail, resolved })
}

/// `|⟨A^r e (ξ·∇)²u, A^r e u⟩ + ‖A^r e (ξ·∇)u‖²| / ‖A^r e u‖²` with
/// `e = exp(φ A^{1/2s})`.
pub fn check_cancellation(xi: &TransportField, u: &SpectralField, w: &GevreyWeight, r: f64) -> Result<f64> {
    let weight = w.with_r(2.0 * r);
    let once = transport(xi, u)?;
    let twice = transport(xi, &once)?;
    let ip = twice.gevrey_inner(u, &weight)?;
    let sq = once.gevrey_sobolev_norm_sq(&weight)?;
    let denom = u.gevrey_sobolev_norm_sq(&weight)?;
    if denom == 0.0 {
        return Ok(0.0);
    }
    Ok((ip + sq).abs() / denom)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvectiveReport {
    /// Largest `|⟨A^{1/2}e P((u·∇)v), A^{1/2}e w⟩|` over its bound.
    pub trilinear_max: f64,
    /// Largest `‖A^{1/2}e(u·v)‖` over its bound.
    pub product_max: f64,
    pub n_samples: usize,
    pub skipped: usize,
}

/// Decay rate of the `i`-th sample's random fields.
fn sample_decay(i: usize) -> f64 {
    let golden = 0.618_033_988_749_895;
    0.8 + 1.2 * ((i as f64 + 1.0) * golden).fract()
}

/// The `i`-th random divergence-free probe triple; coefficients depend only
/// on the wavevector, so probes on different grids share their low modes.
pub fn probe_triple(lattice: &Arc<WaveLattice>, seed: u64, i: usize) -> [SpectralField; 3] {
    let delta = sample_decay(i);
    let make = |j: u64| {
        let key = [seed, i as u64, j, tag::SAMPLE];
        random_field_keyed(lattice, FieldKind::Solenoidal, key, None, move |k| (-delta * k).exp())
    };
    [make(0), make(1), make(2)]
}

/// Empirical ratios of both convective estimates over random triples.
pub fn check_convective_bounds(
    lattice: &Arc<WaveLattice>,
    n_samples: usize,
    w: &GevreyWeight,
    seed: u64,
) -> Result<ConvectiveReport> {
    if n_samples < 10 {
        return Err(Error::InvalidArgument("n_samples must be >= 10".into()));
    }
    let h1 = w.with_r(1.0);
    let h2 = w.with_r(2.0);
    let l2 = w.with_r(0.0);
    let mut report = ConvectiveReport { trilinear_max: 0.0, product_max: 0.0, n_samples, skipped: 0 };
    for i in 0..n_samples {
        let [u, v, z] = probe_triple(lattice, seed, i);
        let rhs = (u.gevrey_sobolev_norm(&h1)? * u.gevrey_sobolev_norm(&h2)?).sqrt()
            * v.gevrey_sobolev_norm(&h1)?
            * z.gevrey_sobolev_norm(&h2)?;
        let lhs = convect(&u, &v)?.gevrey_inner(&z, &h1)?.abs();
        let rhs2 = u.gevrey_sobolev_norm(&l2)? * v.gevrey_sobolev_norm(&h1)?
            + u.gevrey_sobolev_norm(&h1)? * v.gevrey_sobolev_norm(&l2)?;
        let lhs2 = product_gevrey_h1_norm_sq(&u, &v, w)?.sqrt();
        if rhs == 0.0 || rhs2 == 0.0 {
            report.skipped += 1;
            continue;
        }
        report.trilinear_max = report.trilinear_max.max(lhs / rhs);
        report.product_max = report.product_max.max(lhs2 / rhs2);
    }
    Ok(report)
}

/// Sample mean and standard error `sd/√n`.
pub fn ensemble_mean(values: &[f64]) -> Result<(f64, f64)> {
    let n = values.len();
    if n < 2 {
        return Err(Error::InvalidArgument(format!("ensemble of {n} values, need 2")));
    }
    let nf = n as f64;
    let mean = values.iter().sum::<f64>() / nf;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (nf - 1.0);
    Ok((mean, (var / nf).sqrt()))
}
