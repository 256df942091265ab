//! Galerkin-truncated stochastic Navier-Stokes system in Itô form, integrated
//! by exponential Euler-Maruyama, with the budget and H² stopping monitors.
//!
//! One step maps `u` to
//! `e^{-νAΔt} [u + Δt·(drift(u) + νAu) + Σ_k diffusion_k(u) ΔW_k]`,
//! so the viscous part is integrated exactly and everything else explicitly.

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::brownian::{increments, IncrementBlock, PathSpec};
use crate::error::{Error, Result};
use crate::field::{GevreyWeight, SpectralField};
use crate::lattice::WaveLattice;
use crate::noise::NoiseSystem;
use crate::nonlinear::{convect_within, ito_corrector, transport};
use crate::random::{random_field_keyed, FieldKind};
use crate::rng::tag;

/// Constant in the advective part of the step-size rule.
pub const C_ADV: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepperConfig {
    pub nu: f64,
    pub dt: f64,
    pub horizon: f64,
    /// Galerkin cutoff: modes with `|k| <= cutoff` are kept.
    pub cutoff: usize,
    /// Gevrey index and corrector of the budget norm; `phi` is ignored.
    pub gevrey: GevreyWeight,
    /// `φ(t) = min(t, phi_cap)`.
    pub phi_cap: f64,
    /// Budget threshold `M`.
    pub budget_threshold: f64,
    /// H² integral threshold `R`.
    pub h2_threshold: f64,
    /// Bound `K₀` on `‖u₀‖²_{H¹}`.
    pub k0: f64,
    pub convection: bool,
    /// Steps between stored snapshots; 0 stores only the endpoints.
    pub output_every: usize,
}

impl StepperConfig {
    pub fn new(nu: f64, dt: f64, horizon: f64, cutoff: usize) -> Self {
        StepperConfig {
            nu,
            dt,
            horizon,
            cutoff,
            gevrey: GevreyWeight::default(),
            phi_cap: 0.5,
            budget_threshold: 10.0,
            h2_threshold: 1e6,
            k0: 1.0,
            convection: true,
            output_every: 0,
        }
    }

    pub fn n_steps(&self) -> Result<usize> {
        let n = (self.horizon / self.dt).round();
        if (n * self.dt - self.horizon).abs() > 1e-9 * self.horizon.max(self.dt) {
            return Err(Error::InvalidArgument(format!(
                "horizon {} is not a multiple of dt {}",
                self.horizon, self.dt
            )));
        }
        Ok(n as usize)
    }

    pub fn check(&self, lattice: &WaveLattice) -> Result<()> {
        if !(self.nu > 0.0) {
            return Err(Error::InvalidArgument("nu must be positive".into()));
        }
        if !(self.dt > 0.0) || !(self.horizon >= 0.0) {
            return Err(Error::InvalidArgument("dt must be positive and horizon nonnegative".into()));
        }
        if !(self.budget_threshold > 1.0) {
            return Err(Error::InvalidArgument("budget threshold M must exceed 1".into()));
        }
        if !(self.h2_threshold >= 0.0) {
            return Err(Error::InvalidArgument("H2 threshold R must be nonnegative".into()));
        }
        if self.cutoff == 0 || self.cutoff > lattice.dealias_extent() {
            return Err(Error::InvalidArgument(format!(
                "cutoff {} must lie in 1..={} for grid {}",
                self.cutoff,
                lattice.dealias_extent(),
                lattice.grid_n()
            )));
        }
        self.n_steps().map(|_| ())
    }

    fn weight_at(&self, t: f64, r: f64) -> GevreyWeight {
        self.gevrey.at_time(t, self.phi_cap).with_r(r)
    }
}

/// Warnings from the step-size rule
/// `dt <= min(0.5 / (C_ADV·N·‖u‖_{H¹}), 0.1 / Σ_k |ξ_k|² N²)`.
pub fn dt_stability(cfg: &StepperConfig, system: &NoiseSystem, u: &SpectralField) -> Vec<String> {
    let mut out = Vec::new();
    let n = cfg.cutoff as f64;
    let h1 = u.sobolev_norm(1.0);
    if cfg.convection && h1 > 0.0 {
        let lim = 0.5 / (C_ADV * n * h1);
        if cfg.dt > lim {
            out.push(format!("dt {} exceeds advective limit {lim:.3e}", cfg.dt));
        }
    }
    let xi_sq: f64 = system
        .xi
        .coefficients
        .iter()
        .map(|xi| match xi {
            crate::nonlinear::TransportField::Constant(v) => v.iter().map(|x| x * x).sum::<f64>(),
            crate::nonlinear::TransportField::Field(f) => {
                let phys = f.to_physical();
                let pts = phys[0].len();
                (0..pts).map(|p| phys.iter().map(|c| c[p] * c[p]).sum::<f64>()).fold(0.0, f64::max)
            }
        })
        .sum();
    if xi_sq > 0.0 {
        let lim = 0.1 / (xi_sq * n * n);
        if cfg.dt > lim {
            out.push(format!("dt {} exceeds transport-noise limit {lim:.3e}", cfg.dt));
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Monitor {
    /// Gevrey budget exceeded `‖u₀^N‖²_{H¹} + M`.
    Budget,
    /// `∫‖u‖²_{H²}` exceeded `R`.
    H2Integral,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StopRecord {
    pub monitor: Monitor,
    pub step: u64,
    pub t: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub step: u64,
    pub t: f64,
    pub u: SpectralField,
    /// `‖u₀^N‖²_{H¹}`, the reference level of the budget monitor.
    pub initial_enstrophy: f64,
    pub budget_sup: f64,
    pub budget_int: f64,
    pub h2_int: f64,
    pub stops: Vec<StopRecord>,
}

impl SimState {
    /// State at `t = 0`; the field is projected onto the Galerkin space.
    pub fn initial(cfg: &StepperConfig, u0: &SpectralField) -> Result<SimState> {
        let u = galerkin_space(u0, cfg.cutoff).tagged_solenoidal(true);
        let enstrophy = u.sobolev_norm_sq(1.0);
        let budget_sup = u.gevrey_sobolev_norm_sq(&cfg.weight_at(0.0, 1.0))?;
        Ok(SimState {
            step: 0,
            t: 0.0,
            u,
            initial_enstrophy: enstrophy,
            budget_sup,
            budget_int: 0.0,
            h2_int: 0.0,
            stops: Vec::new(),
        })
    }

    pub fn budget(&self) -> f64 {
        self.budget_sup + self.budget_int
    }

    pub fn stop(&self, monitor: Monitor) -> Option<StopRecord> {
        self.stops.iter().copied().find(|s| s.monitor == monitor)
    }
}

/// Per-step scalar diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: u64,
    pub t: f64,
    pub energy: f64,
    pub enstrophy: f64,
    pub h2: f64,
    pub budget: f64,
    pub h2_int: f64,
}

impl StepRecord {
    fn of(state: &SimState) -> Self {
        StepRecord {
            step: state.step,
            t: state.t,
            energy: state.u.sobolev_norm_sq(0.0),
            enstrophy: state.u.sobolev_norm_sq(1.0),
            h2: state.u.sobolev_norm_sq(2.0),
            budget: state.budget(),
            h2_int: state.h2_int,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub dt: f64,
    pub cutoff: usize,
    pub records: Vec<StepRecord>,
    pub snapshots: Vec<SimState>,
    pub final_state: SimState,
    pub warnings: Vec<String>,
    /// Set when a step produced a non-finite coefficient.
    pub failure: Option<Error>,
}

impl Trajectory {
    pub fn into_result(self) -> Result<Trajectory> {
        match &self.failure {
            Some(e) => Err(e.clone()),
            None => Ok(self),
        }
    }

    pub fn stop(&self, monitor: Monitor) -> Option<StopRecord> {
        self.final_state.stop(monitor)
    }
}

/// `P^N` restricted to active modes; the Galerkin space of the stepper.
fn galerkin_space(u: &SpectralField, cutoff: usize) -> SpectralField {
    let lat = u.lattice().clone();
    let lim = (cutoff * cutoff) as f64;
    u.restrict(|idx| lat.is_active(idx) && lat.norm_sq(idx) <= lim)
}

/// Everything in the drift except the viscous term.
fn explicit_drift(u: &SpectralField, cfg: &StepperConfig, system: &NoiseSystem) -> Result<SpectralField> {
    let mut out = ito_corrector(&system.xi.coefficients, u)?;
    if cfg.convection {
        out = out.sub(&convect_within(u, u, cfg.cutoff)?)?;
    }
    Ok(galerkin_space(&out, cfg.cutoff).tagged_solenoidal(true))
}

/// `-P^N P((u·∇)u) - νAu + ½ Σ_k P^N P((ξ_k·∇)(ξ_k·∇)u)`.
pub fn drift(u: &SpectralField, cfg: &StepperConfig, system: &NoiseSystem) -> Result<SpectralField> {
    let viscous = u.stokes_power(1.0).scale(cfg.nu);
    Ok(galerkin_space(&explicit_drift(u, cfg, system)?.sub(&viscous)?, cfg.cutoff).tagged_solenoidal(true))
}

/// `P^N P[g_k(u) - (ξ_k·∇)u]` for every Wiener index `k`.
pub fn diffusion(u: &SpectralField, t: f64, cfg: &StepperConfig, system: &NoiseSystem) -> Result<Vec<SpectralField>> {
    (0..system.n_wiener())
        .map(|k| {
            let mut term = system.eval_g(k, t, u);
            if let Some(xi) = system.transport_at(k) {
                term = term.sub(&transport(xi, u)?)?;
            }
            Ok(galerkin_space(&term.leray_project(), cfg.cutoff).tagged_solenoidal(true))
        })
        .collect()
}

/// One exponential Euler-Maruyama step driven by the increments `dw`.
pub fn step(state: &SimState, cfg: &StepperConfig, system: &NoiseSystem, dw: &[f64]) -> Result<SimState> {
    if dw.len() != system.n_wiener() {
        return Err(Error::InvalidArgument(format!("expected {} increments, got {}", system.n_wiener(), dw.len())));
    }
    let u = &state.u;
    let mut v = u.axpy(cfg.dt, &explicit_drift(u, cfg, system)?)?;
    for (term, &dwk) in diffusion(u, state.t, cfg, system)?.iter().zip(dw) {
        if dwk != 0.0 {
            v = v.axpy(dwk, term)?;
        }
    }
    let decay = cfg.nu * cfg.dt;
    let next = galerkin_space(&v.map_scalar(|_, ksq| Complex64::new((-decay * ksq).exp(), 0.0)), cfg.cutoff)
        .tagged_solenoidal(true);
    let step = state.step + 1;
    let t = step as f64 * cfg.dt;
    if !next.is_finite() {
        return Err(Error::NonFinite { step, t });
    }

    let budget_int = state.budget_int + cfg.nu * cfg.dt * u.gevrey_sobolev_norm_sq(&cfg.weight_at(state.t, 2.0))?;
    let h2_int = state.h2_int + cfg.dt * u.sobolev_norm_sq(2.0);
    let budget_sup = state.budget_sup.max(next.gevrey_sobolev_norm_sq(&cfg.weight_at(t, 1.0))?);
    let mut stops = state.stops.clone();
    if state.stop(Monitor::Budget).is_none() && budget_sup + budget_int > state.initial_enstrophy + cfg.budget_threshold
    {
        stops.push(StopRecord { monitor: Monitor::Budget, step, t });
    }
    if state.stop(Monitor::H2Integral).is_none() && h2_int >= cfg.h2_threshold {
        stops.push(StopRecord { monitor: Monitor::H2Integral, step, t });
    }
    Ok(SimState { step, t, u: next, initial_enstrophy: state.initial_enstrophy, budget_sup, budget_int, h2_int, stops })
}

fn check_system(cfg: &StepperConfig, system: &NoiseSystem, u: &SpectralField) -> Result<()> {
    cfg.check(u.lattice())?;
    if !system.is_validated() {
        return Err(Error::NotValidated);
    }
    Ok(())
}

/// Runs every step of `block`, starting from `state` (which must sit at the
/// block's first step).
pub fn run(cfg: &StepperConfig, system: &NoiseSystem, state: SimState, block: &IncrementBlock) -> Result<Trajectory> {
    check_system(cfg, system, &state.u)?;
    if block.first_step != state.step || block.spec.n_processes != system.n_wiener() {
        return Err(Error::InvalidArgument("increment block does not match state or noise system".into()));
    }
    if (block.dt - cfg.dt).abs() > 1e-15 * cfg.dt {
        return Err(Error::InvalidArgument(format!("block dt {} differs from config dt {}", block.dt, cfg.dt)));
    }
    let warnings = dt_stability(cfg, system, &state.u);
    let mut records = Vec::with_capacity(block.n_steps + 1);
    records.push(StepRecord::of(&state));
    let mut snapshots = vec![state.clone()];
    let mut current = state;
    let mut failure = None;
    for s in 0..block.n_steps {
        match step(&current, cfg, system, block.row(s)) {
            Ok(next) => current = next,
            Err(e) => {
                failure = Some(e);
                break;
            }
        }
        records.push(StepRecord::of(&current));
        if cfg.output_every > 0 && (s + 1) % cfg.output_every == 0 && s + 1 != block.n_steps {
            snapshots.push(current.clone());
        }
    }
    if snapshots.last().map(|s| s.step) != Some(current.step) {
        snapshots.push(current.clone());
    }
    Ok(Trajectory { dt: cfg.dt, cutoff: cfg.cutoff, records, snapshots, final_state: current, warnings, failure })
}

/// Integrates `u₀` over `[0, horizon]` along the Brownian path `spec`.
pub fn integrate(cfg: &StepperConfig, system: &NoiseSystem, spec: &PathSpec, u0: &SpectralField) -> Result<Trajectory> {
    integrate_until(cfg, system, spec, u0, cfg.n_steps()?)
}

/// As [`integrate`] but stops after `n_steps` steps.
pub fn integrate_until(
    cfg: &StepperConfig,
    system: &NoiseSystem,
    spec: &PathSpec,
    u0: &SpectralField,
    n_steps: usize,
) -> Result<Trajectory> {
    check_system(cfg, system, u0)?;
    let state = SimState::initial(cfg, u0)?;
    if state.initial_enstrophy > cfg.k0 * (1.0 + 1e-12) {
        return Err(Error::InvalidArgument(format!(
            "initial enstrophy {} exceeds K0 = {}",
            state.initial_enstrophy, cfg.k0
        )));
    }
    let spec = PathSpec { n_processes: system.n_wiener(), ..*spec };
    let block = increments(&spec, 0, cfg.dt, n_steps)?;
    run(cfg, system, state, &block)
}

/// Continues a stored state for `n_steps` further steps on the same path.
pub fn resume(
    cfg: &StepperConfig,
    system: &NoiseSystem,
    spec: &PathSpec,
    state: SimState,
    n_steps: usize,
) -> Result<Trajectory> {
    let spec = PathSpec { n_processes: system.n_wiener(), ..*spec };
    let block = increments(&spec, state.step, cfg.dt, n_steps)?;
    run(cfg, system, state, &block)
}

/// Closed-form solution without convection, `g = 0` and one constant `ξ`:
/// `û_k(t) = û_k(0) exp(-ν|k|²t - i(ξ·k)W_t)`.
pub fn linear_exact(u0: &SpectralField, xi: &[f64], nu: f64, w_t: f64, t: f64) -> SpectralField {
    let lat = u0.lattice().clone();
    u0.map_scalar(|idx, ksq| {
        let k = lat.wavevector(idx);
        let a: f64 = xi.iter().zip(&k).map(|(x, &c)| x * c as f64).sum();
        Complex64::from_polar((-nu * ksq * t).exp(), -a * w_t)
    })
}

/// First step boundary at which `∫(‖u^N‖²_{H²} + ‖u^{ref}‖²_{H²})dσ >= R`,
/// with left-endpoint quadrature; the final time if never.
pub fn monitor_tau_r(coarse: &Trajectory, reference: &Trajectory, r: f64) -> Result<StopRecord> {
    if coarse.records.len() != reference.records.len() || (coarse.dt - reference.dt).abs() > 0.0 {
        return Err(Error::GridMismatch(format!(
            "{} records at dt {} vs {} at dt {}",
            coarse.records.len(),
            coarse.dt,
            reference.records.len(),
            reference.dt
        )));
    }
    let mut acc = 0.0;
    for (i, (a, b)) in coarse.records.iter().zip(&reference.records).enumerate().skip(1) {
        let prev = (&coarse.records[i - 1], &reference.records[i - 1]);
        if a.step != b.step {
            return Err(Error::GridMismatch(format!("step {} vs {}", a.step, b.step)));
        }
        acc += coarse.dt * (prev.0.h2 + prev.1.h2);
        if acc >= r {
            return Ok(StopRecord { monitor: Monitor::H2Integral, step: a.step, t: a.t });
        }
    }
    let last = coarse.records.last().expect("trajectory has an initial record");
    Ok(StopRecord { monitor: Monitor::H2Integral, step: last.step, t: last.t })
}

/// Random divergence-free data with `|û_k| ∝ |k|^{-beta}`, scaled so that
/// `‖u₀‖²_{H¹} = k0`. Coefficients depend on the wavevector, not the grid.
pub fn initial_condition(
    lattice: &Arc<WaveLattice>,
    seed: u64,
    beta: f64,
    k0: f64,
    cutoff: Option<usize>,
) -> SpectralField {
    let key = [seed, lattice.dim() as u64, 0, tag::INITIAL];
    let raw = random_field_keyed(lattice, FieldKind::Solenoidal, key, cutoff, |k| k.powf(-beta));
    let h1 = raw.sobolev_norm_sq(1.0);
    if h1 == 0.0 {
        return raw;
    }
    raw.scale((k0 / h1).sqrt())
}
