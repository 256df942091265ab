use std::time::Instant;

use gevrey_core::diagnostics::{ensemble_mean, fit_exp_rate, galerkin_error, GalerkinError};
use gevrey_core::galerkin::{integrate, integrate_until, monitor_tau_r, StopRecord, Trajectory};
use gevrey_core::{Error, NoiseSystem, PathSpec, SpectralField, StepperConfig};
use rayon::prelude::*;
use serde_json::json;

use super::{finish, num, Finish, RunOptions, Setup};
use crate::config::ExperimentConfig;
use crate::record::{csv, OutputDir, PathRecord, RunRecord};
use crate::CliError;

struct Comparison {
    cutoff: usize,
    stop: StopRecord,
    error: GalerkinError,
}

fn checked(traj: Trajectory) -> Result<Trajectory, Error> {
    traj.into_result()
}

/// Field of a trajectory at `step`, re-integrating along the same path when
/// the step is not the final one.
fn state_at(
    cfg: &StepperConfig,
    system: &NoiseSystem,
    spec: &PathSpec,
    u0: &SpectralField,
    traj: &Trajectory,
    step: u64,
) -> Result<SpectralField, Error> {
    if traj.final_state.step == step {
        return Ok(traj.final_state.u.clone());
    }
    Ok(checked(integrate_until(cfg, system, spec, u0, step as usize)?)?.final_state.u)
}

fn compare_path(setup: &Setup, spec: &PathSpec, cutoffs: &[usize], n_ref: usize) -> Result<Vec<Comparison>, Error> {
    let cfg = &setup.cfg;
    let ref_cfg = cfg.stepper(n_ref);
    let reference = checked(integrate(&ref_cfg, &setup.system, spec, &setup.u0)?)?;
    let mut out = Vec::with_capacity(cutoffs.len());
    for &n in cutoffs {
        let coarse_cfg = cfg.stepper(n);
        let coarse = checked(integrate(&coarse_cfg, &setup.system, spec, &setup.u0)?)?;
        let stop = monitor_tau_r(&coarse, &reference, cfg.monitors.h2_threshold)?;
        let u_ref = state_at(&ref_cfg, &setup.system, spec, &setup.u0, &reference, stop.step)?;
        let u_n = state_at(&coarse_cfg, &setup.system, spec, &setup.u0, &coarse, stop.step)?;
        let error = galerkin_error(&u_ref, &u_n, n, 1.0)?;
        out.push(Comparison { cutoff: n, stop, error });
    }
    Ok(out)
}

/// Errors of the cutoff-`N` solutions against the reference cutoff on common
/// Brownian paths, evaluated at `T ∧ τ_R`, and their fitted exponential rate.
pub fn cmd_decay_study(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<RunRecord, CliError> {
    let started = Instant::now();
    let setup = Setup::new(cfg, opts, true)?;
    let cfg = &setup.cfg;
    let mut cutoffs = cfg.galerkin.cutoffs.clone();
    cutoffs.sort_unstable();
    cutoffs.dedup();
    if cutoffs.len() < 3 {
        return Err(CliError::Config("decay study needs at least three distinct cutoffs".into()));
    }
    let n_ref =
        cfg.galerkin.reference_cutoff.ok_or_else(|| CliError::Config("decay study needs reference_cutoff".into()))?;
    let pool = opts.pool()?;
    let seed = cfg.ensemble.master_seed;
    let runs: Vec<Result<Vec<Comparison>, Error>> = pool.install(|| {
        (0..cfg.ensemble.n_paths)
            .into_par_iter()
            .map(|p| compare_path(&setup, &PathSpec::new(seed, p as u64, 0), &cutoffs, n_ref))
            .collect()
    });

    let mut warnings = Vec::new();
    let mut paths = Vec::new();
    let mut per_cutoff = vec![Vec::new(); cutoffs.len()];
    let mut path_rows = Vec::new();
    for (p, run) in runs.into_iter().enumerate() {
        let comps = match run {
            Ok(c) => c,
            Err(e @ Error::NonFinite { .. }) => {
                warnings.push(format!("path {p} excluded: {e}"));
                paths.push(PathRecord { path_index: p as u64, stops: Vec::new(), failure: Some(e.to_string()) });
                continue;
            }
            Err(e) => return Err(e.into()),
        };
        for (i, c) in comps.iter().enumerate() {
            let sq = c.error.total.powi(2);
            per_cutoff[i].push(sq);
            path_rows.push(vec![
                p.to_string(),
                c.cutoff.to_string(),
                c.stop.step.to_string(),
                num(c.stop.t),
                num(sq),
                num(c.error.tail.powi(2)),
                num(c.error.resolved.powi(2)),
            ]);
        }
        paths.push(PathRecord { path_index: p as u64, stops: comps.iter().map(|c| c.stop).collect(), failure: None });
    }
    let n_ok = per_cutoff[0].len();
    if n_ok < 2 {
        let mut out = OutputDir::create(&opts.out)?;
        out.write("decay_paths.csv", &decay_paths_csv(path_rows))?;
        let summary = json!({ "n_completed": n_ok });
        finish(cfg, &pool, started, out, Finish { command: "decay-study", warnings, paths, summary })?;
        return Err(CliError::NonFinite(format!("only {n_ok} paths completed, need 2")));
    }
    let mut means = Vec::new();
    let mut rows = Vec::new();
    for (i, errs) in per_cutoff.iter().enumerate() {
        let (m, se) = ensemble_mean(errs)?;
        means.push(m);
        rows.push(vec![cutoffs[i].to_string(), num(m), num(se)]);
    }
    let decreasing = means.windows(2).all(|w| w[1] < w[0]);
    let fit = fit_exp_rate(&cutoffs, &means);
    let fit_json = match &fit {
        Ok(f) => json!({
            "rate": f.rate(),
            "intercept": f.intercept,
            "r_squared": f.r_squared,
            "n_points": f.n_points,
            "reference_error_estimate": (f.intercept + f.slope * n_ref as f64).exp(),
        }),
        Err(e) => {
            warnings.push(format!("rate fit refused: {e}"));
            serde_json::Value::Null
        }
    };
    let mut out = OutputDir::create(&opts.out)?;
    out.write("decay.csv", &csv(&["N", "mean_error", "se"], rows))?;
    out.write("decay_paths.csv", &decay_paths_csv(path_rows))?;
    let summary = json!({
        "reference_cutoff": n_ref,
        "cutoffs": cutoffs,
        "mean_errors": means,
        "strictly_decreasing": decreasing,
        "n_completed": n_ok,
        "fit": fit_json,
    });
    finish(cfg, &pool, started, out, Finish { command: "decay-study", warnings, paths, summary })
}

fn decay_paths_csv(rows: Vec<Vec<String>>) -> Vec<u8> {
    csv(&["path", "N", "stop_step", "stop_t", "error", "tail", "resolved"], rows)
}
