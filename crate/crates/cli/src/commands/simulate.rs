use std::time::Instant;

use gevrey_core::diagnostics::{fit_radius, shell_spectrum, ShellSpectrum};
use gevrey_core::galerkin::{integrate, Monitor, Trajectory};
use gevrey_core::snapshot::write_checkpoint;
use gevrey_core::{Error, PathSpec};
use rayon::prelude::*;
use serde_json::json;

use super::{finish, num, Finish, RunOptions, Setup};
use crate::config::ExperimentConfig;
use crate::record::{csv, OutputDir, PathRecord, RunRecord};
use crate::CliError;

pub(crate) fn path_stem(p: usize) -> String {
    format!("p{p:04}")
}

/// Integrates every path at the configured cutoff and writes series,
/// spectra, radius fits, stop times and final-state checkpoints.
pub fn cmd_simulate(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<RunRecord, CliError> {
    let started = Instant::now();
    let setup = Setup::new(cfg, opts, true)?;
    let cfg = &setup.cfg;
    let pool = opts.pool()?;
    let cutoff = cfg.cutoff(&setup.lattice);
    let stepper = cfg.stepper(cutoff);
    let seed = cfg.ensemble.master_seed;

    let runs: Vec<Result<Trajectory, Error>> = pool.install(|| {
        (0..cfg.ensemble.n_paths)
            .into_par_iter()
            .map(|p| integrate(&stepper, &setup.system, &PathSpec::new(seed, p as u64, 0), &setup.u0))
            .collect()
    });

    let mut out = OutputDir::create(&opts.out)?;
    let mut warnings = Vec::new();
    let mut paths = Vec::new();
    let mut series = Vec::new();
    let mut stops = Vec::new();
    let mut finals = Vec::new();
    let burn_in = cfg.burn_in();
    for (p, run) in runs.into_iter().enumerate() {
        let traj = run?;
        for w in &traj.warnings {
            if !warnings.contains(w) {
                warnings.push(w.clone());
            }
        }
        if let Some(e) = &traj.failure {
            warnings.push(format!("path {p} excluded: {e}"));
            paths.push(PathRecord { path_index: p as u64, stops: Vec::new(), failure: Some(e.to_string()) });
            continue;
        }
        let fin = &traj.final_state;
        paths.push(PathRecord { path_index: p as u64, stops: fin.stops.clone(), failure: None });
        for r in &traj.records {
            series.push(vec![
                p.to_string(),
                r.step.to_string(),
                num(r.t),
                num(r.energy),
                num(r.enstrophy),
                num(r.h2),
                num(r.budget),
                num(r.h2_int),
            ]);
        }
        for s in &fin.stops {
            let monitor = match s.monitor {
                Monitor::Budget => "budget",
                Monitor::H2Integral => "h2_integral",
            };
            stops.push(vec![p.to_string(), monitor.to_string(), s.step.to_string(), num(s.t)]);
        }

        let spectra: Vec<ShellSpectrum> = traj.snapshots.iter().map(|s| shell_spectrum(&s.u, s.t)).collect();
        let mut spec_rows = Vec::new();
        let mut radius_rows = Vec::new();
        let mut refused = 0;
        for sp in &spectra {
            for sh in &sp.shells {
                spec_rows.push(vec![num(sp.t), sh.kappa.to_string(), num(sh.max_modulus), num(sh.energy)]);
            }
            if sp.t + 1e-12 < burn_in {
                continue;
            }
            match fit_radius(sp) {
                Ok(fit) => radius_rows.push(vec![num(sp.t), num(fit.rate()), num(fit.r_squared)]),
                Err(_) => refused += 1,
            }
        }
        if refused > 0 {
            warnings.push(format!("path {p}: radius fit refused at {refused} output times"));
        }
        let stem = path_stem(p);
        out.write(&format!("spectra_{stem}.csv"), &csv(&["t", "kappa", "shell_max", "shell_energy"], spec_rows))?;
        out.write(&format!("radius_{stem}.csv"), &csv(&["t", "delta_hat", "r_squared"], radius_rows))?;
        if cfg.outputs.checkpoints {
            let dir = out.root().join("checkpoints");
            let phi = fin.t.min(cfg.gevrey.phi_cap);
            write_checkpoint(&dir, &stem, fin, seed, p as u64, cutoff, phi)?;
            out.adopt(&format!("checkpoints/{stem}.snsf"))?;
            out.adopt(&format!("checkpoints/{stem}.json"))?;
        }
        let last = traj.records.last().expect("trajectory has records");
        let radius = spectra.last().and_then(|sp| fit_radius(sp).ok()).map(|f| f.rate());
        finals.push((last.energy, last.enstrophy, radius));
    }
    out.write("series.csv", &csv(&["path", "step", "t", "energy", "enstrophy", "h2", "budget", "h2_int"], series))?;
    out.write("stops.csv", &csv(&["path", "monitor", "step", "t"], stops))?;

    let n_ok = finals.len();
    let mean = |v: Vec<f64>| (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64);
    let count = |m: Monitor| paths.iter().filter(|p| p.stops.iter().any(|s| s.monitor == m)).count();
    let summary = json!({
        "cutoff": cutoff,
        "n_paths": cfg.ensemble.n_paths,
        "n_completed": n_ok,
        "initial_enstrophy": setup.u0.galerkin_project(cutoff).sobolev_norm_sq(1.0),
        "mean_final_energy": mean(finals.iter().map(|f| f.0).collect()),
        "mean_final_enstrophy": mean(finals.iter().map(|f| f.1).collect()),
        "mean_final_delta_hat": mean(finals.iter().filter_map(|f| f.2).collect()),
        "budget_stops": count(Monitor::Budget),
        "h2_integral_stops": count(Monitor::H2Integral),
        "noise_validation": setup.validation,
    });
    let all_failed = n_ok == 0;
    let record = finish(cfg, &pool, started, out, Finish { command: "simulate", warnings, paths, summary })?;
    if all_failed {
        return Err(CliError::NonFinite("every path produced a non-finite state".into()));
    }
    Ok(record)
}
