use std::time::Instant;

use gevrey_core::brownian::{increments, refine};
use gevrey_core::diagnostics::{ensemble_mean, linear_fit};
use gevrey_core::galerkin::{linear_exact, run, SimState};
use gevrey_core::noise::MultiplicativeVariant;
use gevrey_core::nonlinear::TransportField;
use gevrey_core::{Error, PathSpec, SpectralField};
use rayon::prelude::*;
use serde_json::json;

use super::{finish, num, Finish, RunOptions, Setup};
use crate::config::ExperimentConfig;
use crate::record::{csv, OutputDir, PathRecord, RunRecord};
use crate::CliError;

/// Squared endpoint errors of one path at every level: the L² error and the
/// largest per-mode modulus error.
fn path_errors(
    setup: &Setup,
    xi: &[f64],
    wiener: usize,
    spec: &PathSpec,
    levels: usize,
) -> Result<Vec<(f64, f64)>, Error> {
    let cfg = &setup.cfg;
    let base = cfg.stepper(cfg.cutoff(&setup.lattice));
    let mut block = increments(spec, 0, base.dt, base.n_steps()?)?;
    let mut out = Vec::with_capacity(levels);
    for level in 0..levels {
        if level > 0 {
            block = refine(&block, 2)?;
        }
        let stepper = gevrey_core::StepperConfig { dt: block.dt, ..base };
        let start = SimState::initial(&stepper, &setup.u0)?;
        let exact = linear_exact(&start.u, xi, stepper.nu, block.total(wiener), stepper.horizon);
        let traj = run(&stepper, &setup.system, start, &block)?.into_result()?;
        let u = &traj.final_state.u;
        let l2 = u.sub(&exact)?.sobolev_norm_sq(0.0);
        out.push((l2, modulus_error(u, &exact).powi(2)));
    }
    Ok(out)
}

fn modulus_error(u: &SpectralField, exact: &SpectralField) -> f64 {
    u.lattice()
        .indices()
        .map(|idx| (u.mode_norm_sq(idx).sqrt() - exact.mode_norm_sq(idx).sqrt()).abs())
        .fold(0.0, f64::max)
}

/// Strong endpoint error of the stepper against the closed-form solution of
/// the linear problem, over bridge-refined step sizes.
pub fn cmd_linear_oracle(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<RunRecord, CliError> {
    let started = Instant::now();
    let setup = Setup::new(cfg, opts, true)?;
    let cfg = &setup.cfg;
    if cfg.physics.convection {
        return Err(CliError::Config("linear oracle requires convection off".into()));
    }
    if !matches!(setup.system.g.variant, MultiplicativeVariant::Zero) {
        return Err(CliError::Config("linear oracle requires g = 0".into()));
    }
    let (xi, wiener) = match (&setup.system.xi.coefficients[..], &setup.system.xi.index_set[..]) {
        ([TransportField::Constant(v)], [k]) => (v.clone(), *k),
        _ => return Err(CliError::Config("linear oracle requires exactly one constant transport coefficient".into())),
    };
    let levels = cfg.oracle.levels;
    if levels < 2 {
        return Err(CliError::Config("linear oracle needs at least two levels".into()));
    }
    let pool = opts.pool()?;
    let seed = cfg.ensemble.master_seed;
    let n_proc = setup.system.n_wiener();
    let runs: Vec<Result<Vec<(f64, f64)>, Error>> = pool.install(|| {
        (0..cfg.ensemble.n_paths)
            .into_par_iter()
            .map(|p| path_errors(&setup, &xi, wiener, &PathSpec::new(seed, p as u64, n_proc), levels))
            .collect()
    });

    let mut warnings = Vec::new();
    let mut paths = Vec::new();
    let mut l2 = vec![Vec::new(); levels];
    let mut modulus = vec![Vec::new(); levels];
    for (p, run) in runs.into_iter().enumerate() {
        match run {
            Ok(errs) => {
                for (i, (a, b)) in errs.into_iter().enumerate() {
                    l2[i].push(a);
                    modulus[i].push(b);
                }
                paths.push(PathRecord { path_index: p as u64, stops: Vec::new(), failure: None });
            }
            Err(e @ Error::NonFinite { .. }) => {
                warnings.push(format!("path {p} excluded: {e}"));
                paths.push(PathRecord { path_index: p as u64, stops: Vec::new(), failure: Some(e.to_string()) });
            }
            Err(e) => return Err(e.into()),
        }
    }
    if l2[0].len() < 2 {
        return Err(CliError::NonFinite(format!("only {} paths completed, need 2", l2[0].len())));
    }

    let dts: Vec<f64> = (0..levels).map(|i| cfg.physics.dt / (1u64 << i) as f64).collect();
    let mut rows = Vec::new();
    let mut rms = Vec::new();
    let mut rms_mod = Vec::new();
    for i in 0..levels {
        let (m, se) = ensemble_mean(&l2[i])?;
        let (mm, _) = ensemble_mean(&modulus[i])?;
        rms.push(m.sqrt());
        rms_mod.push(mm.sqrt());
        rows.push(vec![i.to_string(), num(dts[i]), num(m.sqrt()), num(rms_mod[i]), num(m), num(se)]);
    }
    let slope = |errs: &[f64]| -> serde_json::Value {
        if errs.iter().any(|&e| !(e > 0.0)) {
            return serde_json::Value::Null;
        }
        let xs: Vec<f64> = dts.iter().map(|d| d.ln()).collect();
        let ys: Vec<f64> = errs.iter().map(|e| e.ln()).collect();
        match linear_fit(&xs, &ys, 0.0) {
            Ok(f) => json!({ "slope": f.slope, "intercept": f.intercept, "r_squared": f.r_squared }),
            Err(_) => serde_json::Value::Null,
        }
    };
    let summary = json!({
        "dt": dts,
        "rms_error": rms,
        "rms_modulus_error": rms_mod,
        "fit": slope(&rms),
        "modulus_fit": slope(&rms_mod),
        "n_completed": l2[0].len(),
    });
    let mut out = OutputDir::create(&opts.out)?;
    out.write(
        "oracle.csv",
        &csv(&["level", "dt", "rms_error", "rms_modulus_error", "mean_sq_error", "se_sq_error"], rows),
    )?;
    finish(cfg, &pool, started, out, Finish { command: "linear-oracle", warnings, paths, summary })
}
