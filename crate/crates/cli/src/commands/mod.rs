//! The four experiment commands. Each one writes its outputs and a
//! `run_record.json` under the output directory.

mod decay;
mod invariants;
mod oracle;
mod simulate;

use std::path::PathBuf;
use std::sync::Arc;
use std::time::Instant;

use gevrey_core::galerkin::initial_condition;
use gevrey_core::noise::ValidationReport;
use gevrey_core::{NoiseSystem, SpectralField, WaveLattice};
use rayon::ThreadPool;

use crate::config::{ExperimentConfig, SCHEMA_VERSION};
use crate::record::{OutputDir, PathRecord, RunRecord, Versions};
use crate::CliError;

pub use decay::cmd_decay_study;
pub use invariants::cmd_invariants;
pub use oracle::cmd_linear_oracle;
pub use simulate::cmd_simulate;

/// Command-line overrides and execution settings.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub out: PathBuf,
    pub paths: Option<usize>,
    pub seed: Option<u64>,
    /// Worker threads; the rayon default if absent.
    pub threads: Option<usize>,
}

impl RunOptions {
    pub fn new(out: impl Into<PathBuf>) -> Self {
        RunOptions { out: out.into(), ..Default::default() }
    }

    /// The configuration with flag overrides applied, revalidated.
    pub fn effective(&self, cfg: &ExperimentConfig) -> Result<ExperimentConfig, CliError> {
        let mut cfg = cfg.clone();
        if let Some(n) = self.paths {
            cfg.ensemble.n_paths = n;
        }
        if let Some(s) = self.seed {
            cfg.ensemble.master_seed = s;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn pool(&self) -> Result<ThreadPool, CliError> {
        rayon::ThreadPoolBuilder::new()
            .num_threads(self.threads.unwrap_or(0))
            .build()
            .map_err(|e| CliError::Config(format!("cannot start worker pool: {e}")))
    }
}

/// Everything a path-parallel command needs before it starts integrating.
struct Setup {
    cfg: ExperimentConfig,
    lattice: Arc<WaveLattice>,
    system: NoiseSystem,
    validation: ValidationReport,
    u0: SpectralField,
}

impl Setup {
    fn new(cfg: &ExperimentConfig, opts: &RunOptions, require_valid_noise: bool) -> Result<Setup, CliError> {
        let cfg = opts.effective(cfg)?;
        let lattice = Arc::new(cfg.lattice()?);
        let (system, validation) = cfg.noise_system(&lattice)?;
        if require_valid_noise && !validation.passed {
            return Err(CliError::Config(format!(
                "noise validation failed: {}",
                noise_failures(&validation).join("; ")
            )));
        }
        let ic = &cfg.initial_condition;
        let u0 = initial_condition(&lattice, ic.seed, ic.beta, ic.k0, None);
        Ok(Setup { cfg, lattice, system, validation, u0 })
    }
}

fn noise_failures(report: &ValidationReport) -> Vec<String> {
    let mut out = Vec::new();
    let o = &report.orthogonality;
    if !o.by_construction {
        out.push(format!("Wiener indices {:?} shared between g and xi", o.overlap));
    }
    if o.violation {
        out.push(format!("g and transport terms not orthogonal, relative inner product {:e}", o.max_relative));
    }
    for (i, c) in report.commutativity.iter().enumerate() {
        if !c.experimental && c.relative_residual > 1e-12 {
            out.push(format!("xi {i} fails commutativity, residual {:e}", c.relative_residual));
        }
    }
    if out.is_empty() && !report.passed {
        out.push("validator rejected the noise system".into());
    }
    out
}

/// Shortest round-trip text of a float, in scientific notation.
pub(crate) fn num(x: f64) -> String {
    format!("{x:e}")
}

struct Finish {
    command: &'static str,
    warnings: Vec<String>,
    paths: Vec<PathRecord>,
    summary: serde_json::Value,
}

fn finish(
    cfg: &ExperimentConfig,
    pool: &ThreadPool,
    started: Instant,
    out: OutputDir,
    done: Finish,
) -> Result<RunRecord, CliError> {
    let root = out.root().to_path_buf();
    let record = RunRecord {
        command: done.command.to_string(),
        config_hash: cfg.hash(),
        versions: Versions { harness: env!("CARGO_PKG_VERSION").to_string(), schema: SCHEMA_VERSION },
        threads: pool.current_num_threads(),
        wall_time_s: started.elapsed().as_secs_f64(),
        warnings: done.warnings,
        paths: done.paths,
        summary: done.summary,
        manifest: out.into_manifest(),
    };
    record.write(&root)?;
    Ok(record)
}
