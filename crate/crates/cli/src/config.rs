//! Experiment configuration file.

use std::path::Path;
use std::sync::Arc;

use gevrey_core::galerkin::StepperConfig;
use gevrey_core::{GevreyWeight, NoiseConfig, NoiseSystem, WaveLattice};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeConfig {
    pub dim: usize,
    pub grid_n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicsConfig {
    pub nu: f64,
    pub horizon: f64,
    pub dt: f64,
    #[serde(default = "yes")]
    pub convection: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GevreyConfig {
    pub s: f64,
    pub r: f64,
    pub phi_cap: f64,
    /// Sobolev index of the transport-coefficient bound.
    pub xi_r: f64,
}

impl Default for GevreyConfig {
    fn default() -> Self {
        GevreyConfig { s: 1.0, r: 1.0, phi_cap: 0.5, xi_r: 4.5 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GalerkinConfig {
    /// Cutoff of single-resolution runs; the dealiasing extent if absent.
    pub cutoff: Option<usize>,
    /// Cutoffs of the decay study.
    pub cutoffs: Vec<usize>,
    pub reference_cutoff: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitialConfig {
    pub beta: f64,
    pub k0: f64,
    pub seed: u64,
}

impl Default for InitialConfig {
    fn default() -> Self {
        InitialConfig { beta: 2.2, k0: 1.0, seed: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnsembleConfig {
    pub n_paths: usize,
    pub master_seed: u64,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        EnsembleConfig { n_paths: 32, master_seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MonitorConfig {
    /// `M`.
    pub budget_threshold: f64,
    /// `R`.
    pub h2_threshold: f64,
}

impl Default for MonitorConfig {
    fn default() -> Self {
        MonitorConfig { budget_threshold: 10.0, h2_threshold: 1e6 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    /// Steps between spectrum and radius outputs; 0 means endpoints only.
    pub snapshot_every: usize,
    /// Write final states as checkpoints.
    pub checkpoints: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { snapshot_every: 0, checkpoints: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OracleConfig {
    /// Number of step sizes `dt, dt/2, ...`.
    pub levels: usize,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig { levels: 4 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InvariantConfig {
    /// Random samples per check.
    pub samples: usize,
}

impl Default for InvariantConfig {
    fn default() -> Self {
        InvariantConfig { samples: 20 }
    }
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub lattice: LatticeConfig,
    pub physics: PhysicsConfig,
    #[serde(default)]
    pub gevrey: GevreyConfig,
    #[serde(default)]
    pub galerkin: GalerkinConfig,
    #[serde(default)]
    pub noise: NoiseConfig,
    #[serde(default)]
    pub initial_condition: InitialConfig,
    #[serde(default)]
    pub ensemble: EnsembleConfig,
    #[serde(default)]
    pub monitors: MonitorConfig,
    #[serde(default)]
    pub outputs: OutputConfig,
    /// Start of the radius fits; `0.1·horizon` if absent.
    #[serde(default)]
    pub burn_in: Option<f64>,
    #[serde(default)]
    pub oracle: OracleConfig,
    #[serde(default)]
    pub invariants: InvariantConfig,
}

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| config_err(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(config_err(format!(
                "schema_version {} unsupported, expected {SCHEMA_VERSION}",
                self.schema_version
            )));
        }
        let lat = self.lattice()?;
        let p = &self.physics;
        if !(p.nu > 0.0) || !(p.dt > 0.0) || !(p.horizon >= 0.0) {
            return Err(config_err("nu and dt must be positive, horizon nonnegative"));
        }
        if self.ensemble.n_paths == 0 {
            return Err(config_err("n_paths must be positive"));
        }
        if !(self.initial_condition.k0 > 0.0) {
            return Err(config_err("k0 must be positive"));
        }
        if let Some(b) = self.burn_in {
            if !(0.0..=p.horizon).contains(&b) {
                return Err(config_err("burn_in must lie in [0, horizon]"));
            }
        }
        let g = &self.galerkin;
        if let Some(nref) = g.reference_cutoff {
            let max_n = g.cutoffs.iter().copied().max().unwrap_or(0);
            if nref < 2 * max_n {
                return Err(config_err(format!(
                    "reference_cutoff {nref} must be at least twice the largest cutoff {max_n}"
                )));
            }
            if self.lattice.grid_n < 3 * nref {
                return Err(config_err(format!(
                    "grid_n {} must be at least 3·reference_cutoff = {}",
                    self.lattice.grid_n,
                    3 * nref
                )));
            }
        }
        self.stepper(self.cutoff(&lat)).check(&lat).map_err(|e| config_err(e.to_string()))?;
        for &n in g.cutoffs.iter().chain(&g.reference_cutoff) {
            self.stepper(n).check(&lat).map_err(|e| config_err(e.to_string()))?;
        }
        self.noise.build(&Arc::new(lat)).map_err(|e| config_err(e.to_string()))?;
        Ok(())
    }

    pub fn lattice(&self) -> Result<WaveLattice, CliError> {
        WaveLattice::new(self.lattice.dim, self.lattice.grid_n).map_err(|e| config_err(e.to_string()))
    }

    pub fn cutoff(&self, lattice: &WaveLattice) -> usize {
        self.galerkin.cutoff.unwrap_or(lattice.dealias_extent())
    }

    pub fn burn_in(&self) -> f64 {
        self.burn_in.unwrap_or(0.1 * self.physics.horizon)
    }

    pub fn weight(&self) -> GevreyWeight {
        GevreyWeight::new(self.gevrey.s, self.gevrey.r, self.gevrey.phi_cap)
    }

    pub fn stepper(&self, cutoff: usize) -> StepperConfig {
        let mut cfg = StepperConfig::new(self.physics.nu, self.physics.dt, self.physics.horizon, cutoff);
        cfg.gevrey = GevreyWeight::new(self.gevrey.s, self.gevrey.r, 0.0);
        cfg.phi_cap = self.gevrey.phi_cap;
        cfg.budget_threshold = self.monitors.budget_threshold;
        cfg.h2_threshold = self.monitors.h2_threshold;
        cfg.k0 = self.initial_condition.k0;
        cfg.convection = self.physics.convection;
        cfg.output_every = self.outputs.snapshot_every;
        cfg
    }

    /// Builds the noise system and runs its validators.
    pub fn noise_system(
        &self,
        lattice: &Arc<WaveLattice>,
    ) -> Result<(NoiseSystem, gevrey_core::noise::ValidationReport), CliError> {
        let mut sys = self.noise.build(lattice).map_err(|e| config_err(e.to_string()))?;
        let report = sys.validate(lattice, &self.weight(), self.gevrey.xi_r).map_err(|e| config_err(e.to_string()))?;
        Ok((sys, report))
    }

    /// Hex SHA-256 of the canonical JSON serialization.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&bytes))
    }
}
