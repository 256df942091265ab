//! Fourier-Galerkin simulator for the stochastic Navier-Stokes equation on the
//! torus with multiplicative and transport noise, with diagnostics for Gevrey
//! regularity and the decay of Galerkin truncation error.

pub mod brownian;
pub mod diagnostics;
pub mod error;
pub mod field;
pub mod galerkin;
pub mod lattice;
pub mod noise;
pub mod nonlinear;
pub mod random;
pub mod rng;
pub mod snapshot;
pub mod transform;

pub use brownian::{IncrementBlock, PathSpec};
pub use error::{Error, Result};
pub use field::{GevreyWeight, PhysicalReport, SpectralField};
pub use galerkin::{SimState, StepperConfig, Trajectory};
pub use lattice::WaveLattice;
pub use noise::{NoiseConfig, NoiseSystem};
