use thiserror::Error;

/// Errors raised by the spectral simulator.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid lattice: {0}")]
    InvalidLattice(String),

    #[error("lattice mismatch: fields live on different wave lattices")]
    LatticeMismatch,

    #[error("gevrey exponent {exponent:.3} exceeds guard {guard}; width too large for this lattice")]
    OverflowRisk { exponent: f64, guard: f64 },

    #[error("gevrey norm overflows f64 (log-norm {log_norm:.3})")]
    Overflow { log_norm: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("noise configuration: {0}")]
    NoiseConfig(String),

    #[error("noise system has not passed validation")]
    NotValidated,

    #[error("non-finite coefficient at step {step} (t = {t})")]
    NonFinite { step: u64, t: f64 },

    #[error("fit refused: {0}")]
    FitRefused(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("snapshot format: {0}")]
    Format(String),

    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
