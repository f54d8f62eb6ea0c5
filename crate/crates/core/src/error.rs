use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("ensemble must contain at least one particle")]
    EmptyEnsemble,
    #[error("particle number {n} exceeds the configured limit {limit}")]
    TooManyParticles { n: usize, limit: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("vector is not a unit direction (norm {norm})")]
    NotUnit { norm: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("eigendecomposition failed: {0}")]
    Eigen(String),
    #[error("driven propagation did not converge after {doublings} doublings (fidelity gap {gap:e})")]
    NotConverged { doublings: u32, gap: f64 },
    #[error("unitarity defect {defect:e} exceeds tolerance {tol:e}")]
    Unitarity { defect: f64, tol: f64 },
    #[error("integration step {dt} too large (max {max})")]
    StepTooLarge { dt: f64, max: f64 },
    #[error("parameters outside the saddle regime: |delta_eff/(N chi_eff)| = {0}")]
    OutOfRegime(f64),
    #[error("separatrix undefined at Z = {z}")]
    SeparatrixUndefined { z: f64 },
    #[error("readout is degenerate: {0}")]
    DegenerateReadout(String),
    #[error("no first-order signal along the sensing direction")]
    NoSignal,
    #[error("vanishing slope in parity signal")]
    VanishingSlope,
    #[error("config error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    /// True when the failure comes from bad input rather than from numerics.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Config(_)
                | Error::InvalidParameter(_)
                | Error::EmptyEnsemble
                | Error::TooManyParticles { .. }
                | Error::Io(_)
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
