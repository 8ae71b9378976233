//! Error type shared across the crate.

use thiserror::Error;

#[derive(Error, Debug)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("letter index {letter} out of range 1..={dims}")]
    LetterOutOfRange { letter: u8, dims: usize },

    #[error("matrix component {index} is not Hermitian (max deviation {deviation:.3e})")]
    NotHermitian { index: usize, deviation: f64 },

    #[error("empty spectral measure")]
    EmptyMeasure,

    #[error("eigensolver failure: {0}")]
    Eigen(String),

    #[error("NaN detected on path {path} at step {step} (t = {t})")]
    NanDetected { path: u64, step: usize, t: f64 },

    #[error("eigenvalue collision on path {path} at step {step}: gap {gap:.3e} below tolerance")]
    ParticleCollision { path: u64, step: usize, gap: f64 },

    #[error("Riccati flow blew up at t = {t:.6} (norm {norm:.3e})")]
    RiccatiBlowup { t: f64, norm: f64 },

    #[error("time {t} outside solution grid [{lo}, {hi}]")]
    TimeOutOfRange { t: f64, lo: f64, hi: f64 },

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("optimizer did not converge: {0}")]
    OptimizerFailed(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, Error>;
