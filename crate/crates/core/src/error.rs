use crate::transport::Trajectory;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid Lie algebra: {0}")]
    InvalidAlgebra(String),

    #[error("unknown catalog entry `{0}`")]
    UnknownCatalog(String),

    #[error("spray undefined near 0: |y| = {norm:.3e} is below the floor {floor:.3e}")]
    Domain { norm: f64, floor: f64 },

    #[error("regularity failure: {0}")]
    Regularity(String),

    #[error("unsupported for this spray variant: {0}")]
    Unsupported(&'static str),

    #[error("degenerate flag: denominator {0:.3e} below 1e-12")]
    DegenerateFlag(f64),

    #[error("integration failed: {reason}")]
    Integration {
        reason: String,
        partial: Box<Trajectory>,
    },

    #[error("trajectory left the slit domain at t = {t}")]
    DomainExit { t: f64, partial: Box<Trajectory> },

    #[error("requested span [{t0}, {t1}] is not covered by the velocity path")]
    SpanMismatch { t0: f64, t1: f64 },

    #[error("refused: {0}")]
    Refused(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
