use thiserror::Error;

/// Errors raised by the numerical routines in this crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("sample count {got} does not match grid node count {expected}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("grid resolves band {available} but band {required} was requested")]
    InsufficientGrid { required: usize, available: usize },

    #[error("quadrature did not converge within the refinement cap (last change {last_change:e})")]
    NotConverged { last_change: f64 },

    #[error("projection tail energy {tail:e} exceeds the allowed {limit:e}")]
    TailTooLarge { tail: f64, limit: f64 },

    #[error("invariant violated: {0}")]
    InvariantViolation(String),

    #[error("degenerate Mobius matrix (determinant {0:e})")]
    DegenerateMatrix(f64),

    #[error("orientation-reversing map passed where a holomorphic map is required")]
    OrientationReversing,

    #[error("root bracket not found for lambda in [{lo:e}, {hi:e}]")]
    BracketNotFound { lo: f64, hi: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
