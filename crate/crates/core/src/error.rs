use thiserror::Error;

/// Errors produced by the library layer.
#[derive(Error, Debug, Clone)]
pub enum QacError {
    /// Input violates a structural invariant (Hermiticity, norm promise, ...).
    #[error("validation: {0}")]
    Validation(String),

    /// Scalar argument outside its admissible range.
    #[error("range: {0}")]
    Range(String),

    /// Iterative refinement did not reach the requested tolerance.
    #[error("non-convergence: {context} (last two iterates differ by {residual:.3e}, tolerance {tolerance:.3e})")]
    Convergence {
        context: String,
        residual: f64,
        tolerance: f64,
    },

    /// Parameter-selection formulas have no solution for these inputs.
    #[error("infeasible parameters: {0}")]
    Infeasible(String),

    /// Missing or inconsistent configuration (e.g. absent block-encoding witnesses).
    #[error("configuration: {0}")]
    Config(String),

    /// A spectral-gap promise failed during a scan.
    #[error("gap violation: {0}")]
    GapViolation(String),
}

pub type Result<T> = std::result::Result<T, QacError>;
