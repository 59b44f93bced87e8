use thiserror::Error;

/// Errors raised by the algebraic kernel.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum AlgebraError {
    #[error("incompatible operands: {0}")]
    Incompatible(String),

    #[error("invalid multi-index: {0}")]
    InvalidIndex(String),

    #[error("supernumber is not invertible: body {body:e} is below tolerance")]
    NotInvertible { body: f64 },

    #[error("parity violation: {0}")]
    Parity(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("basis is not closed under the bracket: [E{m}, E{n}] leaves the span (residual {residual:e})")]
    NotASubalgebra { m: usize, n: usize, residual: f64 },

    #[error("basis is linearly dependent: body matrix has rank {rank} < {expected}")]
    LinearlyDependent { rank: usize, expected: usize },

    #[error("series did not converge within {terms} terms (last term norm {last_term_norm:e})")]
    Divergence { terms: usize, last_term_norm: f64 },

    #[error("out of domain: {0}")]
    OutOfDomain(String),

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("element is not in the group: {0}")]
    NotInGroup(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("parse error at offset {position}: {message}")]
    Parse { position: usize, message: String },

    #[error("refused: {0}")]
    Refused(String),
}

pub type Result<T> = std::result::Result<T, AlgebraError>;
