use thiserror::Error;

/// Errors raised by operator construction, spectral solves and bound evaluation.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("operator is not self-adjoint: residual {residual:.3e} exceeds {tolerance:.3e}")]
    NotSelfAdjoint { residual: f64, tolerance: f64 },

    #[error("eigensolver failed on a {dimension}x{dimension} matrix: {detail}")]
    EigenSolver { dimension: usize, detail: String },

    #[error("domain too small: {0}")]
    DomainTooSmall(String),

    #[error("negative time {0} is not allowed for decaying evolution")]
    NegativeTime(f64),

    #[error("detailed balance violated: residual {residual:.3e} at pair ({i}, {j})")]
    DetailedBalance { residual: f64, i: usize, j: usize },

    #[error("invalid bound input: {0}")]
    BoundInput(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("invalid scenario:\n  {}", .0.join("\n  "))]
    Config(Vec<String>),

    #[error("i/o: {0}")]
    Io(String),

    #[error("scenario `{id}`: {source}")]
    Scenario {
        id: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// The underlying error with scenario context stripped.
    pub fn root(&self) -> &Error {
        match self {
            Error::Scenario { source, .. } => source.root(),
            other => other,
        }
    }

    /// Whether the failure comes from user input rather than numerics.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self.root(),
            Error::DimensionMismatch { .. }
                | Error::InvalidParameter { .. }
                | Error::DomainTooSmall(_)
                | Error::DetailedBalance { .. }
                | Error::Config(_)
                | Error::Io(_)
                | Error::NegativeTime(_)
        )
    }

    pub(crate) fn param(name: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name: name.into(),
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
