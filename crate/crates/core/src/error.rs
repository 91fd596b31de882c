use num_complex::Complex64;
use thiserror::Error;

use crate::report::ConvergenceReport;

/// Every fallible operation in the crate reports one of these.
#[derive(Debug, Error)]
pub enum Error {
    #[error("singular matrix: pivot {magnitude:e} at column {column} (row {row}) below drop tolerance")]
    SingularMatrix { column: usize, row: usize, magnitude: f64 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("eigenvalue iteration did not converge within {sweeps} sweeps")]
    NoConvergence { sweeps: usize },
    #[error("matrix of order {n} exceeds the dense limit {limit}")]
    TooLarge { n: usize, limit: usize },
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),
    #[error("invalid pencil: {0}")]
    InvalidPencil(String),
    #[error("degenerate subspace: {0}")]
    DegenerateSubspace(String),
    #[error("pencil not solvable: static block condition estimate {condition:e}")]
    NotSolvable { condition: f64 },
    #[error("shifted operator singular at shift {shift}")]
    ShiftSingular { shift: Complex64 },
    #[error("no convergence after {} iterations", .report.iterates.len())]
    MaxIterations { report: Box<ConvergenceReport> },
    #[error("iteration diverged after {} iterations", .report.iterates.len())]
    Diverged { report: Box<ConvergenceReport> },
    #[error("iterate matrix rank deficient: condition estimate {condition:e}")]
    IterateSingular { condition: f64 },
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("no regularizing pair found after {attempts} attempts")]
    RegularizationFailed { attempts: usize },
    #[error("capacitance matrix singular")]
    SingularCapacitance,
    #[error("interconnection matrix singular at shift {shift}")]
    InterconnectionSingular { shift: Complex64 },
    #[error("generation failed: {0}")]
    GenerationFailed(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short machine-readable tag.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::SingularMatrix { .. } => "singular_matrix",
            Error::DimensionMismatch(_) => "dimension_mismatch",
            Error::NoConvergence { .. } => "no_convergence",
            Error::TooLarge { .. } => "too_large",
            Error::Parse { .. } => "parse_error",
            Error::UnsupportedFormat(_) => "unsupported_format",
            Error::InvalidPencil(_) => "invalid_pencil",
            Error::DegenerateSubspace(_) => "degenerate_subspace",
            Error::NotSolvable { .. } => "not_solvable",
            Error::ShiftSingular { .. } => "shift_singular",
            Error::MaxIterations { .. } => "max_iterations",
            Error::Diverged { .. } => "diverged",
            Error::IterateSingular { .. } => "iterate_singular",
            Error::InsufficientData(_) => "insufficient_data",
            Error::RegularizationFailed { .. } => "regularization_failed",
            Error::SingularCapacitance => "singular_capacitance",
            Error::InterconnectionSingular { .. } => "interconnection_singular",
            Error::GenerationFailed(_) => "generation_failed",
            Error::InvalidConfig(_) => "invalid_config",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }

    /// True for failures caused by bad inputs rather than by the numerics.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::DimensionMismatch(_)
                | Error::Parse { .. }
                | Error::UnsupportedFormat(_)
                | Error::InvalidPencil(_)
                | Error::InvalidConfig(_)
                | Error::TooLarge { .. }
                | Error::Io(_)
                | Error::Json(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn mismatch(msg: impl Into<String>) -> Error {
    Error::DimensionMismatch(msg.into())
}
