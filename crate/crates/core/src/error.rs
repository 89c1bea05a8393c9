use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("insufficient data: need at least {needed} observations, got {available}")]
    InsufficientData { needed: usize, available: usize },

    #[error("insufficient history: forecasting needs {needed} rows, got {available}")]
    InsufficientHistory { needed: usize, available: usize },

    #[error("singular design: condition diagnostic {condition:.3e} exceeds {threshold:.3e}")]
    SingularDesign { condition: f64, threshold: f64 },

    #[error("singular moment matrix {which}: condition diagnostic {condition:.3e}")]
    SingularMoments { which: &'static str, condition: f64 },

    #[error("invalid rank {rank} for dimension {dim}")]
    InvalidRank { rank: usize, dim: usize },

    #[error("insufficient range: {available} candidate origins, {needed} requested")]
    InsufficientRange { needed: usize, available: usize },

    #[error("degenerate variance: loss differential has zero variance")]
    DegenerateVariance,

    #[error("invalid spec: {0}")]
    InvalidSpec(String),

    #[error("parse error in {path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("no overlap: regions share no common time span")]
    NoOverlap,

    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    /// Stable kebab-case name, used as the CLI error tag.
    pub fn kind_name(&self) -> &'static str {
        match self {
            Error::InvalidInput(_) => "invalid-input",
            Error::InsufficientData { .. } => "insufficient-data",
            Error::InsufficientHistory { .. } => "insufficient-history",
            Error::SingularDesign { .. } => "singular-design",
            Error::SingularMoments { .. } => "singular-moments",
            Error::InvalidRank { .. } => "invalid-rank",
            Error::InsufficientRange { .. } => "insufficient-range",
            Error::DegenerateVariance => "degenerate-variance",
            Error::InvalidSpec(_) => "invalid-spec",
            Error::Parse { .. } => "parse",
            Error::Schema(_) => "schema",
            Error::NoOverlap => "no-overlap",
            Error::Io(_) => "io",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
