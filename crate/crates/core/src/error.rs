use std::path::PathBuf;

/// Errors produced by the simulation toolkit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid constellation order {0}: must be a power of two and at least 2")]
    InvalidOrder(usize),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("unsupported code variant: {0}")]
    UnsupportedVariant(String),
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("search space too large: {candidates} candidates exceeds budget {budget}")]
    SearchTooLarge { candidates: u128, budget: u128 },
    #[error("invalid configuration: {}", .0.join("; "))]
    Config(Vec<String>),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Format(String),
}

impl Error {
    /// Short machine-readable category, used for CLI exit reporting.
    pub fn category(&self) -> &'static str {
        match self {
            Error::InvalidOrder(_) | Error::Parameter(_) | Error::Config(_) => "config",
            Error::Shape(_) => "shape",
            Error::UnsupportedVariant(_) => "unsupported",
            Error::SearchTooLarge { .. } => "budget",
            Error::Io { .. } => "io",
            Error::Format(_) => "format",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
