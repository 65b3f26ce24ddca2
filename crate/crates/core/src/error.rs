use thiserror::Error;

/// Errors raised anywhere in the simulator, trainer or experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("input {0} is outside the encoding domain [-1, 1]")]
    Domain(f64),

    #[error("index {index} out of range for length {len}")]
    Index { index: usize, len: usize },

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("problem too large: {0}")]
    Scale(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Short machine-readable tag used in CLI error reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Config(_) => "config",
            Error::Dimension { .. } => "dimension",
            Error::Domain(_) => "domain",
            Error::Index { .. } => "index",
            Error::Numerical(_) => "numerical",
            Error::Scale(_) => "scale",
            Error::Format(_) => "format",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
            Error::Csv(_) => "csv",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn ensure_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::Dimension { expected, found })
    }
}
