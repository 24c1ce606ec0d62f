use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum SlError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("parameters are not normalized: {0}")]
    NotNormalized(String),
    #[error("degenerate data: {0}")]
    Degenerate(String),
    #[error("empty level set: {0}")]
    EmptyLevelSet(String),
    #[error("solution escaped to infinity at t = {t}")]
    BlowUp { t: f64 },
    #[error("no convergence: {0}")]
    NoConvergence(String),
    #[error("format error: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl SlError {
    /// True for errors caused by bad input rather than numerical trouble.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            SlError::InvalidInput(_)
                | SlError::DimensionMismatch(_)
                | SlError::NotNormalized(_)
                | SlError::Degenerate(_)
                | SlError::EmptyLevelSet(_)
                | SlError::Format(_)
        )
    }
}

impl From<serde_json::Error> for SlError {
    fn from(e: serde_json::Error) -> Self {
        SlError::Format(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, SlError>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(SlError::InvalidInput(msg.into()))
}
