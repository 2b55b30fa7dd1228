use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("invalid measure: {0}")]
    InvalidMeasure(String),
    #[error("range error: {0}")]
    Range(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("step-size error: {0}")]
    StepSize(String),
    #[error("degenerate domain: {0}")]
    Degenerate(String),
    #[error("measure recovery failed: {0}")]
    Recovery(String),
    #[error("evolution error: {0}")]
    Evolution(String),
    #[error("resolution error: {0}")]
    Resolution(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by user input rather than by numerics.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Config(_) | Error::InvalidMeasure(_) | Error::Json(_) | Error::Io(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
