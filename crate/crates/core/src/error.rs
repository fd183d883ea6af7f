use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A configuration value is out of range or inconsistent. `key` names the offending entry.
    #[error("invalid configuration `{key}`: {reason}")]
    Config { key: String, reason: String },

    #[error("failed to parse configuration: {0}")]
    Parse(String),

    #[error("training error: {0}")]
    Training(String),

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("model format error: {0}")]
    Format(String),

    /// A metric came out non-finite; the run is aborted.
    #[error("run aborted: {0}")]
    Aborted(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn config(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            reason: reason.into(),
        }
    }
}
