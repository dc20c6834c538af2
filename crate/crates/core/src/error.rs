use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the dereverberation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("sample rate mismatch: {left} Hz vs {right} Hz")]
    SampleRateMismatch { left: f64, right: f64 },

    #[error("zero peak: cannot normalize an all-zero signal")]
    ZeroPeak,

    #[error("insufficient excitation: {0}")]
    InsufficientExcitation(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("empty spectrogram")]
    EmptySpectrogram,

    #[error("silent reference: reference signal has zero variance")]
    SilentReference,

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Wav {
        path: PathBuf,
        #[source]
        source: hound::Error,
    },

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    /// True for errors caused by the file system or malformed files.
    pub fn is_io(&self) -> bool {
        matches!(
            self,
            Error::Io { .. } | Error::Wav { .. } | Error::Format { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
