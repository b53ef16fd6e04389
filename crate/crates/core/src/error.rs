use thiserror::Error;

/// Errors raised by the numerical routines.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the region where the operation is defined.
    #[error("{op}: domain error: {msg}")]
    Domain { op: &'static str, msg: String },

    /// A numerical procedure (quadrature, root finding, decomposition) failed.
    #[error("{op}: numeric failure: {msg}")]
    Numeric { op: &'static str, msg: String },

    /// The requested operation is not available for this model kind.
    #[error("{op}: unsupported: {msg}")]
    Unsupported { op: &'static str, msg: String },

    /// A calibration constant is missing or was written twice.
    #[error("calibration: {0}")]
    Calibration(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn domain(op: &'static str, msg: impl Into<String>) -> Self {
        Error::Domain { op, msg: msg.into() }
    }

    pub(crate) fn numeric(op: &'static str, msg: impl Into<String>) -> Self {
        Error::Numeric { op, msg: msg.into() }
    }

    pub(crate) fn unsupported(op: &'static str, msg: impl Into<String>) -> Self {
        Error::Unsupported { op, msg: msg.into() }
    }

    /// True for errors caused by bad arguments rather than failed numerics.
    pub fn is_domain(&self) -> bool {
        matches!(self, Error::Domain { .. })
    }
}
