//! Error type shared by every module of the crate.

use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    /// Caller supplied arguments that violate an operation's precondition.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A numeric quantity is undefined for the given data (constant series,
    /// zero-variance differences, degenerate covariance, ...).
    #[error("degenerate data: {0}")]
    Degenerate(String),

    /// Two datasets that must be aligned by prompt id are not.
    #[error("misaligned prompt ids: {0}")]
    Misaligned(String),

    /// Estimation and evaluation prompt sets overlap, or the estimation set
    /// does not match the digest recorded on the axis.
    #[error("estimation/evaluation leak: {0}")]
    Leak(String),

    /// A vocabulary or fixture file is empty or malformed.
    #[error("vocabulary: {0}")]
    Vocabulary(String),

    /// Unknown SULA condition or intervention mode.
    #[error("unknown {kind}: {value}")]
    Unknown { kind: &'static str, value: String },

    /// Shape disagreement between manifest and tensors, or between operands.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// Stored tensor failed its CRC-32 check.
    #[error("checksum mismatch in {file} at offset {offset}: stored {stored:#010x}, computed {computed:#010x}")]
    Checksum {
        file: String,
        offset: u64,
        stored: u32,
        computed: u32,
    },

    /// Bundle written by an unsupported format version.
    #[error("unsupported format version {found} (supported: {supported})")]
    Version { found: u32, supported: u32 },

    /// Bundle content violates a tensor invariant (strict reads only).
    #[error("bundle invariant violated: {0}")]
    Invariant(String),

    /// Malformed binary record (bad magic, truncated payload).
    #[error("malformed tensor record in {0}")]
    Format(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
