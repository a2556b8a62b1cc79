use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("signal too short: {0}")]
    TooShort(String),

    #[error("unsupported audio encoding: {0}")]
    UnsupportedAudio(String),

    #[error("empty audio: {}", .0.display())]
    EmptyAudio(PathBuf),

    #[error("wav error in {}: {source}", path.display())]
    Wav {
        path: PathBuf,
        #[source]
        source: hound::Error,
    },

    #[error("io error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("bad magic")]
    BadMagic,

    #[error("unsupported format version {0}")]
    Version(u8),

    #[error("truncated payload: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },

    #[error("malformed representation file: {0}")]
    Malformed(String),

    #[error("manifest error: {0}")]
    Manifest(String),

    #[error("all positions masked in attention row {0}")]
    FullyMasked(usize),

    #[error("label sequence unreachable: {0}")]
    Unreachable(String),

    #[error("enumeration bound exceeded: {0} paths")]
    EnumerationBound(u128),

    #[error("invalid distribution: {0}")]
    Distribution(String),

    #[error("invalid warp path: {0}")]
    InvalidPath(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
