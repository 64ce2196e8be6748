use std::path::PathBuf;

/// Errors raised anywhere in the crate.
///
/// The CLI maps these onto process exit codes through [`Error::exit_code`].
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("backward requires a scalar root, got shape {0:?}")]
    NonScalarRoot(Vec<usize>),
    #[error("non-finite value encountered: {0}")]
    NonFinite(String),
    #[error("training diverged at epoch {epoch}: {detail}")]
    Diverged { epoch: usize, detail: String },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("bad magic in {what}: expected {expected:?}")]
    BadMagic { what: &'static str, expected: [u8; 4] },
    #[error("unsupported {what} version {version}")]
    UnknownVersion { what: &'static str, version: u32 },
    #[error("{what} is truncated")]
    Truncated { what: &'static str },
    #[error("checksum mismatch in {what}: stored {stored:08x}, computed {computed:08x}")]
    Checksum {
        what: &'static str,
        stored: u32,
        computed: u32,
    },
    #[error("model kind mismatch: {0}")]
    KindMismatch(String),
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("classifier unusable: validation accuracy {accuracy:.4} does not exceed majority rate {majority:.4}")]
    UnusableClassifier { accuracy: f64, majority: f64 },
    #[error("file not found: {0}")]
    MissingFile(PathBuf),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code: 2 config, 3 data, 4 numerical failure, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::MissingFile(_) => 2,
            Error::Data(_)
            | Error::BadMagic { .. }
            | Error::UnknownVersion { .. }
            | Error::Truncated { .. }
            | Error::Checksum { .. }
            | Error::Protocol(_)
            | Error::KindMismatch(_) => 3,
            Error::NonFinite(_) | Error::Diverged { .. } | Error::UnusableClassifier { .. } => 4,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
