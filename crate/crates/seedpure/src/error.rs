use std::io;
use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Decoding failures of the binary containers and PPM images.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FormatError {
    #[error("bad magic: expected {expected:?}")]
    BadMagic { expected: &'static str },
    #[error("unsupported version {0} (expected 1)")]
    UnsupportedVersion(u32),
    #[error("file truncated")]
    Truncated,
    #[error("duplicate tensor name `{0}`")]
    DuplicateName(String),
    #[error("{0} trailing bytes after the last record")]
    TrailingBytes(usize),
    #[error("malformed content: {0}")]
    Malformed(String),
    #[error("unsupported image format (only binary PPM `P6` with maxval 255 is read)")]
    UnsupportedImageFormat,
    #[error("malformed PPM header: {0}")]
    MalformedHeader(String),
    #[error("truncated pixel data: expected {expected} bytes, found {actual}")]
    TruncatedPixelData { expected: usize, actual: usize },
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] seedpure_core::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}: {source}")]
    Format {
        path: PathBuf,
        #[source]
        source: FormatError,
    },
    #[error("{path}: invalid model file: {message}")]
    ModelFile { path: PathBuf, message: String },
    #[error("config error at `{key}`: {message}")]
    Config { key: String, message: String },
    #[error("directory {0} contains no images")]
    EmptyDirectory(PathBuf),
    #[error("all {0} grid cells failed")]
    AllCellsFailed(usize),
    #[error("report has no records")]
    EmptyReport,
    #[error("{0}")]
    Usage(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub fn format(path: impl Into<PathBuf>, source: FormatError) -> Self {
        Error::Format { path: path.into(), source }
    }

    pub fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config { key: key.into(), message: message.into() }
    }

    /// Process exit code: 2 for usage and configuration errors, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. } | Error::Usage(_) => 2,
            _ => 1,
        }
    }
}
