use std::path::PathBuf;

/// Errors produced by the preprocessing library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed image header: {0}")]
    MalformedHeader(String),

    #[error("unsupported maxval {0}, only 255 is accepted")]
    UnsupportedMaxval(u32),

    #[error("truncated payload: expected {expected} bytes, found {found}")]
    TruncatedPayload { expected: usize, found: usize },

    #[error("colorspace mismatch: {0}")]
    ColorspaceMismatch(String),

    #[error("invalid dimensions: {0}")]
    Dimension(String),

    #[error("frame index {index} out of range (sequence has {count} frames)")]
    IndexOutOfRange { index: usize, count: usize },

    #[error("short read at frame {index}: expected {expected} bytes, got {found}")]
    ShortRead {
        index: usize,
        expected: usize,
        found: usize,
    },

    #[error("quality {0} outside 1..=100")]
    InvalidQuality(i64),

    #[error("invalid quantization matrix: {0}")]
    InvalidMatrix(String),

    #[error("matrix bank line {line}: {message}")]
    BankParse { line: usize, message: String },

    #[error("invalid area: object area {object} with frame area {frame}")]
    InvalidArea { frame: u64, object: u64 },

    #[error("manifest error: {0}")]
    Manifest(String),

    #[error("patch does not fit frame: {0}")]
    PatchMismatch(String),

    #[error("plane too small for metric: {0}")]
    TooSmall(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("frame {index}: {source}")]
    Frame {
        index: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn at_frame(self, index: usize) -> Self {
        match self {
            e @ Error::Frame { .. } => e,
            e => Error::Frame {
                index,
                source: Box::new(e),
            },
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
