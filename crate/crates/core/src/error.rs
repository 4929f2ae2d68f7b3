use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("malformed image: {0}")]
    MalformedImage(String),

    #[error("unsupported image: {0}")]
    UnsupportedImage(String),

    #[error("invalid image dimensions {width}x{height} for {len} pixels")]
    Dimensions { width: usize, height: usize, len: usize },

    #[error("block size {block_size} outside [4, {max}]")]
    BlockSize { block_size: usize, max: usize },

    #[error("no foreground blocks")]
    NoForeground,

    #[error("{0}")]
    InsufficientData(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("degenerate range: {0}")]
    Degenerate(String),

    #[error("training diverged: {0}")]
    Diverged(String),

    #[error("model format: {0}")]
    ModelFormat(String),

    #[error("manifest: {0}")]
    Manifest(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
