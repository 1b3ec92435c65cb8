use std::path::{Path, PathBuf};

/// Anything that can go wrong reading, writing or running the pipeline.
#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    /// Malformed content at a 1-based line.
    #[error("{}:{line}: {msg}", path.display())]
    Parse { path: PathBuf, line: usize, msg: String },
    /// Well-formed but not a variant we accept (compressed WAV, wrong hop,
    /// short-form TextGrid, unknown model version).
    #[error("{}: {msg}", path.display())]
    Format { path: PathBuf, msg: String },
    #[error("invalid configuration: {0}")]
    Config(String),
    /// Bad flag combination detected after argument parsing.
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] taanseg_core::Error),
}

pub type Result<T> = std::result::Result<T, IoError>;

/// CLI exit status classes.
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_INTERNAL: i32 = 3;

impl IoError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        IoError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn parse(path: &Path, line: usize, msg: impl Into<String>) -> Self {
        IoError::Parse {
            path: path.to_path_buf(),
            line,
            msg: msg.into(),
        }
    }

    pub fn format(path: &Path, msg: impl Into<String>) -> Self {
        IoError::Format {
            path: path.to_path_buf(),
            msg: msg.into(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            IoError::Usage(_) => EXIT_USAGE,
            IoError::Core(taanseg_core::Error::Internal(_)) => EXIT_INTERNAL,
            _ => EXIT_DATA,
        }
    }
}
