use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot access {}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Malformed or inconsistent input data, located by file and 1-based line.
    #[error("{}:{line}: {message}", file.display())]
    Parse {
        file: PathBuf,
        line: usize,
        message: String,
    },

    #[error("missing required file {}", .0.display())]
    MissingFile(PathBuf),

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("k must be at least 1")]
    ZeroK,

    #[error("summaries with different k cannot be combined ({0} vs {1})")]
    MixedK(usize, usize),

    #[error("cosine kernel does not take an offset (got c = {0})")]
    CosineWithOffset(f64),

    #[error("sketch parameters differ: {0}")]
    SketchMismatch(String),

    #[error("sketch width {0} is not a power of two")]
    NotPowerOfTwo(usize),

    #[error("explicit string length exceeds the cap of {cap} tokens")]
    LengthCapExceeded { cap: usize },

    #[error("feature maps were computed with different configurations")]
    MixedConfigs,

    #[error("stream error: {0}")]
    Stream(String),

    #[error("training data has a single class")]
    SingleClass,

    #[error("{graphs} graphs cannot be split into {folds} folds")]
    TooFewGraphs { graphs: usize, folds: usize },

    #[error("bad model file: {0}")]
    Model(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(file: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            file: file.into(),
            line,
            message: message.into(),
        }
    }

    /// True for errors caused by the input data rather than by the caller's
    /// configuration.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::Io { .. }
                | Error::Parse { .. }
                | Error::MissingFile(_)
                | Error::InvalidGraph(_)
                | Error::LengthCapExceeded { .. }
                | Error::Stream(_)
                | Error::SingleClass
                | Error::TooFewGraphs { .. }
                | Error::Model(_)
        )
    }
}
