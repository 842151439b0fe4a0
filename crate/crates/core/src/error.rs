use std::path::PathBuf;

/// Errors produced by the engine, the trainer, the runtime and the file formats.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("shape mismatch in {context}: expected {expected}, got {actual:?}")]
    Shape {
        context: String,
        expected: String,
        actual: Vec<usize>,
    },

    #[error("backward called before forward")]
    BackwardBeforeForward,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("layer {layer} ({name}) is quantizable but has no quantization spec")]
    MissingSpec { layer: usize, name: String },

    #[error("non-finite gradient in layer {layer} ({name}) at batch {batch}")]
    NonFiniteGradient {
        layer: usize,
        name: String,
        batch: usize,
    },

    #[error("code {code} out of range for {bits}-bit symmetric field")]
    CodeOutOfRange { code: i32, bits: u8 },

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn shape(context: impl Into<String>, expected: impl Into<String>, actual: &[usize]) -> Self {
        Error::Shape {
            context: context.into(),
            expected: expected.into(),
            actual: actual.to_vec(),
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
