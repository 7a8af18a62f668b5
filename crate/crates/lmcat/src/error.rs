//! Crate-wide error type.

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Incompatible tensor shapes for an operation; reports both shapes.
    #[error("dimension mismatch in {op}: {lhs:?} vs {rhs:?}")]
    DimMismatch {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },

    /// Shape does not match the number of elements provided.
    #[error("shape {shape:?} implies {expected} elements, got {got}")]
    ShapeData {
        shape: Vec<usize>,
        expected: usize,
        got: usize,
    },

    /// Invalid configuration value (channel counts, temperatures, variant names, ...).
    #[error("invalid configuration: {0}")]
    Config(String),

    /// An operation was called outside its contract (empty input, non-scalar backward, ...).
    #[error("contract violation: {0}")]
    Contract(String),

    /// Dataset-level problem (missing labels, class deficit, ...).
    #[error("data error: {0}")]
    Data(String),

    /// Malformed on-disk artifact; `pos` is a line or byte position.
    #[error("parse error in {path} at {pos}: {msg}")]
    Parse {
        path: String,
        pos: String,
        msg: String,
    },

    /// Class label outside `[0, classes)`.
    #[error("label {label} out of range for {classes} classes")]
    LabelRange { label: usize, classes: usize },

    /// A NaN or infinity appeared where finite values are required.
    #[error("non-finite value in {context}")]
    NonFinite { context: String },

    /// Training loss became non-finite.
    #[error("training diverged at epoch {epoch}, step {step}: {msg}")]
    Diverged {
        epoch: usize,
        step: usize,
        msg: String,
    },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code contract: 0 success, 1 internal error, 2 user/input error.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_)
            | Error::Data(_)
            | Error::Parse { .. }
            | Error::LabelRange { .. }
            | Error::Io { .. } => 2,
            _ => 1,
        }
    }
}
