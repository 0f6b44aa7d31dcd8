use std::path::PathBuf;

use thiserror::Error;

/// Errors raised across the pipeline. Variants map onto the CLI exit codes
/// (config 2, data 3, numeric/training 4).
#[derive(Debug, Error)]
pub enum HgrError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("non-finite value encountered: {0}")]
    Numeric(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("batch error: {0}")]
    Batch(String),
    #[error("label {label} out of range for {classes} classes")]
    Label { label: usize, classes: usize },
    #[error("data error: {0}")]
    Data(String),
    #[error("NPY format error in field `{field}`: {detail}")]
    Format { field: &'static str, detail: String },
    #[error("unsupported model format version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },
    #[error("corrupt model file: {0}")]
    Corrupt(String),
    #[error("training diverged at epoch {epoch}: {detail}")]
    Training { epoch: usize, detail: String },
    #[error("invalid input: {0}")]
    Input(String),
    #[error("stage `{stage}` is missing upstream artifact: {detail}")]
    Dependency { stage: String, detail: String },
    #[error("I/O error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl HgrError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        HgrError::Io { path: path.into(), source }
    }

    pub fn format(field: &'static str, detail: impl Into<String>) -> Self {
        HgrError::Format { field, detail: detail.into() }
    }

    /// Process exit code for this error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            HgrError::Config(_) | HgrError::Input(_) | HgrError::Dependency { .. } => 2,
            HgrError::Numeric(_) | HgrError::Training { .. } => 4,
            _ => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, HgrError>;
