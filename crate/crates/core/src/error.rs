use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the simulation / restoration / assessment pipeline.
#[derive(Debug, Error)]
pub enum TsimError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("non-finite value at flat index {index}")]
    NonFinite { index: usize },

    #[error("spectrum is not Hermitian: max asymmetry {max_asymmetry:.3e} (relative to peak)")]
    NonHermitian { max_asymmetry: f64 },

    #[error("inverse transform left an imaginary residue of {residue:.3e} (relative to peak)")]
    ImaginaryResidue { residue: f64 },

    #[error("invalid configuration: field `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("under-sampled grid: {0}")]
    Undersampled(String),

    #[error("singular mixing matrix (condition number {condition:.3e})")]
    SingularMixing { condition: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("resolution criterion never satisfied; largest tested spoke spacing {largest_tested_nm:.1} nm")]
    CriterionNotMet { largest_tested_nm: f64 },

    #[error("malformed volume file: {0}")]
    Format(String),

    #[error("missing file {}", .0.display())]
    MissingFile(PathBuf),

    #[error("io error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl TsimError {
    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        TsimError::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        TsimError::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the command-line front end: 2 validation, 3 io, 4 numerical.
    pub fn exit_code(&self) -> i32 {
        match self {
            TsimError::Io { .. } => 3,
            TsimError::NonHermitian { .. }
            | TsimError::ImaginaryResidue { .. }
            | TsimError::Numerical(_)
            | TsimError::CriterionNotMet { .. } => 4,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, TsimError>;
