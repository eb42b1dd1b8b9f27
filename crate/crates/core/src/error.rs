use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("column '{0}' required by the schema is missing from the file")]
    MissingColumn(String),

    #[error("row {row}, column '{column}': cannot parse '{value}' as a number")]
    BadNumeric {
        row: usize,
        column: String,
        value: String,
    },

    #[error("row {row}, column '{column}': unknown category '{value}'")]
    UnknownCategory {
        row: usize,
        column: String,
        value: String,
    },

    #[error("row {row}: unknown label string '{value}'")]
    UnknownLabel { row: usize, value: String },

    #[error("row {row}, column '{column}': non-finite numeric value")]
    NonFinite { row: usize, column: String },

    #[error("training dataset must contain both classes")]
    MissingClass,

    #[error("dataset has no negative instances")]
    NoNegativeInstances,

    #[error("train fraction {0} outside the open interval (0, 1)")]
    BadFraction(f64),

    #[error("invalid parameter: {0}")]
    BadParam(String),

    #[error("matrix is not symmetric within tolerance (max asymmetry {0:e})")]
    Asymmetric(f64),

    #[error("cluster count {s} out of range for a pool of {m} trees")]
    BadClusterCount { s: usize, m: usize },

    #[error("serialization error: {0}")]
    Serialization(String),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
