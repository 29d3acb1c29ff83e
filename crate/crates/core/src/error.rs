use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Csv { path: PathBuf, message: String },

    #[error("{path}: missing value at row {row}, column '{column}'")]
    MissingValue { path: PathBuf, row: usize, column: String },

    #[error("{path}: row {row} has {found} cells, expected {expected}")]
    Ragged {
        path: PathBuf,
        row: usize,
        found: usize,
        expected: usize,
    },

    #[error("label column {0} not found")]
    LabelColumn(String),

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("expected {expected} features, got {found}")]
    Arity { expected: usize, found: usize },

    #[error("length mismatch: {0}")]
    LengthMismatch(String),

    #[error("class weights are all zero")]
    ZeroWeight,

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("degenerate input: {0}")]
    Degenerate(String),
}

pub type Result<T> = std::result::Result<T, Error>;
