//! Error types shared across the crate.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, SennsError>;

/// Errors surfaced by dataset loading, network construction, and training.
#[derive(Debug, Error)]
pub enum SennsError {
    /// A vector had the wrong length for the operation.
    #[error("{context}: expected length {expected}, got {actual}")]
    DimensionMismatch {
        expected: usize,
        actual: usize,
        context: &'static str,
    },

    /// Layer sizes or transfer list do not describe a valid network.
    #[error("invalid architecture: {0}")]
    InvalidArchitecture(String),

    /// Hyperparameters violate their constraints (lambda sum, ranges).
    #[error("invalid hyperparameters: {0}")]
    InvalidHyperparams(String),

    /// The class structure makes the requested pair weighting undefined.
    #[error("degenerate class structure: {0}")]
    DegenerateClasses(String),

    /// A loader or constructor was handed zero examples.
    #[error("empty dataset")]
    EmptyDataset,

    /// A CSV row had a different number of columns than the first data row.
    #[error("csv line {line}: expected {expected} columns, got {actual}")]
    CsvRagged {
        line: usize,
        expected: usize,
        actual: usize,
    },

    /// A CSV feature cell did not parse as a number.
    #[error("csv line {line}, column {column}: non-numeric value {token:?}")]
    CsvValue {
        line: usize,
        column: usize,
        token: String,
    },

    /// The label column index is outside the row.
    #[error("csv line {line}: label column {column} out of range (row has {width} columns)")]
    CsvLabelColumn {
        line: usize,
        column: usize,
        width: usize,
    },

    /// An IDX file did not start with the expected magic number.
    #[error("idx magic mismatch: expected {expected:#010x}, found {found:#010x}")]
    IdxMagic { expected: u32, found: u32 },

    /// Image and label files disagree on the number of examples.
    #[error("idx count mismatch: {images} images vs {labels} labels")]
    IdxCountMismatch { images: usize, labels: usize },

    /// An IDX file ended before all declared bytes were read.
    #[error("idx file truncated while reading {0}")]
    IdxTruncated(String),

    /// A model stream did not start with the expected version line.
    #[error("model version mismatch: expected {expected:?}, found {found:?}")]
    ModelVersion { expected: String, found: String },

    /// A model stream ended before all declared parameters were read.
    #[error("model file truncated: missing {0}")]
    ModelTruncated(String),

    /// Model contents disagree with the declared layer sizes.
    #[error("model shape inconsistency: {0}")]
    ModelShape(String),

    /// A model parameter token did not parse as a finite number.
    #[error("model line {line}: cannot parse {token:?} as a number")]
    ModelParse { line: usize, token: String },

    /// The objective or gradient became non-finite during training.
    #[error("non-finite {what} at iteration {iteration}")]
    NonFinite { iteration: usize, what: &'static str },

    /// An evaluation metric needs at least two classes.
    #[error("metric requires at least two classes")]
    SingleClass,

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
