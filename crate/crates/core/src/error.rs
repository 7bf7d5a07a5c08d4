//! Crate-wide error type.
//!
//! Every fallible operation returns [`Error`]; the CLI maps any of these to
//! exit code 1 with the message on stderr (flag misuse is handled by clap at
//! exit code 2 before we get here).

use std::path::PathBuf;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    // ---- formula ----
    #[error("formula needs exactly one '~' separating responses from predictors, found {count}")]
    MissingTilde { count: usize },
    #[error("formula has an empty {side} side")]
    EmptySide { side: &'static str },
    #[error("duplicate name '{name}' on the {side} side of the formula (byte offset {offset})")]
    DuplicateName {
        name: String,
        side: &'static str,
        offset: usize,
    },
    #[error("invalid token '{token}' in formula at byte offset {offset}; names match [A-Za-z_][A-Za-z0-9_.]* and only '+' and '~' are supported")]
    InvalidIdentifier { token: String, offset: usize },
    #[error("formula references column '{name}' not present in the data{}", suggestion.as_ref().map(|s| format!("; closest match is '{s}'")).unwrap_or_default())]
    UnknownColumn {
        name: String,
        suggestion: Option<String>,
    },

    // ---- ingest ----
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv file {path} is empty (no header row)")]
    EmptyFile { path: PathBuf },
    #[error("row {row} of {path} has {found} fields, header has {expected}")]
    RaggedRow {
        path: PathBuf,
        row: u64,
        found: usize,
        expected: usize,
    },
    #[error("missing value in column '{column}', row {row}")]
    MissingValue { column: String, row: usize },
    #[error("column '{column}' bound as a response must be numeric, found categorical")]
    CategoricalResponse { column: String },
    #[error("link '{link}' needs nonnegative integer counts; column '{column}', row {row} holds {value}")]
    NonIntegerCount {
        link: &'static str,
        column: String,
        row: usize,
        value: f64,
    },
    #[error("probit link needs 0/1 responses; column '{column}', row {row} holds {value}")]
    NonBinaryResponse {
        column: String,
        row: usize,
        value: f64,
    },
    #[error("predictor column '{column}' has zero variance and cannot be standardized")]
    ZeroVariancePredictor { column: String },
    #[error("row {row} has zero total count across the response columns; logit link needs at least one positive count per row")]
    ZeroRowTotal { row: usize },
    #[error("bad csv header in {path}: {detail}")]
    BadHeader { path: PathBuf, detail: String },

    // ---- model / samplers ----
    #[error("dimension mismatch: {what}")]
    DimensionMismatch { what: String },
    #[error("logit link needs at least two response columns (the last is the reference)")]
    LogitNeedsTwoResponses,
    #[error("numerical breakdown: {what}")]
    NumericalBreakdown { what: String },
    #[error("domain error in {what}: {detail}")]
    DomainError { what: &'static str, detail: String },

    // ---- inference ----
    #[error("too few rows: need at least 2, found {n}")]
    TooFewRows { n: usize },
    #[error("insufficient draws: floor(n_iter/thin_by) = {draws}, need at least 10")]
    InsufficientDraws { draws: usize },
    #[error("ci level must lie strictly inside (0, 1), got {level}")]
    BadCiLevel { level: f64 },
    #[error("chain file {path} is corrupt: {detail}")]
    ChainFileCorrupt { path: PathBuf, detail: String },
    #[error("fit directory {path} is incomplete: missing {missing}")]
    FitDirIncomplete { path: PathBuf, missing: String },
    #[error("output directory {path} exists and does not look like a previous run; refusing to overwrite")]
    OutDirOccupied { path: PathBuf },

    #[error("{0}")]
    Other(String),
}

impl Error {
    /// Wrap an I/O error with the path it concerns.
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn dims(what: impl Into<String>) -> Self {
        Error::DimensionMismatch { what: what.into() }
    }

    pub(crate) fn breakdown(what: impl Into<String>) -> Self {
        Error::NumericalBreakdown { what: what.into() }
    }
}
