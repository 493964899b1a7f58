use thiserror::Error;

/// Errors raised by ingestion, validation and the numerical routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("line {line}: malformed row: {message}")]
    MalformedRow { line: u64, message: String },

    #[error("line {line}: missing or unexpected header: {message}")]
    BadHeader { line: u64, message: String },

    #[error("line {line}: risk out of range for '{name}': {value} (must lie in (0, 1])")]
    RiskOutOfRange { line: u64, name: String, value: f64 },

    #[error("line {line}: {field} must be positive for '{name}', got {value}")]
    NonPositive {
        line: u64,
        name: String,
        field: &'static str,
        value: f64,
    },

    #[error("duplicate name '{0}'")]
    DuplicateName(String),

    #[error("empty dataset")]
    EmptyDataset,

    #[error("unknown name '{0}'")]
    UnknownName(String),

    #[error("name '{0}' is referenced more than once in the grouping spec")]
    ReferencedTwice(String),

    #[error("constant input: {0}")]
    ConstantInput(&'static str),

    #[error("need at least {needed} observations, got {got}")]
    TooFewObservations { needed: usize, got: usize },

    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("weights must be positive and finite (index {index}: {value})")]
    NonPositiveWeight { index: usize, value: f64 },

    #[error("exact permutation enumeration is limited to n <= {max}, got n = {n}")]
    PermutationTooLarge { n: usize, max: usize },

    #[error("{0}")]
    Domain(String),

    #[error("no turnover estimate for '{0}'")]
    MissingTurnover(String),

    #[error("no stem-cell count for '{0}'")]
    MissingStemCells(String),

    #[error("invalid grouping spec: {0}")]
    GroupingSpec(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
