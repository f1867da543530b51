//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    CsvFile(#[from] csv::Error),

    #[error("row {row}: malformed record: {msg}")]
    MalformedRow { row: usize, msg: String },

    #[error("row {row}: rating {rating} outside [{min}, {max}]")]
    RatingOutOfRange {
        row: usize,
        rating: i32,
        min: i32,
        max: i32,
    },

    #[error("row {row}: duplicate id `{id}`")]
    DuplicateId { row: usize, id: String },

    #[error("row {row}: empty response text")]
    EmptyText { row: usize },

    #[error("empty corpus")]
    EmptyCorpus,

    #[error("rating class {class} has {count} member(s); stratified twofold splits need at least 2")]
    ClassTooSmall { class: i32, count: usize },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimMismatch { expected: usize, actual: usize },

    #[error("zero-norm embedding for `{text}`")]
    ZeroNorm { text: String },

    #[error("duplicate phrase `{0}`")]
    DuplicatePhrase(String),

    #[error("embedding failed for n-gram `{ngram}`: {source}")]
    EmbedFailed {
        ngram: String,
        #[source]
        source: Box<Error>,
    },

    #[error("feature index {index} out of range for {count} features")]
    FeatureIndexOutOfRange { index: usize, count: usize },

    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("rating vectors have different lengths: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("degenerate marginals: chance-expected disagreement is zero but raters disagree")]
    DegenerateMarginals,

    #[error("all per-iteration variance estimates are zero; t statistic undefined")]
    DegenerateVariance,

    #[error("sample too small: need at least {need} values, got {got}")]
    SampleTooSmall { need: usize, got: usize },

    #[error("pooled variance is zero; effect size undefined")]
    ZeroPooledVariance,

    #[error("degrees of freedom must be >= 1, got {0}")]
    InvalidDof(i64),

    #[error("non-finite {what} encountered at iteration {iteration}")]
    NonFinite { what: &'static str, iteration: usize },

    #[error("line search failed after {0} halvings")]
    LineSearchFailed(usize),

    #[error("training data contains a single class")]
    SingleClass,

    #[error("model file at `{path}` has kind `{found}`, expected `{expected}`")]
    ModelKindMismatch {
        path: String,
        found: String,
        expected: String,
    },

    #[error("{0}")]
    Data(String),
}

impl Error {
    /// Process exit code for CLI reporting: 2 usage, 3 data, 4 numerical.
    pub fn exit_code(&self) -> i32 {
        use Error::*;
        match self {
            InvalidConfig(_) | InvalidDof(_) => 2,
            NonFinite { .. } | LineSearchFailed(_) | DegenerateVariance
            | DegenerateMarginals | ZeroPooledVariance | ZeroNorm { .. } => 4,
            _ => 3,
        }
    }
}
