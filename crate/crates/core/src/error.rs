use thiserror::Error;

/// Errors surfaced by the library. Data-level problems (bad rows, bad
/// configs, mismatched artifacts) are distinguished from I/O so callers can
/// map them to stable exit codes.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid schema: {0}")]
    Schema(String),

    #[error("invalid dataset: {0}")]
    InvalidData(String),

    #[error("arm {arm} has no observations")]
    EmptyArm { arm: usize },

    #[error("arm {arm} has {rows} rows, fewer than the {folds} folds requested")]
    TooFewRows { arm: usize, rows: usize, folds: usize },

    #[error("invalid config field `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error("assignment weights require non-negative outcomes (row {row} has y = {value})")]
    NegativeOutcome { row: usize, value: f64 },

    #[error("feature vector does not conform to schema: {0}")]
    FeatureMismatch(String),

    #[error("model task mismatch: expected {expected}, found {found}")]
    TaskMismatch { expected: String, found: String },

    #[error("missing effect model for arm {0}")]
    MissingArmModel(usize),

    #[error("truth does not align with dataset: {0}")]
    Misaligned(String),

    #[error("schema hash mismatch: {left} vs {right}")]
    SchemaHashMismatch { left: String, right: String },

    #[error("undefined lift: control policy value is zero")]
    UndefinedLift,

    #[error("requested size {requested} exceeds the {available} available rows")]
    SizeTooLarge { requested: usize, available: usize },

    #[error("unknown scenario preset `{0}`")]
    UnknownPreset(String),

    #[error("malformed file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
