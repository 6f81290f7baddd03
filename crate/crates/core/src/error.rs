use thiserror::Error;

/// Errors raised anywhere in the CLAW pipeline.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ClawError {
    #[error("dataset is empty")]
    EmptyDataset,

    #[error("empty input")]
    EmptyInput,

    #[error("non-finite value in {field} at index {index}")]
    NonFiniteValue { field: &'static str, index: usize },

    #[error("covariate at index {index} does not match the kind or dimension of index 0")]
    MixedCovariateKinds { index: usize },

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid config field `{field}`: {reason}")]
    InvalidConfig { field: &'static str, reason: String },

    #[error("kernel scale must be positive, got {0}")]
    NonPositiveScale(f64),

    #[error("sample is degenerate (zero spread); supply a fixed bandwidth")]
    DegenerateSample,

    #[error("weight row {row} has zero total mass")]
    ZeroWeightRow { row: usize },

    #[error("invalid weight matrix: {0}")]
    InvalidWeights(String),

    #[error("need at least {needed} null samples, have {have}")]
    InsufficientNulls { needed: usize, have: usize },

    #[error("training split is empty")]
    EmptyTrainingHalf,

    #[error("training set is empty")]
    EmptyTraining,

    #[error("group {group} has no test units")]
    EmptyGroup { group: usize },

    #[error("calibration set is empty")]
    EmptyCalibration,

    #[error("e-value weight {index} is not positive")]
    NonPositiveWeight { index: usize },

    #[error("unknown setting {0}")]
    UnknownSetting(String),

    #[error("parameter {name} = {value} outside the supported range {range}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        range: &'static str,
    },

    #[error("index {index} out of range for length {len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("{0}")]
    MissingInput(String),

    #[error("replication {replication} (seed {seed}) failed: {source}")]
    Replication {
        replication: usize,
        seed: u64,
        #[source]
        source: Box<ClawError>,
    },
}

pub type Result<T> = std::result::Result<T, ClawError>;
