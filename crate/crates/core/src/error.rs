use alloc::string::String;

/// Errors raised across the crate.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("parameter outside the domain of {family}: {detail}")]
    ParamDomain { family: &'static str, detail: String },

    #[error("{family} takes {expected} parameters, got {got}")]
    ParamCount {
        family: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("family mismatch: expected {expected}, got {got}")]
    FamilyMismatch {
        expected: &'static str,
        got: &'static str,
    },

    #[error("data point {value} is outside the estimator's support")]
    DataDomain { value: f64 },

    #[error("need at least {needed} data points, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("dataset contains a non-finite value")]
    NonFiniteData,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("infeasible candidate: {0}")]
    Infeasible(String),

    #[error("invalid local-estimate map: {0}")]
    InvalidMap(String),

    #[error("grid too coarse: step {step} exceeds (hi - lo)/64 = {limit}")]
    Resolution { step: f64, limit: f64 },

    #[error("training diverged at step {step}: {detail}")]
    Divergence { step: usize, detail: String },

    #[error("collapse rate undefined: {0}")]
    UndefinedRate(String),

    #[error("unknown estimator `{0}`")]
    UnknownEstimator(String),
}

pub type Result<T> = core::result::Result<T, Error>;
