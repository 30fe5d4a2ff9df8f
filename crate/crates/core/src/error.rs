use alloc::string::String;

/// Errors raised anywhere in the core pipeline.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("malformed corpus: {0}")]
    MalformedCorpus(String),
    #[error("cannot balance corpus: class {0} is empty")]
    BalanceImpossible(&'static str),
    #[error("stratification error: {0}")]
    Stratification(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("empty dictionary: training streams contain no tokens")]
    EmptyDictionary,
    #[error("degenerate training data: {0}")]
    DegenerateTraining(String),
    #[error("incompatible features: model trained on {expected}, got {found}")]
    IncompatibleFeatures { expected: String, found: String },
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
    #[error("exact Shapley enumeration infeasible for {0} features (max 12); use sampling")]
    ShapleyInfeasible(usize),
    #[error("undefined input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = core::result::Result<T, Error>;
