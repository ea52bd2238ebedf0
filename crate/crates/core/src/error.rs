use thiserror::Error;

/// Errors raised anywhere in the explanation pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("model load error: {0}")]
    Load(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("value {value} for attribute {index} lies outside the domain [{lb}, {ub}]")]
    OutOfDomain {
        index: usize,
        value: f64,
        lb: f64,
        ub: f64,
    },

    #[error("class index {index} out of range for {classes} classes")]
    ClassOutOfRange { index: usize, classes: usize },

    #[error("rival class must differ from the target class ({0})")]
    RivalIsTarget(usize),

    #[error("non-finite coefficient in {0}")]
    NonFinite(String),

    #[error("unknown variable id {0}")]
    UnknownVariable(usize),

    #[error("variable {0} is not binary")]
    NotBinary(usize),

    #[error("problem has {binaries} binary variables, oracle cap is {cap}")]
    TooManyBinaries { binaries: usize, cap: usize },

    #[error("instance prediction is tied between classes {0} and {1}")]
    TiedPrediction(usize, usize),

    #[error("invalid attribute order: {0}")]
    InvalidOrder(String),

    #[error("solver failure: {0}")]
    Solver(String),

    #[error("instance file error: {0}")]
    Instances(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
