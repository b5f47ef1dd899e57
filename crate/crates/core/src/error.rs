use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("invalid network: {0}")]
    InvalidNetwork(String),

    #[error("duplicate angle {angle} at units {first} and {second}")]
    DuplicateAngle {
        first: usize,
        second: usize,
        angle: f64,
    },

    #[error("pagerank did not converge after {iterations} iterations (residual {residual:e})")]
    PageRankNotConverged { iterations: usize, residual: f64 },

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("feature term {term} cannot be evaluated: {reason}")]
    Feature { term: String, reason: String },

    #[error("stratified assignment requires stratum labels for every unit")]
    MissingStrata,

    #[error("treatment level {0} is outside the fitted treatment support")]
    UnsupportedLevel(f64),

    #[error("missing imputation for level {level} under assignment {assignment}")]
    MissingImputation { level: f64, assignment: String },

    #[error("empty subgroup: {0}")]
    EmptySubgroup(String),

    #[error("need at least {needed} draws, got {got}")]
    TooFewDraws { needed: usize, got: usize },

    #[error("truncation level {k} exceeds the configured cap {cap}")]
    TruncationCap { k: usize, cap: usize },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("replicate {replicate} of cell {cell} failed: {source}")]
    Replicate {
        cell: usize,
        replicate: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
