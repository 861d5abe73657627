use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("variable `{name}` is not binary")]
    UnsupportedVariableType { name: String },

    #[error("constraint `{name}` has no nonzero coefficients")]
    EmptyRow { name: String },

    #[error("parse error at line {line}, column {col}: {msg}")]
    Parse {
        line: usize,
        col: usize,
        msg: String,
    },

    #[error("graph needs at least two nodes, got {n}")]
    DegenerateGraph { n: usize },

    #[error("model file: {0}")]
    ModelFormat(String),

    #[error("corrupt model: {0}")]
    CorruptModel(String),

    #[error("model shape mismatch: {0}")]
    ModelShape(String),

    #[error("simplex numerical failure: {0}")]
    NumericalFailure(String),

    #[error("prediction vector has length {got}, instance has {expected} variables")]
    PredictionShape { expected: usize, got: usize },

    #[error("solution pool is empty")]
    EmptyPool,

    #[error("LP relaxation is infeasible")]
    InfeasibleRelaxation,

    #[error("epsilon-feasibility not reached after {iterations} iterations (max violation {max_violation:.3e})")]
    ToleranceNotMet {
        max_violation: f64,
        iterations: usize,
    },

    #[error("paired evaluation: {0}")]
    Pairing(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
