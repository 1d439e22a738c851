use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("case file is missing required field `{0}`")]
    MissingField(&'static str),
    #[error("{what} references unknown bus {bus}")]
    UnknownBus { what: String, bus: i64 },
    #[error("case contains no buses")]
    NoBuses,
    #[error("index {index} out of range (len {len})")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("branch {0} has zero series impedance")]
    ZeroImpedance(usize),
    #[error("network is not connected")]
    Disconnected,
    #[error("solution is not AR-feasible (max |l*v - F^2 - H^2| = {max_cone_residual:.3e})")]
    NotArFeasible { max_cone_residual: f64 },
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
