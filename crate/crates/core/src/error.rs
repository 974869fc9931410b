use thiserror::Error;

use crate::engine::SwarmState;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid specification: {0}")]
    InvalidSpec(String),

    #[error("graph is disconnected: agent {isolated} is unreachable from agent 0")]
    DisconnectedGraph { isolated: usize },

    #[error("no connected random graph after {retries} draws (n = {n_agents}, p = {p})")]
    ConnectivityRetriesExhausted { n_agents: usize, p: f64, retries: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid time index {0}: rounds start at t = 1")]
    InvalidTime(u64),

    #[error("tau_beta = {0} must lie strictly inside (0, 1/2)")]
    TauOutOfRange(f64),

    #[error("annealing gate violated: c_gamma^2 / c_alpha = {ratio} must exceed c_zero = {c_zero}")]
    GateViolation { ratio: f64, c_zero: f64 },

    #[error("schedule constant {name} = {value} must be strictly positive")]
    NonPositiveConstant { name: &'static str, value: f64 },

    #[error("non-finite state at round {round}, agent {agent}")]
    NonFiniteState {
        round: u64,
        agent: usize,
        last_recorded: Box<SwarmState>,
    },

    #[error("agent runtime timed out at round {round}: agent {agent} still waiting for neighbor messages")]
    Timeout { round: u64, agent: usize },

    #[error("agent runtime failure: {0}")]
    Runtime(String),

    #[error("trajectory has no recorded states")]
    EmptyTrajectory,

    #[error("Gibbs reference supports d <= 2, got d = {0}")]
    DimensionTooLarge(usize),

    #[error("grid box too small: boundary density ratio {ratio:e} exceeds {threshold:e}")]
    BoxTooSmall { ratio: f64, threshold: f64 },

    #[error("the set of global minima is empty or unknown")]
    EmptyMinimaSet,

    #[error("unknown test function `{0}`")]
    UnknownTestFunction(String),

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("validation failed [{gate}]: {message}")]
    Validation { gate: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
