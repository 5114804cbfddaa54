use thiserror::Error;

/// Errors produced by the simulation and analysis routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParams { field: &'static str, reason: String },

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("ordering violation: atoms {first} and {second} coincide")]
    Degenerate { first: usize, second: usize },

    #[error("ordering violation: atoms {first} and {second} are {gap:.3e} apart at t = {time} after step halving")]
    OrderingViolation {
        first: usize,
        second: usize,
        gap: f64,
        time: f64,
    },

    #[error("ill-conditioned coupling matrix (condition estimate {condition:.3e})")]
    IllConditioned { condition: f64 },

    #[error("integration diverged at t = {time}")]
    Divergence { time: f64 },

    #[error(
        "no steady state after t = {time} (max internal |p| = {max_momentum:.3e}, max internal |F| = {max_force:.3e})"
    )]
    Timeout {
        time: f64,
        max_momentum: f64,
        max_force: f64,
    },

    #[error("relaxation failed at pump detuning {detuning}: {source}")]
    Sweep {
        detuning: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("eigenvalue solver failed: {0}")]
    Eigen(String),

    #[error("parameter outside model domain: {0}")]
    Domain(String),

    #[error("malformed input: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of the relaxation to reach steady state, including
    /// failures wrapped by a sweep.
    pub fn is_convergence(&self) -> bool {
        match self {
            Error::Timeout { .. } => true,
            Error::Sweep { source, .. } => source.is_convergence(),
            _ => false,
        }
    }

    /// True for numerical breakdowns (divergence, singular systems, eigen failures).
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::IllConditioned { .. }
            | Error::Divergence { .. }
            | Error::OrderingViolation { .. }
            | Error::Eigen(_) => true,
            Error::Sweep { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
