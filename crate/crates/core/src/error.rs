use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("time {t} outside grid range [{start}, {end}]")]
    OutOfRange { t: f64, start: f64, end: f64 },

    #[error("inverse kinematics failed for leg {leg} at node {node}: {reason}")]
    InverseKinematics {
        leg: &'static str,
        node: usize,
        reason: String,
    },

    #[error("rollout diverged at step {step} (t = {t})")]
    Divergence { step: usize, t: f64 },

    #[error("solver did not converge: {0}")]
    NotConverged(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
