use std::path::PathBuf;

/// Errors raised by model evaluation, simulation, estimation and file I/O.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("state outside the model domain: {0}")]
    Domain(String),

    #[error("time {t} exceeds the exit time {exit_time}")]
    Horizon { t: f64, exit_time: f64 },

    #[error("quadrature did not converge: achieved error {achieved:e} (requested {requested:e})")]
    Numerical { achieved: f64, requested: f64 },

    #[error("invalid configuration: {0}")]
    Configuration(String),

    #[error("sampling failed: {0}")]
    Sampling(String),

    #[error("estimator undefined: {0}")]
    UndefinedEstimator(String),

    #[error("oracle undefined: {0}")]
    UndefinedOracle(String),

    #[error("{}:{line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("empty trajectory in {}: record 0 is required", .0.display())]
    EmptyTrajectory(PathBuf),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
