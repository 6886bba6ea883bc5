use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown nonlinearity family `{0}`")]
    UnknownFamily(String),

    #[error("invalid parameter for `{family}`: {reason}")]
    InvalidParameter { family: String, reason: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("classification inconclusive near {end}: {reason}")]
    Inconclusive { end: &'static str, reason: String },

    #[error("evaluation of f failed at s = {0}")]
    Evaluation(f64),

    #[error("shooting blew up at r = {r} (|v| = {value:e})")]
    BlowUp { r: f64, value: f64 },

    #[error("no lambda bracket found in [{lo:e}, {hi:e}] for amplitude {amplitude}")]
    NoBracket { amplitude: f64, lo: f64, hi: f64 },

    #[error("root finder did not converge after {0} iterations")]
    NoConvergence(usize),

    #[error("fixed-point iteration stalled after {iterations} iterations")]
    Stalled { iterations: usize, norms: Vec<f64> },

    #[error("fixed-point iteration diverged after {iterations} iterations")]
    Diverged { iterations: usize, norms: Vec<f64> },

    #[error("degenerate continuum: lambda(a) is constant at {lambda} along the branch")]
    Continuum { lambda: f64 },

    #[error("profile is not a converged solution: {0}")]
    NotConverged(String),

    #[error("nonlinearity `{0}` has no analytic derivative")]
    NonAnalytic(String),

    #[error("branch has too few points for extrapolation: {0}")]
    InsufficientTail(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
