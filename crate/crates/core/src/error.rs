use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid element {element}: {reason}")]
    InvalidElement { element: usize, reason: String },

    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("factorization failed: {0}")]
    Factorization(String),

    #[error("eigensolver did not converge after {iterations} iterations (max relative residual {residual:.3e})")]
    EigenSolver { iterations: usize, residual: f64 },

    #[error("residual check failed in {context}: relative residual {residual:.3e} exceeds {tolerance:.1e}")]
    ResidualCheck {
        context: &'static str,
        residual: f64,
        tolerance: f64,
    },

    #[error("invalid interface: {0}")]
    InvalidInterface(String),

    #[error("invalid integrator configuration: {0}")]
    InvalidConfig(String),

    #[error("Newton iteration diverged at step {step} (t = {time:.6e} s); residual history {residuals:?}")]
    NewtonDivergence {
        step: usize,
        time: f64,
        residuals: Vec<f64>,
    },

    #[error("oracle limit exceeded: {0}")]
    OracleLimit(String),

    #[error("malformed data: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
