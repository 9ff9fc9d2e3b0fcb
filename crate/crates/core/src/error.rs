use thiserror::Error;

/// Errors raised by the numerical routines and the experiment plumbing.
#[derive(Debug, Error)]
pub enum EosError {
    #[error("quadrature failure: estimated error {estimate:.3e} exceeds {limit:.1e}")]
    QuadratureFailure { estimate: f64, limit: f64 },

    #[error("singular scenario detected: smallest eigenvalue of J(w0) is {min_eigenvalue:.3e}")]
    SingularDetected { min_eigenvalue: f64 },

    #[error("singular J: matrix is not invertible")]
    SingularJ,

    #[error("singular J_n: empirical Hessian at w_mle is not invertible")]
    SingularJn,

    #[error("Newton iteration did not converge after {iterations} iterations (|grad| = {grad_norm:.3e})")]
    NoConvergence { iterations: usize, grad_norm: f64 },

    #[error("multiple minima: starts converged to points {distance:.3e} apart")]
    MultipleMinima { distance: f64 },

    #[error("metropolis backend unconverged: R-hat {r_hat:.4} > 1.05")]
    BackendUnconverged { r_hat: f64 },

    #[error("need at least {needed} distinct sample sizes, got {got}")]
    InsufficientPoints { needed: usize, got: usize },

    #[error("unknown scenario id `{0}`")]
    UnknownScenario(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("too many failed replications: {failed} of {total}")]
    TooManyFailures { failed: usize, total: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl EosError {
    /// Short machine-readable tag, used to flag failed rows in the CSV output.
    pub fn tag(&self) -> &'static str {
        match self {
            EosError::QuadratureFailure { .. } => "quadrature_failure",
            EosError::SingularDetected { .. } => "singular_detected",
            EosError::SingularJ => "singular_J",
            EosError::SingularJn => "singular_Jn",
            EosError::NoConvergence { .. } => "no_convergence",
            EosError::MultipleMinima { .. } => "multiple_minima",
            EosError::BackendUnconverged { .. } => "backend_unconverged",
            EosError::InsufficientPoints { .. } => "insufficient_points",
            EosError::UnknownScenario(_) => "unknown_scenario",
            EosError::Parse { .. } => "parse_error",
            EosError::Validation(_) => "validation_error",
            EosError::TooManyFailures { .. } => "too_many_failures",
            EosError::InvalidInput(_) => "invalid_input",
            EosError::Io(_) => "io_error",
            EosError::Json(_) | EosError::Csv(_) => "io_error",
        }
    }
}

pub type Result<T> = std::result::Result<T, EosError>;
