use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised by the numerical modules.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    /// Evaluation outside the region where a constitutive law is defined
    /// (non-positive determinant, far from SO(3), ...).
    #[error("domain error: {0}")]
    Domain(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("degenerate quadratic form: {0}")]
    DegenerateForm(String),

    #[error("metric tensor is not positive definite: {0}")]
    MetricDegenerate(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("projection onto SO(3) failed: {0}")]
    Projection(String),

    /// Inner minimization did not reach tolerance. Carries the best iterate
    /// (free coordinates) so callers can inspect where it stalled.
    #[error("newton solver did not converge after {iterations} iterations (residual {residual:.3e})")]
    NonConvergence {
        iterations: usize,
        residual: f64,
        best: Vec<f64>,
    },

    #[error("time step {step} failed: {source}")]
    Step {
        step: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// True for errors caused by bad input rather than by the numerics.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_))
    }
}
