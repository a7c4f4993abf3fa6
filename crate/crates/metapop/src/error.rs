use thiserror::Error;

/// Errors produced by model construction, linear algebra, and solvers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("non-normalizable distribution: {0}")]
    NonNormalizable(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("singular matrix ({which}): condition estimate {cond:.3e}")]
    SingularMatrix { which: String, cond: f64 },

    #[error(
        "block spectral radius hypothesis violated: \
         ||M2*M3 - M2*M4*M2^-1*M1|| = {residual_zero:.3e}, \
         ||M2*M4 - M4*M2|| = {residual_commute:.3e}, threshold {threshold:.3e}"
    )]
    HypothesisViolation {
        residual_zero: f64,
        residual_commute: f64,
        threshold: f64,
    },

    #[error("degenerate denominator: {expression} = {value:.6e}")]
    DegenerateDenominator { expression: String, value: f64 },

    #[error("non-finite value encountered in {0}")]
    NonFinite(String),

    #[error("step size underflow at t = {t} (h = {h:.3e})")]
    StepSizeUnderflow { t: f64, h: f64 },

    #[error("iteration did not converge after {iterations} iterations (residual {residual:.3e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("invalid parameters: {}", .0.join("; "))]
    InvalidParams(Vec<String>),
}

pub type Result<T> = std::result::Result<T, Error>;
