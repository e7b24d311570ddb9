use thiserror::Error;

/// Errors produced by the solver and simulator.
#[derive(Debug, Clone, Error)]
pub enum AoiError {
    /// The cutoff leaves (numerically) no probability mass below it, so the
    /// cutoff policy preempts every upload and the truncated law is undefined.
    #[error("truncation mass P(X <= gamma) = {p:e} is below {p_min:e} for gamma = {gamma}")]
    TruncationMassZero { gamma: f64, p: f64, p_min: f64 },

    /// Adaptive quadrature could not meet its tolerance.
    #[error("quadrature failed over [{a}, {b}]: {reason}")]
    QuadratureFailure { a: f64, b: f64, reason: String },

    /// The Dinkelbach auxiliary function did not change sign over the
    /// bisection bracket. Unreachable for consistent epoch moments.
    #[error("no sign change of g over bracket ({lo}, {hi}]: g(lo) = {g_lo:e}, g(hi) = {g_hi:e}")]
    BisectionBracketFailure { lo: f64, hi: f64, g_lo: f64, g_hi: f64 },

    /// An argument fell outside its mathematical domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// Invalid run configuration (distribution token, counts, ranges).
    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, AoiError>;
