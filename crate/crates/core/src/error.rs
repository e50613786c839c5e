use thiserror::Error;

/// Errors raised anywhere in the library.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("singular state: site {site} has zero amplitude")]
    SingularState { site: usize },

    #[error("integration failed at t = {t}: {reason}")]
    IntegrationFailure { t: f64, y: Vec<f64>, reason: String },

    #[error("newton did not converge after {iters} iterations (residual {residual:e}); try smaller eps or continuation")]
    NoConvergence {
        iters: usize,
        residual: f64,
        best: Vec<f64>,
    },

    #[error("singular jacobian")]
    SingularJacobian,

    #[error("eigensolver failed to converge")]
    EigenFailure,

    #[error("domain error: {0}")]
    Domain(String),

    #[error("continuation stalled at omega = {omega} after {} members (candidate bifurcation)", .partial.len())]
    ContinuationStalled {
        omega: f64,
        partial: Vec<crate::breather::Breather>,
    },

    #[error("spectrum anomaly: {reason}; eigenvalues {eigenvalues:?}")]
    SpectrumAnomaly {
        reason: String,
        eigenvalues: Vec<(f64, f64)>,
    },

    #[error("basis degenerate (condition estimate {cond:e})")]
    BasisDegenerate { cond: f64 },

    #[error("no fixed point: gamma*beta = {gb} >= eps^2 = {eps2}")]
    NoFixedPoint { gb: f64, eps2: f64 },

    #[error("approximation breakdown: {0}")]
    ApproximationBreakdown(String),

    #[error("t = {t} is past the validity time tau = {tau}")]
    PastValidity { t: f64, tau: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
