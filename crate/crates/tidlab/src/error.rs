use thiserror::Error;

/// Errors shared by every module of the crate.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParameters(String),
    /// The drift |x|^alpha is singular at x = 0 when alpha < 0.
    #[error("drift singularity at x = 0 (alpha < 0)")]
    SingularPoint,
    /// The power change of time is undefined at alpha = -1.
    #[error("power change of time undefined at alpha = -1")]
    DegenerateExponent,
    #[error("argument s = {s} outside the change-of-time domain [0, {t1})")]
    OutOfDomain { s: f64, t1: f64 },
    /// An envelope was evaluated where its logarithms are not positive.
    #[error("envelope undefined at t = {0}")]
    EnvelopeDomain(f64),
    #[error("density not integrable for rho = {rho}, alpha = {alpha}")]
    NonIntegrable { rho: f64, alpha: f64 },
    #[error(
        "quadrature tolerance not met (error estimate {err:.3e} after {subdivisions} subdivisions)"
    )]
    ToleranceNotMet { err: f64, subdivisions: usize },
    #[error("no limit law: the regime is almost-surely explosive")]
    NoLimitLaw,
    #[error("empty sample")]
    EmptySample,
    #[error("step refinement hit the floor at t = {t} without crossing the explosion threshold")]
    NonConvergentStep { t: f64 },
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("i/o: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;
