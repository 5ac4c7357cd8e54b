use thiserror::Error;

/// Errors raised by the micromaser routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter {name} = {value}: {reason}")]
    InvalidParameter { name: &'static str, value: f64, reason: &'static str },
    #[error("argument outside the domain: {0}")]
    Domain(String),
    #[error("0/0 in w(x) at a trapping zero with n_b = 0 (x = {x})")]
    TrappingDegenerate { x: f64 },
    #[error("photon-number truncation failed to converge up to n_max = {n_max}")]
    TruncationFailure { n_max: usize },
    #[error("thermal distribution diverges: theta_eff^2 (2a-1) = {0} >= 1")]
    Divergent(f64),
    #[error("no maser branch exists for a = {a}, delta = {delta}")]
    NoMaserBranch { a: f64, delta: f64 },
    #[error("no transition: {0}")]
    NoTransition(String),
    #[error("no crossing: {0}")]
    NoCrossing(String),
    #[error("integrand singular on the integration range: {0}")]
    QuadratureSingularity(String),
    #[error("quadrature did not converge (estimate {value}, error {error})")]
    QuadratureFailure { value: f64, error: f64 },
    #[error("order-parameter slope is infinite at phi = {0} (tan phi = phi)")]
    InfiniteSlope(f64),
    #[error("no minimum of the effective potential: the system is in the thermal phase")]
    ThermalPhase,
    #[error("need two minima separated by a maximum, found {0} minima")]
    NoBarrier(usize),
    #[error("atomic correlation undefined: <s> = {0}")]
    UndefinedNormalization(f64),
    #[error("generator truncation too small at dim = {dim}: {reason}")]
    Truncation { dim: usize, reason: String },
    #[error("precondition violated: {0}")]
    Precondition(String),
}

pub type Result<T> = std::result::Result<T, Error>;
