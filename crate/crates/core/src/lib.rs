//! Frequency-domain toolkit for wave equations with weak time-dependent
//! dissipation, `u_tt − Δu + b(t)u_t = 0`.
//!
//! The crate builds the fundamental solution of the Fourier-transformed
//! first-order system in two zones of the phase space, cross-checks every
//! assembled object against a direct ODE integration, and measures the decay
//! rates and scattering behaviour the representation predicts.

pub mod coeff;
pub mod diag;
pub mod jet;
pub mod linalg;
pub mod ode;
pub mod peano;
pub mod propagator;
pub mod quad;
pub mod rates;
pub mod scattering;
pub mod sweep;
pub mod volterra;
pub mod zones;

pub use coeff::{CoefficientModel, Family};
pub use linalg::{Mat2, C64, I};
pub use zones::ZoneGeometry;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("unknown coefficient family `{0}`")]
    UnknownFamily(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("derivative order {requested} exceeds available smoothness {available}")]
    SmoothnessExceeded { requested: usize, available: usize },
    #[error("quadrature did not converge on [{a}, {b}] (error estimate {estimate:.3e})")]
    QuadratureNonConvergence { a: f64, b: f64, estimate: f64 },
    #[error("frequency must be nonzero")]
    ZeroFrequency,
    #[error("zone constant search exhausted at N = {0}")]
    ZoneSearchExhausted(f64),
    #[error("point (t = {t}, |xi| = {xi}) is not in the {expected} zone")]
    ZoneMismatch { t: f64, xi: f64, expected: &'static str },
    #[error("step size underflow at t = {0}")]
    StepUnderflow(f64),
    #[error("maximum number of steps exceeded at t = {0}")]
    MaxSteps(f64),
    #[error("Volterra kernel too large for a contraction (sup |k| = {0:.3e})")]
    ContractionUnattainable(f64),
    #[error("fixed-point iteration did not converge on [{a}, {b}]")]
    FixedPointNonConvergence { a: f64, b: f64 },
    #[error("derivative order {0} unsupported (only 1 and 2)")]
    UnsupportedOrder(usize),
    #[error("diagonalizer nearly singular: |det N_k| = {0:.3e}")]
    SingularDiagonalizer(f64),
    #[error("ode and series backends disagree by {0:.3e}")]
    BackendDisagreement(f64),
    #[error("Q(T) did not converge before T = {0:.3e}")]
    QNonConvergence(f64),
    #[error("non-positive value {0} where a positive one is required")]
    NonPositive(f64),
    #[error("data profile is not supported away from the origin")]
    NotBandLimited,
}

pub type Result<T> = std::result::Result<T, Error>;
