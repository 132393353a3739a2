use num_complex::Complex64;
use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("argument {u} lies within {distance:e} of a pole")]
    PoleProximity { u: Complex64, distance: f64 },

    #[error("elliptic modulus {0} is outside the open interval (0, 1)")]
    InvalidModulus(f64),

    #[error("complete elliptic integral diverges at k = {0}")]
    Divergent(f64),

    #[error("step size underflow at t = {t}")]
    StepFailure { t: f64 },

    #[error("unsupported parameters: {0}")]
    UnsupportedParams(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("Euler-angle chart is singular: |sin q2| = {0:e}")]
    CoordinateSingularity(f64),

    #[error("denominator roots {0} and {1} are closer than the separation threshold")]
    ClusteredRoots(Complex64, Complex64),

    #[error("numerator and denominator share an ill-conditioned near-common factor at {0}")]
    NearCommonFactor(Complex64),

    #[error("equation is not Fuchsian: {0}")]
    NotFuchsian(String),

    #[error("exponent difference {0} at infinity is not an integer")]
    NonIntegerExponentGap(f64),

    #[error("loop passes within {distance:e} of singularity {at}")]
    ClearanceViolation { at: Complex64, distance: f64 },

    #[error("loop winding numbers do not match its target: {0}")]
    BadLoop(String),

    #[error("energy level {h} is not reachable from the seed (discriminant {discriminant})")]
    EnergyInfeasible { h: f64, discriminant: f64 },

    #[error("orbit escaped: |p1| = {p1} at t = {t}")]
    EscapeDetected { p1: f64, t: f64 },

    #[error("malformed input: {0}")]
    Parse(String),
}

impl Error {
    /// True for errors caused by the caller's input rather than by a numerical breakdown.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidModulus(_)
                | Error::Divergent(_)
                | Error::UnsupportedParams(_)
                | Error::InvalidParams(_)
                | Error::NotFuchsian(_)
                | Error::NonIntegerExponentGap(_)
                | Error::EnergyInfeasible { .. }
                | Error::Parse(_)
                | Error::BadLoop(_)
        )
    }
}
