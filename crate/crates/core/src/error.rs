use thiserror::Error;

/// Errors raised by the transform, convolution and harness routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("measure has zero total mass")]
    ZeroMass,

    #[error("dilation factor must be nonzero")]
    ZeroScale,

    #[error("polynomial of degree {0} has no roots to find")]
    ConstantPolynomial(usize),

    #[error("composed degree {degree} exceeds the cap of {cap}")]
    DegreeCapExceeded { degree: usize, cap: usize },

    #[error("pole at {re}{im:+}i is not real")]
    NonRealPole { re: f64, im: f64 },

    #[error("pole at {0} is not simple")]
    MultiplePole(f64),

    #[error("not an F-transform: residue {residue} at {location} has the wrong sign")]
    WrongResidueSign { location: f64, residue: f64 },

    #[error("rational map has degree structure {num}/{den}, expected numerator degree <= denominator degree + 1")]
    BadDegree { num: usize, den: usize },

    #[error("point {re}{im:+}i is not in the upper half-plane")]
    NotInUpperHalfPlane { re: f64, im: f64 },

    #[error("point {re}{im:+}i lies outside the admissible region: {reason}")]
    OutsideRegion { re: f64, im: f64, reason: String },

    #[error("{what} did not converge within {iterations} iterations")]
    NoConvergence { what: &'static str, iterations: usize },

    #[error("operation requires a probability measure, got mass {0}")]
    NotProbability(f64),

    #[error("circle measure has zero mean")]
    ZeroMean,

    #[error("invariant violated: {0}")]
    InvariantViolation(String),

    #[error("iterate overflowed (|w| = {0:e})")]
    Overflow(f64),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("at n = {n}: {source}")]
    AtRow { n: usize, source: Box<Error> },
}

pub type Result<T> = std::result::Result<T, Error>;
