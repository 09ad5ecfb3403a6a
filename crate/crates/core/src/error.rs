use alloc::string::String;
use core::fmt;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// An argument violates an operation's precondition.
    InvalidArgument(String),
    /// `a + y^2 = 0` in the loss denominator.
    DivisionByZero { y: f64 },
    /// Vector length does not match the problem dimension.
    DimensionMismatch { expected: usize, found: usize },
    /// A state or gradient became non-finite during descent.
    NumericalOverflow { step: usize, context: &'static str },
    /// Dense storage or diagonalization budget exceeded.
    ResourceLimit { n: usize, limit: usize },
    /// An iterative solver hit its iteration cap.
    Convergence {
        solver: &'static str,
        iterations: usize,
        residual: f64,
    },
    /// A root-finder could not bracket a sign change it needed.
    Bracketing(&'static str),
    /// A self-consistent equation has no admissible solution.
    Structural(String),
    /// Too few samples or quadrature too coarse for the requested accuracy.
    Precision(String),
}

pub type Result<T> = core::result::Result<T, Error>;

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidArgument(msg) => write!(f, "invalid argument: {msg}"),
            Error::DivisionByZero { y } => {
                write!(f, "loss denominator a + y^2 vanishes at y = {y}")
            }
            Error::DimensionMismatch { expected, found } => {
                write!(f, "dimension mismatch: expected {expected}, found {found}")
            }
            Error::NumericalOverflow { step, context } => {
                write!(f, "non-finite values at step {step} ({context})")
            }
            Error::ResourceLimit { n, limit } => {
                write!(f, "dimension {n} exceeds dense limit {limit}")
            }
            Error::Convergence {
                solver,
                iterations,
                residual,
            } => write!(
                f,
                "{solver} did not converge after {iterations} iterations (residual {residual:.3e})"
            ),
            Error::Bracketing(what) => write!(f, "failed to bracket root: {what}"),
            Error::Structural(msg) => write!(f, "structural failure: {msg}"),
            Error::Precision(msg) => write!(f, "insufficient precision: {msg}"),
        }
    }
}

impl core::error::Error for Error {}

pub(crate) fn check_len(expected: usize, v: &[f64]) -> Result<()> {
    if v.len() != expected {
        return Err(Error::DimensionMismatch {
            expected,
            found: v.len(),
        });
    }
    Ok(())
}
