use thiserror::Error;

/// Failures raised by the numerical routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain where the quantity is defined.
    #[error("domain error: {0}")]
    Domain(String),
    /// Family parameters leave the positivity region of the generating function.
    #[error("parameter range error: {0}")]
    ParameterRange(String),
    /// The adaptive ODE integrator could not advance.
    #[error("integration error: {0}")]
    Integration(String),
    /// A quadrature or truncated sum did not reach the requested accuracy.
    #[error("accuracy error: {0}")]
    Accuracy(String),
    /// Solver options are inconsistent with the problem (e.g. matching radius too small).
    #[error("configuration error: {0}")]
    Configuration(String),
    /// Phase continuation along a sweep jumped by more than a quarter period.
    #[error("branch error at k = {k}: increment {increment:.6} vs reference {reference:.6}")]
    Branch { k: i64, increment: f64, reference: f64 },
    /// Fixed-sign curvature could not be certified where it is required.
    #[error("certification error: {0}")]
    Certification(String),
}

pub type Result<T> = std::result::Result<T, Error>;
