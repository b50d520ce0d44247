use thiserror::Error;

/// Errors raised anywhere in the library.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("invalid setup: {0}")]
    InvalidSetup(String),

    #[error("x = {x} lies outside the domain [{lo}, {hi}]")]
    Domain { x: f64, lo: f64, hi: f64 },

    #[error("epsilon = {0} is not supported here; the standard second-order mode is handled by the oracle")]
    UnsupportedEpsilon(f64),

    #[error("characteristic quartic has a complex quartet (discriminant {0} < 0)")]
    ComplexQuartet(f64),

    #[error("degenerate basis: oscillatory wavenumber vanishes (double root)")]
    DegenerateBasis,

    #[error("turning point at x = {0} inside the requested interval")]
    TurningPoint(f64),

    #[error("x = {0} is outside the validity interval of this basis function")]
    OutsideValidity(f64),

    #[error("exponent {exponent} at x = {x} exceeds the representable range")]
    Overflow { x: f64, exponent: f64 },

    #[error("invalid boundary conditions: {0}")]
    InvalidConditions(String),

    #[error("basis function {index} has no asymptotic class toward the requested side")]
    ClassificationNeeded { index: usize },

    #[error("degenerate configuration: {0}")]
    DegenerateConfiguration(String),

    #[error("normalization failed: {0}")]
    Normalization(String),

    #[error("operation requires a {expected} potential, got {found}")]
    PotentialKind { expected: String, found: String },

    #[error("expected {expected} inputs, got {found}")]
    Arity { expected: usize, found: usize },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("undefined critical exponent: {0}")]
    UndefinedExponent(String),

    #[error("integration failed: {0}")]
    Integration(String),

    #[error("quadrature failed: {0}")]
    Quadrature(String),

    #[error("config error (line {line}): {message}")]
    Config { line: usize, message: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// True for errors caused by the user's input rather than by the numerics.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::InvalidSetup(_)
                | Error::Config { .. }
                | Error::Io(_)
                | Error::PotentialKind { .. }
                | Error::InvalidConditions(_)
                | Error::Domain { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
