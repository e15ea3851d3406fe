use thiserror::Error;

/// Everything that can go wrong between reading a matrix and reporting on it.
///
/// The variants fall into the classes the command-line front end maps onto
/// exit codes; see [`ErrorClass`].
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("shape error: {0}")]
    Shape(String),

    #[error("value error at line {line}, column {column}: {message}")]
    Value {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("duplicate or invalid state label: {0}")]
    Label(String),

    #[error("row {row} sums to {sum}, not 1 (tolerance {tol:e})")]
    Stochasticity { row: usize, sum: f64, tol: f64 },

    #[error("entry ({row}, {col}) is {value}; probabilities must be finite and nonnegative")]
    Nonnegativity { row: usize, col: usize, value: f64 },

    /// The chain is not irreducible, so equilibrium quantities are not unique.
    #[error("chain is reducible: {classes} communicating classes {detail}")]
    Reducible { classes: usize, detail: String },

    #[error("structure error: {0}")]
    Structure(String),

    #[error("ill-conditioned chain: {0}")]
    Conditioning(String),

    #[error("eigenvalue 1 has multiplicity > 1 (another eigenvalue at distance {distance:e}); chain is effectively reducible")]
    Multiplicity { distance: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    /// A computed quantity violates an identity that holds for every
    /// irreducible chain.
    #[error("internal consistency check failed: {0}")]
    Consistency(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("replica {replica} exceeded the step cap of {cap} steps")]
    Timeout { replica: u64, cap: u64 },
}

/// Coarse error classes; the CLI exit code is a function of the class.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Input,
    Structure,
    Consistency,
    Timeout,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Parse { .. }
            | Error::Shape(_)
            | Error::Value { .. }
            | Error::Label(_)
            | Error::Stochasticity { .. }
            | Error::Nonnegativity { .. }
            | Error::Domain(_) => ErrorClass::Input,
            Error::Reducible { .. }
            | Error::Structure(_)
            | Error::Conditioning(_)
            | Error::Multiplicity { .. } => ErrorClass::Structure,
            Error::Numerical(_) | Error::Consistency(_) => ErrorClass::Consistency,
            Error::Timeout { .. } => ErrorClass::Timeout,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
