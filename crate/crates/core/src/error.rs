use std::fmt;

pub type Result<T> = std::result::Result<T, Error>;

/// Failure modes shared by the kernel, the solvers and the CLI.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain of a scalar function.
    Domain { function: &'static str, value: f64 },
    /// A scenario or parameter block breaks a type invariant.
    InvalidInput(String),
    /// The cloud cannot absorb the bits that must be offloaded:
    /// `required` cycles of minimum offload exceed `capacity`.
    Infeasible { required: f64, capacity: f64 },
    /// An allocation breaks a hard rule of the model (e.g. bits sent in zero time).
    Violation(String),
    /// A bisection or fixed-point loop ran out of iterations.
    IterationLimit { what: &'static str, iterations: usize },
    /// A constructed solution failed its own certification.
    Numeric(String),
    Parse(String),
    Io(String),
}

impl Error {
    pub(crate) fn domain(function: &'static str, value: f64) -> Self {
        Error::Domain { function, value }
    }

    /// Short machine-readable tag, used by the CLI error envelope.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Domain { .. } => "domain",
            Error::InvalidInput(_) => "invalid_input",
            Error::Infeasible { .. } => "infeasible",
            Error::Violation(_) => "violation",
            Error::IterationLimit { .. } => "iteration_limit",
            Error::Numeric(_) => "numeric",
            Error::Parse(_) => "parse",
            Error::Io(_) => "io",
        }
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Domain { function, value } => {
                write!(f, "{function}: argument {value:e} outside domain")
            }
            Error::InvalidInput(msg) => write!(f, "invalid input: {msg}"),
            Error::Infeasible { required, capacity } => write!(
                f,
                "infeasible: minimum offload needs {required:e} cycles but cloud capacity is {capacity:e}"
            ),
            Error::Violation(msg) => write!(f, "constraint violation: {msg}"),
            Error::IterationLimit { what, iterations } => {
                write!(f, "{what}: no convergence after {iterations} iterations")
            }
            Error::Numeric(msg) => write!(f, "numeric failure: {msg}"),
            Error::Parse(msg) => write!(f, "parse error: {msg}"),
            Error::Io(msg) => write!(f, "i/o error: {msg}"),
        }
    }
}

impl std::error::Error for Error {}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
