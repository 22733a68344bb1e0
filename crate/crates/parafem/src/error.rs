//! Crate-wide error type.

use std::fmt;

#[derive(Debug)]
pub enum Error {
    /// A caller violated a documented precondition.
    InvalidInput(String),
    /// Mesh construction or validation failed.
    Mesh(String),
    /// A sampled coefficient violated its declared bounds.
    Coefficient(String),
    /// Direct factorization hit a pivot below the singularity threshold.
    Singular(String),
    /// An iterative solver exhausted its iteration cap.
    NoConvergence {
        context: String,
        iterations: usize,
        residual_rel: f64,
    },
    /// Problem name not in the catalog.
    UnknownProblem(String),
    Io(std::io::Error),
    /// Text input (config, mesh dump, trajectory dump) failed to parse.
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidInput(m) => write!(f, "invalid input: {m}"),
            Error::Mesh(m) => write!(f, "mesh error: {m}"),
            Error::Coefficient(m) => write!(f, "coefficient error: {m}"),
            Error::Singular(m) => write!(f, "singular system: {m}"),
            Error::NoConvergence {
                context,
                iterations,
                residual_rel,
            } => write!(
                f,
                "no convergence in {context}: {iterations} iterations, relative residual {residual_rel:.3e}"
            ),
            Error::UnknownProblem(m) => write!(f, "unknown problem: {m}"),
            Error::Io(e) => write!(f, "io error: {e}"),
            Error::Parse(m) => write!(f, "parse error: {m}"),
        }
    }
}

impl std::error::Error for Error {}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e)
    }
}
