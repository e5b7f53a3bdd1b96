//! Crate-wide error type and exit-code mapping for the CLI.

use thiserror::Error;

/// Errors produced anywhere in the laboratory.
///
/// The variants partition into the CLI's exit-code classes: misuse of an
/// operation or malformed input (`Usage`, `Config`, `Io` -> exit 1),
/// numerical failure (`Numerical`, `NonConvergence` -> exit 2), and a
/// violated theorem-level inequality (`BoundViolation` -> exit 3, kept
/// distinct because it is the scientifically interesting outcome).
#[derive(Debug, Error)]
pub enum Error {
    #[error("usage: {0}")]
    Usage(String),

    #[error("config: {0}")]
    Config(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("numerical: {0}")]
    Numerical(String),

    #[error("power iteration did not converge after {iterations} iterations (residual {residual:.3e})")]
    NonConvergence {
        iterations: usize,
        residual: f64,
        /// Last iterate, as cell masses, so callers can inspect or resume.
        last: Vec<f64>,
    },

    #[error("bound violation: {0}")]
    BoundViolation(String),
}

impl Error {
    /// Process exit code for the CLI: 1 usage, 2 numerical, 3 bound violation.
    pub fn exit_code(&self) -> u8 {
        match self {
            Error::Usage(_) | Error::Config(_) | Error::Io(_) => 1,
            Error::Numerical(_) | Error::NonConvergence { .. } => 2,
            Error::BoundViolation(_) => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
