//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by meshing, assembly, solvers and the pipeline commands.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller violated a documented precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Element geometry degenerated during assembly.
    #[error("singular geometry in triangle {triangle}: |det J| = {det_j:.3e}")]
    SingularElement { triangle: usize, det_j: f64 },

    /// A linear solve failed or returned garbage.
    #[error("linear solver failure{}: {detail}", step.map(|s| format!(" at step {s}")).unwrap_or_default())]
    Solver { step: Option<usize>, detail: String },

    /// The dense reduced system could not be solved; usually a missing-supremizer symptom.
    #[error("singular reduced matrix at step {step} (check that supremizers are present)")]
    SingularReducedMatrix { step: usize },

    /// A POD mode was requested past the numerically meaningful spectrum.
    #[error("degenerate mode {index}: eigenvalue {lambda:.3e} below 1e-14 of leading {leading:.3e}")]
    DegenerateMode { index: usize, lambda: f64, leading: f64 },

    /// Configuration file is missing, malformed, or fails validation.
    #[error("configuration error: {0}")]
    Config(String),

    /// A data artifact (snapshots, basis, model archive) is missing or inconsistent.
    #[error("data error: {0}")]
    Data(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// Process exit code for the CLI: 2 config, 3 data, 4 numerical.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Data(_) | Error::Io(_) => 3,
            _ => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
