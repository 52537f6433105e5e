use serde_json::Value;
use thiserror::Error;

use magspec_core::error::Error as CoreError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Solver(#[from] CoreError),
    #[error("{failed} acceptance criteria failed")]
    VerifyFailed { failed: usize, report: Value },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// 1 for failed criteria, 2 for bad input, 3 for solver failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::VerifyFailed { .. } => 1,
            CliError::Config(_) | CliError::Io(_) => 2,
            CliError::Solver(e) => match e {
                CoreError::DegenerateChart(_)
                | CoreError::TooCoarse { .. }
                | CoreError::OddDimensionPairing { .. }
                | CoreError::NotSkew(_)
                | CoreError::NotTorus
                | CoreError::ShapeMismatch(_)
                | CoreError::NonLatticeShift(_)
                | CoreError::FluxNotQuantized(_)
                | CoreError::TooLarge { .. }
                | CoreError::UnknownFamily(_)
                | CoreError::InvalidQuantumNumber(_)
                | CoreError::UnknownGeometry(_)
                | CoreError::InvalidArgument(_) => 2,
                _ => 3,
            },
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
