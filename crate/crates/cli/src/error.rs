use intrinsic_engine::Error as EngineError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Engine(#[from] EngineError),

    #[error("{0}")]
    Io(#[from] std::io::Error),

    #[error("{0}")]
    Failed(String),
}

impl CliError {
    /// 3 for bad input, 2 for out-of-domain or infeasible runs, 1 otherwise.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 3,
            CliError::Engine(e) => match e {
                EngineError::Domain { .. }
                | EngineError::Infeasible { .. }
                | EngineError::DegenerateBoundary
                | EngineError::UnsupportedRegime(_) => 2,
                EngineError::Invalid(_) => 3,
                EngineError::Accuracy { .. } | EngineError::NotBracketed(_) => 1,
            },
            CliError::Io(_) | CliError::Failed(_) => 1,
        }
    }
}
