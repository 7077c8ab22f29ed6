use std::fmt;

use ctxdrop::context::ContextError;
use ctxdrop::corpus::CorpusError;
use ctxdrop::evaluation::EvalError;
use ctxdrop::model::ModelError;
use ctxdrop::training::TrainError;

/// Bad arguments, configs or input data (exit 1) versus failures while
/// running or writing outputs (exit 2).
#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Validation(m) => write!(f, "invalid input: {m}"),
            CliError::Runtime(m) => write!(f, "failed: {m}"),
        }
    }
}

pub fn invalid(m: impl fmt::Display) -> CliError {
    CliError::Validation(m.to_string())
}

pub fn runtime(m: impl fmt::Display) -> CliError {
    CliError::Runtime(m.to_string())
}

impl From<CorpusError> for CliError {
    fn from(e: CorpusError) -> Self {
        invalid(e)
    }
}

impl From<ContextError> for CliError {
    fn from(e: ContextError) -> Self {
        invalid(e)
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        invalid(e)
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        invalid(e)
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::Divergent { .. } => runtime(e),
            other => invalid(other),
        }
    }
}

/// Output-side I/O.
impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        runtime(e)
    }
}
