use std::fmt;

use thiserror::Error;

use crate::lang::{LangError, SourcePos};
use crate::wire::WireError;

/// An error raised while executing script code.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RuntimeError {
    pub message: String,
    /// Source position of the faulting instruction, when the image carries
    /// debug information for it.
    pub pos: Option<SourcePos>,
    /// Label of the function that was executing.
    pub function: Option<String>,
}

impl RuntimeError {
    pub fn new(message: impl Into<String>) -> Self {
        Self {
            message: message.into(),
            pos: None,
            function: None,
        }
    }
}

impl fmt::Display for RuntimeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.pos {
            Some(pos) => write!(f, "{pos}: {}", self.message)?,
            None => write!(f, "{}", self.message)?,
        }
        if let Some(func) = &self.function {
            write!(f, " (in {func})")?;
        }
        Ok(())
    }
}

impl std::error::Error for RuntimeError {}

impl From<WireError> for RuntimeError {
    fn from(e: WireError) -> Self {
        RuntimeError::new(e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum VmError {
    #[error(transparent)]
    Image(#[from] LangError),
    #[error("robot id {0} is out of range, ids are non-negative 32-bit integers")]
    InvalidRobotId(i64),
    #[error("`{0}` is already defined")]
    DuplicateName(String),
    #[error("`{0}` must be registered before the first step")]
    AlreadyBooted(String),
    #[error("`{0}` is not a function")]
    NotAFunction(String),
    #[error("runtime error: {0}")]
    Runtime(RuntimeError),
    #[error("VM is faulted: {0}")]
    Faulted(RuntimeError),
}
