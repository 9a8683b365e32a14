use thiserror::Error;

use crate::model::{InstanceError, ScheduleError};
use crate::profile::PushError;

/// Failure of a solver step.
///
/// `Infeasible` is a certified negative answer for the current guess of the
/// optimum and is recovered from by the guess loops. `Defect` means an
/// internal invariant broke and is never part of normal control flow.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DspError {
    #[error(transparent)]
    Instance(#[from] InstanceError),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error(transparent)]
    Push(#[from] PushError),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("limit exceeded: {0}")]
    Limit(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("internal defect: {0}")]
    Defect(String),
}

impl DspError {
    /// Prefixes the message with the step that produced it.
    pub fn context(self, step: &str) -> Self {
        match self {
            DspError::Precondition(m) => DspError::Precondition(format!("{step}: {m}")),
            DspError::Infeasible(m) => DspError::Infeasible(format!("{step}: {m}")),
            DspError::Limit(m) => DspError::Limit(format!("{step}: {m}")),
            DspError::Numeric(m) => DspError::Numeric(format!("{step}: {m}")),
            DspError::Defect(m) => DspError::Defect(format!("{step}: {m}")),
            other => other,
        }
    }

    pub fn is_defect(&self) -> bool {
        matches!(self, DspError::Defect(_))
    }
}

pub type Result<T> = std::result::Result<T, DspError>;
