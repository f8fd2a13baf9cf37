use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("no pending tasks")]
    NoPendingTasks,
    #[error("unknown task {0:?}")]
    UnknownTask(String),
    #[error("unknown image {0:?}")]
    UnknownImage(String),
    #[error("lease on task {0:?} expired")]
    LeaseExpired(String),
    #[error("task {0:?} is not leased to this session")]
    NotLeased(String),
    #[error("task {0:?} is already labeled")]
    AlreadyLabeled(String),
    #[error("task {0:?} was skipped")]
    TaskSkipped(String),
    #[error("ordinal label must be -1, 0 or 1, got {0}")]
    InvalidLabel(i64),
    #[error("session has no label to undo")]
    NothingToUndo,
    #[error("{0}")]
    BadRequest(String),
    #[error("encoding image {0:?}: {1}")]
    Encode(String, String),
    #[error(transparent)]
    Core(#[from] reltrav::Error),
}

impl ServiceError {
    /// Stable machine-readable code used in HTTP error bodies.
    pub fn code(&self) -> &'static str {
        match self {
            ServiceError::NoPendingTasks => "NoPendingTasks",
            ServiceError::UnknownTask(_) => "UnknownTask",
            ServiceError::UnknownImage(_) => "UnknownImage",
            ServiceError::LeaseExpired(_) => "LeaseExpired",
            ServiceError::NotLeased(_) => "NotLeased",
            ServiceError::AlreadyLabeled(_) => "AlreadyLabeled",
            ServiceError::TaskSkipped(_) => "TaskSkipped",
            ServiceError::InvalidLabel(_) => "InvalidLabel",
            ServiceError::NothingToUndo => "NothingToUndo",
            ServiceError::BadRequest(_) => "BadRequest",
            ServiceError::Core(_) | ServiceError::Encode(..) => "Internal",
        }
    }

    pub fn status(&self) -> u16 {
        match self {
            ServiceError::NoPendingTasks | ServiceError::UnknownTask(_) | ServiceError::UnknownImage(_) => 404,
            ServiceError::LeaseExpired(_)
            | ServiceError::NotLeased(_)
            | ServiceError::AlreadyLabeled(_)
            | ServiceError::TaskSkipped(_)
            | ServiceError::NothingToUndo => 409,
            ServiceError::InvalidLabel(_) => 422,
            ServiceError::BadRequest(_) => 400,
            ServiceError::Core(_) | ServiceError::Encode(..) => 500,
        }
    }

    pub fn body(&self) -> ErrorBody {
        ErrorBody {
            code: self.code().to_string(),
            message: self.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, serde::Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
}
