//! Annotation task server for pairwise ordinal labeling.
//!
//! [`TaskService`] owns the task pool and the append-only annotation
//! store; [`router`] exposes it over HTTP:
//!
//! | method | path | effect |
//! |---|---|---|
//! | GET | `/api/tasks/next` | lease the next pending task |
//! | POST | `/api/tasks/{id}/label` | body `{"t": -1\|0\|1}` |
//! | POST | `/api/tasks/{id}/skip` | mark the task skipped |
//! | POST | `/api/undo` | retract the session's last label |
//! | GET | `/api/progress` | counts and label accounting |
//! | GET | `/api/images/{image_id}` | 8-bit RGB PNG |
//!
//! Errors are JSON `{code, message}` with a 4xx or 5xx status.

mod error;
mod http;
mod tasks;

pub use error::{ErrorBody, ServiceError};
pub use http::{router, serve, SESSION_HEADER};
pub use tasks::{Claim, ImageRef, Progress, ServiceResult, TaskService, DEFAULT_LEASE};
