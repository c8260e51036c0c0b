//! Forum backend: boards, topics and posts over a JSON REST API with
//! sessions, CSRF tokens, roles and registration.

pub mod http;
pub mod model;
pub mod permission;
pub mod service;
pub mod store;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::ErrorCode;

pub use model::{
    AccountView, Board, BoardPolicy, LoginResponse, Page, PostView, Role, TopicDetail, TopicView,
};
pub use permission::{check_permission, Action};
pub use service::{ForumConfig, ForumService};

/// A forum domain failure. Serialized as `{error_code, message}` on the wire.
#[derive(Debug, Clone, Error, PartialEq, Eq, Serialize, Deserialize)]
#[error("{code}: {message}")]
pub struct ForumError {
    #[serde(rename = "error_code")]
    pub code: ErrorCode,
    pub message: String,
}

impl ForumError {
    pub fn new(code: ErrorCode, message: impl Into<String>) -> Self {
        ForumError {
            code,
            message: message.into(),
        }
    }

    pub fn auth(message: &str) -> Self {
        ForumError::new(ErrorCode::AuthRequired, message)
    }

    pub fn board_not_found(id: u64) -> Self {
        ForumError::new(ErrorCode::BoardNotFound, format!("board {id} not found"))
    }

    pub fn topic_not_found(id: u64) -> Self {
        ForumError::new(ErrorCode::TopicNotFound, format!("topic {id} not found"))
    }
}
