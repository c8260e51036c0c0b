use std::fmt;

use serde::{Deserialize, Serialize};

/// Machine-readable error codes shared by the forum API, the forum client
/// and the tool envelope.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ErrorCode {
    DuplicateUsername,
    ForbiddenRole,
    BadCredentials,
    AuthRequired,
    CsrfMismatch,
    PermissionDenied,
    BoardNotFound,
    TopicNotFound,
    InvalidInput,
    Network,
    UnknownTool,
    SchemaViolation,
    Internal,
}

impl ErrorCode {
    pub fn as_str(self) -> &'static str {
        match self {
            ErrorCode::DuplicateUsername => "DUPLICATE_USERNAME",
            ErrorCode::ForbiddenRole => "FORBIDDEN_ROLE",
            ErrorCode::BadCredentials => "BAD_CREDENTIALS",
            ErrorCode::AuthRequired => "AUTH_REQUIRED",
            ErrorCode::CsrfMismatch => "CSRF_MISMATCH",
            ErrorCode::PermissionDenied => "PERMISSION_DENIED",
            ErrorCode::BoardNotFound => "BOARD_NOT_FOUND",
            ErrorCode::TopicNotFound => "TOPIC_NOT_FOUND",
            ErrorCode::InvalidInput => "INVALID_INPUT",
            ErrorCode::Network => "NETWORK",
            ErrorCode::UnknownTool => "UNKNOWN_TOOL",
            ErrorCode::SchemaViolation => "SCHEMA_VIOLATION",
            ErrorCode::Internal => "INTERNAL",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        serde_json::from_value(serde_json::Value::String(s.to_string())).ok()
    }
}

impl fmt::Display for ErrorCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}
