use rand::RngCore;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::ErrorCode;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnvelopeError {
    pub code: String,
    pub message: String,
}

/// Uniform result of every tool invocation: exactly one of `data` and
/// `error` is present, and `trace_id` identifies the invocation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolEnvelope {
    pub success: bool,
    pub tool: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<EnvelopeError>,
    pub trace_id: String,
}

/// 16 random bytes, hex encoded.
pub fn new_trace_id() -> String {
    let mut bytes = [0u8; 16];
    rand::rng().fill_bytes(&mut bytes);
    hex::encode(bytes)
}

impl ToolEnvelope {
    pub fn ok(tool: &str, data: Value) -> Self {
        ToolEnvelope {
            success: true,
            tool: tool.to_string(),
            data: Some(data),
            error: None,
            trace_id: new_trace_id(),
        }
    }

    pub fn fail(tool: &str, code: ErrorCode, message: impl Into<String>) -> Self {
        ToolEnvelope {
            success: false,
            tool: tool.to_string(),
            data: None,
            error: Some(EnvelopeError {
                code: code.as_str().to_string(),
                message: message.into(),
            }),
            trace_id: new_trace_id(),
        }
    }

    /// Structural check of the envelope invariants.
    pub fn is_well_formed(&self) -> bool {
        let exclusive = self.success == self.data.is_some() && self.success != self.error.is_some();
        exclusive && !self.tool.is_empty() && self.trace_id.len() == 32
    }

    pub fn error_code(&self) -> Option<ErrorCode> {
        self.error.as_ref().and_then(|e| ErrorCode::parse(&e.code))
    }

    pub fn data_as<T: DeserializeOwned>(&self) -> Option<T> {
        self.data
            .clone()
            .and_then(|d| serde_json::from_value(d).ok())
    }
}
