//! Agent metadata tag block carried on the first line of agent-authored posts.
//!
//! Grammar (line 1, nothing else on the line):
//!
//! ```text
//! [agent_type=<T>][agent_id=<I>][status=<S>]
//! ```
//!
//! `T` and `I` are non-empty and contain none of `[`, `]`, `\r`, `\n`.
//! `S` is one of `info`, `success`, `failure`, `in_progress`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentStatus {
    Info,
    Success,
    Failure,
    InProgress,
}

impl AgentStatus {
    pub const ALL: [AgentStatus; 4] = [
        AgentStatus::Info,
        AgentStatus::Success,
        AgentStatus::Failure,
        AgentStatus::InProgress,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            AgentStatus::Info => "info",
            AgentStatus::Success => "success",
            AgentStatus::Failure => "failure",
            AgentStatus::InProgress => "in_progress",
        }
    }
}

impl fmt::Display for AgentStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AgentStatus {
    type Err = MetaError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        AgentStatus::ALL
            .into_iter()
            .find(|st| st.as_str() == s)
            .ok_or_else(|| MetaError::BadStatus(s.to_string()))
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MetaError {
    #[error("metadata field `{0}` must be non-empty and free of brackets and newlines")]
    BadField(&'static str),
    #[error("unknown status `{0}`")]
    BadStatus(String),
}

/// Identity and execution status of the agent that authored a post.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AgentMeta {
    pub agent_type: String,
    pub agent_id: String,
    pub status: AgentStatus,
}

fn valid_value(v: &str) -> bool {
    !v.is_empty() && !v.contains(['[', ']', '\r', '\n'])
}

impl AgentMeta {
    pub fn new(
        agent_type: impl Into<String>,
        agent_id: impl Into<String>,
        status: AgentStatus,
    ) -> Result<Self, MetaError> {
        let meta = AgentMeta {
            agent_type: agent_type.into(),
            agent_id: agent_id.into(),
            status,
        };
        meta.validate()?;
        Ok(meta)
    }

    pub fn validate(&self) -> Result<(), MetaError> {
        if !valid_value(&self.agent_type) {
            return Err(MetaError::BadField("agent_type"));
        }
        if !valid_value(&self.agent_id) {
            return Err(MetaError::BadField("agent_id"));
        }
        Ok(())
    }

    pub fn with_status(&self, status: AgentStatus) -> Self {
        AgentMeta {
            status,
            ..self.clone()
        }
    }

    pub fn tag_block(&self) -> String {
        format!(
            "[agent_type={}][agent_id={}][status={}]",
            self.agent_type, self.agent_id, self.status
        )
    }
}

/// Reads one `[key=value]` tag from the front of `s`.
fn take_tag<'a>(s: &'a str, key: &str) -> Option<(&'a str, &'a str)> {
    let s = s.strip_prefix('[')?.strip_prefix(key)?.strip_prefix('=')?;
    let end = s.find(']')?;
    let value = &s[..end];
    valid_value(value).then_some((value, &s[end + 1..]))
}

/// Splits a post into its metadata block and body, if line 1 is a
/// well-formed tag block.
pub fn parse(content: &str) -> Option<(AgentMeta, &str)> {
    let (line, body) = match content.find('\n') {
        Some(i) => (&content[..i], &content[i + 1..]),
        None => (content, ""),
    };
    let line = line.strip_suffix('\r').unwrap_or(line);
    let (agent_type, rest) = take_tag(line, "agent_type")?;
    let (agent_id, rest) = take_tag(rest, "agent_id")?;
    let (status, rest) = take_tag(rest, "status")?;
    if !rest.is_empty() {
        return None;
    }
    let status = status.parse().ok()?;
    Some((
        AgentMeta {
            agent_type: agent_type.to_string(),
            agent_id: agent_id.to_string(),
            status,
        },
        body,
    ))
}

pub fn parse_meta(content: &str) -> Option<AgentMeta> {
    parse(content).map(|(m, _)| m)
}

/// Prefixes `content` with the tag block. An existing block is replaced.
pub fn inject(content: &str, meta: &AgentMeta) -> String {
    let body = parse(content).map(|(_, b)| b).unwrap_or(content);
    format!("{}\n{}", meta.tag_block(), body)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn go2(status: AgentStatus) -> AgentMeta {
        AgentMeta::new("go2", "quadruped-01", status).unwrap()
    }

    #[test]
    fn inject_formats_three_fields() {
        assert_eq!(
            inject("done", &go2(AgentStatus::Success)),
            "[agent_type=go2][agent_id=quadruped-01][status=success]\ndone"
        );
    }

    #[test]
    fn reinject_replaces_existing_block() {
        let once = inject("done", &go2(AgentStatus::InProgress));
        let twice = inject(&once, &go2(AgentStatus::Success));
        assert_eq!(twice, inject("done", &go2(AgentStatus::Success)));
        assert_eq!(twice.matches("[agent_type=").count(), 1);
    }

    #[test]
    fn malformed_blocks_do_not_parse() {
        for bad in [
            "[agent_type=go2]",
            "[agent_type=go2][agent_id=x]",
            "[agent_type=go2][agent_id=x][status=dancing]",
            "[agent_type=][agent_id=x][status=info]",
            " [agent_type=go2][agent_id=x][status=info]",
            "[agent_type=go2][agent_id=x][status=info] trailing",
            "hello [agent_type=go2][agent_id=x][status=info]",
        ] {
            assert!(parse(bad).is_none(), "{bad:?}");
        }
    }

    #[test]
    fn block_without_body_parses_to_empty_body() {
        let (m, body) = parse("[agent_type=g1][agent_id=h][status=info]").unwrap();
        assert_eq!(m.agent_type, "g1");
        assert_eq!(body, "");
    }

    #[test]
    fn rejects_empty_fields() {
        assert!(AgentMeta::new("", "x", AgentStatus::Info).is_err());
        assert!(AgentMeta::new("go2", "a]b", AgentStatus::Info).is_err());
    }

    fn value() -> impl Strategy<Value = String> {
        "[a-zA-Z0-9_.=-]{1,12}"
    }

    proptest! {
        #[test]
        fn round_trip(t in value(), i in value(), s in 0usize..4, body in "(?s).{0,60}") {
            let meta = AgentMeta::new(t, i, AgentStatus::ALL[s]).unwrap();
            let tagged = inject(&body, &meta);
            let (parsed, rest) = parse(&tagged).unwrap();
            prop_assert_eq!(&parsed, &meta);
            // a body that itself starts with a block is stripped by inject
            match parse(&body) {
                Some((_, inner)) => prop_assert_eq!(rest, inner),
                None => prop_assert_eq!(rest, body.as_str()),
            }
        }

        #[test]
        fn inject_is_idempotent(t in value(), i in value(), body in "(?s).{0,60}") {
            let meta = AgentMeta::new(t, i, AgentStatus::Info).unwrap();
            let once = inject(&body, &meta);
            prop_assert_eq!(inject(&once, &meta), once);
        }
    }
}
