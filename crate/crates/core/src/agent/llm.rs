//! Chat providers behind one `chat(system_prompt, user_message)` call.

use std::collections::VecDeque;
use std::sync::Mutex;
use std::time::Duration;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use super::extract::{extract_fallback, EXTRACTION_HEADER};
use crate::robot::ScriptedPlanner;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum LlmError {
    #[error("provider unavailable: {0}")]
    Unavailable(String),
    #[error("provider request failed: {0}")]
    Request(String),
    #[error("malformed provider response: {0}")]
    Malformed(String),
}

#[async_trait]
pub trait LlmProvider: Send + Sync {
    fn name(&self) -> &str;

    fn available(&self) -> bool {
        true
    }

    async fn chat(&self, system_prompt: &str, user_message: &str) -> Result<String, LlmError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ProviderKind {
    #[default]
    RuleBasedOnly,
    Mock,
    Scripted,
    OpenaiCompatible,
}

/// The `llm` section of an agent config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct LlmConfig {
    pub provider: ProviderKind,
    pub endpoint: Option<String>,
    pub api_key_env: Option<String>,
    pub model: Option<String>,
    /// Scripted provider reply to extraction prompts.
    pub extraction_response: Option<String>,
    /// Scripted provider reply to every other prompt.
    pub summary_response: Option<String>,
    pub timeout_secs: Option<f64>,
}

impl LlmConfig {
    pub fn build(&self) -> Result<std::sync::Arc<dyn LlmProvider>, LlmError> {
        use std::sync::Arc;
        Ok(match self.provider {
            ProviderKind::RuleBasedOnly => Arc::new(Disabled),
            ProviderKind::Mock => Arc::new(MockProvider),
            ProviderKind::Scripted => Arc::new(ScriptedProvider::new(
                self.extraction_response.clone(),
                self.summary_response.clone(),
            )),
            ProviderKind::OpenaiCompatible => {
                let endpoint = self
                    .endpoint
                    .clone()
                    .ok_or_else(|| LlmError::Unavailable("llm.endpoint is required".into()))?;
                let key = self
                    .api_key_env
                    .as_deref()
                    .and_then(|k| std::env::var(k).ok());
                Arc::new(OpenAiCompatible::new(
                    endpoint,
                    key,
                    self.model.clone().unwrap_or_else(|| "default".into()),
                    Duration::from_secs_f64(self.timeout_secs.unwrap_or(30.0)),
                ))
            }
        })
    }
}

/// `rule_based_only`: always unavailable.
pub struct Disabled;

#[async_trait]
impl LlmProvider for Disabled {
    fn name(&self) -> &str {
        "rule_based_only"
    }

    fn available(&self) -> bool {
        false
    }

    async fn chat(&self, _: &str, _: &str) -> Result<String, LlmError> {
        Err(LlmError::Unavailable("no provider configured".into()))
    }
}

/// Deterministic offline provider.
///
/// Extraction prompts get the rule-based extraction of the post,
/// planning prompts get the scripted planner's next step, and anything
/// else gets a templated summary of the user message.
pub struct MockProvider;

fn mention_in_prompt(system: &str) -> Option<&str> {
    let rest = &system[system.find("issued to ")? + "issued to ".len()..];
    rest.split_whitespace().next()
}

#[async_trait]
impl LlmProvider for MockProvider {
    fn name(&self) -> &str {
        "mock"
    }

    async fn chat(&self, system: &str, user: &str) -> Result<String, LlmError> {
        if system.starts_with(EXTRACTION_HEADER) {
            let mention = mention_in_prompt(system).unwrap_or("@");
            return Ok(extract_fallback(user, mention).command.unwrap_or_default());
        }
        if let Some(cmd) = user
            .strip_prefix("Command: ")
            .filter(|_| system.contains("\"tool\""))
        {
            let cmd = cmd.lines().next().unwrap_or_default();
            let done = user.lines().filter(|l| l.contains(") -> ok")).count();
            let (steps, _) = ScriptedPlanner::plan(cmd);
            return Ok(match steps.get(done) {
                Some((name, params)) => json!({ "tool": name, "params": params }).to_string(),
                None => json!({ "done": "command complete" }).to_string(),
            });
        }
        Ok(mock_summary(user))
    }
}

fn mock_summary(report: &str) -> String {
    let field = |key: &str| {
        report
            .lines()
            .find_map(|l| l.strip_prefix(key))
            .map(str::trim)
            .unwrap_or("")
            .to_string()
    };
    let command = field("command:");
    let ok = field("success:") == "true";
    let steps: Vec<&str> = report
        .lines()
        .filter(|l| l.starts_with('['))
        .filter_map(|l| l.split_whitespace().nth(1))
        .collect();
    let mut s = format!(
        "**Command:** {command}\n**Outcome:** {}\n**Steps:** {}",
        if ok { "success" } else { "failure" },
        if steps.is_empty() {
            "none".to_string()
        } else {
            steps.join(", ")
        }
    );
    let pose = field("final pose=");
    if !pose.is_empty() {
        s.push_str(&format!("\n**Final pose:** {pose}"));
    }
    let err = field("error:");
    if !err.is_empty() {
        s.push_str(&format!("\n**Error:** {err}"));
    }
    s
}

/// Returns fixed strings; `None` makes that kind of prompt fail.
pub struct ScriptedProvider {
    extraction: Option<String>,
    summary: Option<String>,
    queue: Mutex<VecDeque<Result<String, LlmError>>>,
    calls: Mutex<Vec<(String, String)>>,
}

impl ScriptedProvider {
    pub fn new(extraction: Option<String>, summary: Option<String>) -> Self {
        ScriptedProvider {
            extraction,
            summary,
            queue: Mutex::new(VecDeque::new()),
            calls: Mutex::new(Vec::new()),
        }
    }

    /// Replies consumed in order before falling back to the fixed strings.
    pub fn with_queue(self, replies: Vec<Result<String, LlmError>>) -> Self {
        *self.queue.lock().unwrap() = replies.into();
        self
    }

    pub fn calls(&self) -> Vec<(String, String)> {
        self.calls.lock().unwrap().clone()
    }
}

#[async_trait]
impl LlmProvider for ScriptedProvider {
    fn name(&self) -> &str {
        "scripted"
    }

    async fn chat(&self, system: &str, user: &str) -> Result<String, LlmError> {
        self.calls
            .lock()
            .unwrap()
            .push((system.to_string(), user.to_string()));
        if let Some(r) = self.queue.lock().unwrap().pop_front() {
            return r;
        }
        let fixed = if system.starts_with(EXTRACTION_HEADER) {
            &self.extraction
        } else {
            &self.summary
        };
        fixed
            .clone()
            .ok_or_else(|| LlmError::Unavailable("no scripted reply".into()))
    }
}

/// Any server speaking the `/chat/completions` dialect.
pub struct OpenAiCompatible {
    endpoint: String,
    api_key: Option<String>,
    model: String,
    http: reqwest::Client,
}

impl OpenAiCompatible {
    pub fn new(
        endpoint: String,
        api_key: Option<String>,
        model: String,
        timeout: Duration,
    ) -> Self {
        OpenAiCompatible {
            endpoint: endpoint.trim_end_matches('/').to_string(),
            api_key,
            model,
            http: reqwest::Client::builder()
                .timeout(timeout)
                .build()
                .expect("http client"),
        }
    }
}

#[async_trait]
impl LlmProvider for OpenAiCompatible {
    fn name(&self) -> &str {
        "openai_compatible"
    }

    async fn chat(&self, system: &str, user: &str) -> Result<String, LlmError> {
        let body = json!({
            "model": self.model,
            "temperature": 0,
            "messages": [
                { "role": "system", "content": system },
                { "role": "user", "content": user },
            ],
        });
        let mut req = self
            .http
            .post(format!("{}/chat/completions", self.endpoint))
            .json(&body);
        if let Some(k) = &self.api_key {
            req = req.bearer_auth(k);
        }
        let resp = req
            .send()
            .await
            .map_err(|e| LlmError::Request(e.to_string()))?;
        if !resp.status().is_success() {
            return Err(LlmError::Request(format!("status {}", resp.status())));
        }
        let v: Value = resp
            .json()
            .await
            .map_err(|e| LlmError::Malformed(e.to_string()))?;
        v["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| LlmError::Malformed("missing choices[0].message.content".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent::extract::extraction_prompt;

    #[tokio::test]
    async fn mock_extracts_and_summarizes() {
        let m = MockProvider;
        let out = m
            .chat(
                &extraction_prompt("@quadruped", "quadruped robot dog"),
                "hey @quadruped say hello",
            )
            .await
            .unwrap();
        assert_eq!(out, "say hello");
        let s = m
            .chat(
                "summarize",
                "success: true\ncommand: say hello\n[1] act_hello {} -> ok: duration=2.00s\n",
            )
            .await
            .unwrap();
        assert!(s.contains("say hello") && s.contains("act_hello") && s.contains("success"));
    }

    #[tokio::test]
    async fn scripted_replies() {
        let p = ScriptedProvider::new(Some("walk".into()), None)
            .with_queue(vec![Err(LlmError::Request("boom".into()))]);
        assert!(p.chat(EXTRACTION_HEADER, "x").await.is_err());
        assert_eq!(p.chat(EXTRACTION_HEADER, "x").await.unwrap(), "walk");
        assert!(p.chat("summarize", "x").await.is_err());
        assert_eq!(p.calls().len(), 3);
    }

    #[tokio::test]
    async fn disabled_is_unavailable() {
        assert!(!Disabled.available());
        assert!(Disabled.chat("a", "b").await.is_err());
    }
}
