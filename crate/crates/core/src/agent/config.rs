use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::extract::DEFAULT_SUMMARY_PROMPT;
use super::llm::LlmConfig;
use crate::robot::RobotKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum AgentMode {
    #[default]
    Polling,
    HttpService,
    SingleRun,
}

impl FromStr for AgentMode {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.replace('-', "_").as_str() {
            "polling" | "poll" => Ok(AgentMode::Polling),
            "http_service" | "http" => Ok(AgentMode::HttpService),
            "single_run" | "single" | "once" => Ok(AgentMode::SingleRun),
            other => Err(ConfigError::Invalid(format!("unknown mode `{other}`"))),
        }
    }
}

/// How the agent reaches the forum tools.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ToolsConfig {
    /// Tool-server executable; defaults to this binary.
    pub command: Option<String>,
    pub args: Vec<String>,
    /// Run the tool server inside the agent process instead of spawning.
    pub in_process: bool,
}

impl Default for ToolsConfig {
    fn default() -> Self {
        ToolsConfig {
            command: None,
            args: vec!["mcp-server".into()],
            in_process: false,
        }
    }
}

/// Empty fields are filled from the shared config or defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForumLogin {
    pub base_url: String,
    pub username: String,
    pub password: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PlannerKind {
    #[default]
    Scripted,
    /// Ask the configured chat provider for each step.
    Provider,
}

fn default_poll() -> f64 {
    30.0
}

fn default_summary_prompt() -> String {
    DEFAULT_SUMMARY_PROMPT.to_string()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentConfig {
    pub agent_id: String,
    pub agent_type: RobotKind,
    pub mention_pattern: String,
    pub board_id: u64,
    #[serde(default = "default_poll")]
    pub poll_interval_secs: f64,
    #[serde(default)]
    pub mode: AgentMode,
    #[serde(default)]
    pub llm: LlmConfig,
    #[serde(default)]
    pub processed_set_path: Option<PathBuf>,
    #[serde(default)]
    pub forum: ForumLogin,
    #[serde(default)]
    pub tools: ToolsConfig,
    /// Listen address in http_service mode.
    #[serde(default)]
    pub http_bind: Option<String>,
    #[serde(default)]
    pub blob_dir: Option<PathBuf>,
    /// Wall seconds per simulated second; 0 executes instantly.
    #[serde(default)]
    pub realtime_scale: f64,
    #[serde(default = "default_summary_prompt")]
    pub summary_prompt: String,
    /// Safety policy file, hot-reloaded. Absent means the default policy.
    #[serde(default)]
    pub safety_policy_path: Option<PathBuf>,
    #[serde(default = "yes")]
    pub safety_enabled: bool,
    #[serde(default)]
    pub planner: PlannerKind,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot parse config: {0}")]
    Parse(String),
    #[error("invalid config: {0}")]
    Invalid(String),
}

impl AgentConfig {
    pub fn new(
        agent_id: &str,
        agent_type: RobotKind,
        mention_pattern: &str,
        board_id: u64,
    ) -> Self {
        AgentConfig {
            agent_id: agent_id.into(),
            agent_type,
            mention_pattern: mention_pattern.into(),
            board_id,
            poll_interval_secs: default_poll(),
            mode: AgentMode::default(),
            llm: LlmConfig::default(),
            processed_set_path: None,
            forum: ForumLogin::default(),
            tools: ToolsConfig::default(),
            http_bind: None,
            blob_dir: None,
            realtime_scale: 0.0,
            summary_prompt: default_summary_prompt(),
            safety_policy_path: None,
            safety_enabled: true,
            planner: PlannerKind::default(),
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.agent_id.trim().is_empty() {
            return Err(ConfigError::Invalid("agent_id is empty".into()));
        }
        if !(self.poll_interval_secs > 0.0) || !self.poll_interval_secs.is_finite() {
            return Err(ConfigError::Invalid(
                "poll_interval_secs must be positive".into(),
            ));
        }
        if self.mention_pattern.len() < 2 || !self.mention_pattern.starts_with('@') {
            return Err(ConfigError::Invalid(
                "mention_pattern must start with @ and name an agent".into(),
            ));
        }
        if self.realtime_scale < 0.0 {
            return Err(ConfigError::Invalid(
                "realtime_scale must be non-negative".into(),
            ));
        }
        Ok(())
    }

    /// TOML, or JSON when the path ends in `.json`.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let cfg: AgentConfig = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text).map_err(|e| ConfigError::Parse(e.to_string()))?
        } else {
            toml::from_str(&text).map_err(|e| ConfigError::Parse(e.to_string()))?
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn robot_description(&self) -> &'static str {
        match self.agent_type {
            RobotKind::Go2 => "quadruped robot dog",
            RobotKind::G1 => "humanoid robot",
        }
    }
}
