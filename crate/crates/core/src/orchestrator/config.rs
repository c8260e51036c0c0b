use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::agent::{AgentConfig, ConfigError};
use crate::forum::ForumConfig;
use crate::safety::SafetyPolicy;

pub const CONFIG_ENV: &str = "FORUMBOT_CONFIG";

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ServerConfig {
    pub bind: String,
    /// Write-ahead log; in-memory when absent.
    pub data_path: Option<PathBuf>,
    #[serde(flatten)]
    pub forum: ForumConfig,
}

impl Default for ServerConfig {
    fn default() -> Self {
        ServerConfig {
            bind: "127.0.0.1:8080".into(),
            data_path: None,
            forum: ForumConfig::default(),
        }
    }
}

impl ServerConfig {
    pub fn base_url(&self) -> String {
        format!("http://{}", self.bind)
    }
}

/// Passwords for the demo fixtures.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SeedConfig {
    pub admin_password: String,
    pub operator_password: String,
    pub agent_password: String,
}

impl Default for SeedConfig {
    fn default() -> Self {
        SeedConfig {
            admin_password: "admin-password".into(),
            operator_password: "alice-password".into(),
            agent_password: "agent-password".into(),
        }
    }
}

/// The one config file shared by every subcommand.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct ForumbotConfig {
    pub server: ServerConfig,
    pub agents: Vec<AgentConfig>,
    pub safety: Option<SafetyPolicy>,
    pub seed: SeedConfig,
    #[serde(skip)]
    pub path: Option<PathBuf>,
}

impl ForumbotConfig {
    pub fn from_toml(text: &str, path: Option<&Path>) -> Result<Self, ConfigError> {
        let mut cfg: ForumbotConfig =
            toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.path = path.map(Path::to_path_buf);
        cfg.resolve()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text, Some(path))
    }

    /// `--config`, then `$FORUMBOT_CONFIG`, then built-in defaults.
    pub fn discover(explicit: Option<&Path>) -> Result<Self, ConfigError> {
        match explicit {
            Some(p) => Self::load(p),
            None => match std::env::var_os(CONFIG_ENV) {
                Some(p) => Self::load(Path::new(&p)),
                None => {
                    let mut cfg = ForumbotConfig::default();
                    cfg.resolve()?;
                    Ok(cfg)
                }
            },
        }
    }

    fn resolve(&mut self) -> Result<(), ConfigError> {
        if let Some(p) = &self.safety {
            p.validate()
                .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        }
        let base = self.server.base_url();
        for agent in &mut self.agents {
            if agent.forum.base_url.is_empty() {
                agent.forum.base_url = base.clone();
            }
            if agent.forum.username.is_empty() {
                agent.forum.username = agent.mention_pattern.trim_start_matches('@').to_string();
            }
            if agent.forum.password.is_empty() {
                agent.forum.password = self.seed.agent_password.clone();
            }
            if agent.safety_policy_path.is_none() && self.safety.is_some() {
                // the [safety] table of this very file, hot-reloaded
                agent.safety_policy_path = self.path.clone();
            }
            agent.validate()?;
        }
        let mut ids: Vec<&str> = self.agents.iter().map(|a| a.agent_id.as_str()).collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(ConfigError::Invalid("duplicate agent_id".into()));
        }
        Ok(())
    }

    pub fn agent(&self, id: Option<&str>) -> Result<&AgentConfig, ConfigError> {
        match id {
            Some(id) => self
                .agents
                .iter()
                .find(|a| a.agent_id == id)
                .ok_or_else(|| ConfigError::Invalid(format!("no agent `{id}` in config"))),
            None => match self.agents.as_slice() {
                [only] => Ok(only),
                [] => Err(ConfigError::Invalid("config has no [[agents]]".into())),
                _ => Err(ConfigError::Invalid(
                    "several agents configured, pick one with --agent".into(),
                )),
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
        [server]
        bind = "127.0.0.1:9999"
        admin_token = "secret"

        [safety]
        deny_patterns = ["run into"]

        [[agents]]
        agent_id = "go2"
        agent_type = "go2"
        mention_pattern = "@quadruped"
        board_id = 2
        poll_interval_secs = 1

        [[agents]]
        agent_id = "g1"
        agent_type = "g1"
        mention_pattern = "@humanoid"
        board_id = 2
        [agents.forum]
        username = "hum"
        password = "pw"
    "#;

    #[test]
    fn agents_inherit_shared_settings() {
        let cfg = ForumbotConfig::from_toml(SAMPLE, Some(Path::new("/etc/fb.toml"))).unwrap();
        assert_eq!(cfg.server.forum.admin_token.as_deref(), Some("secret"));
        let go2 = cfg.agent(Some("go2")).unwrap();
        assert_eq!(go2.forum.base_url, "http://127.0.0.1:9999");
        assert_eq!(go2.forum.username, "quadruped");
        assert_eq!(go2.forum.password, "agent-password");
        assert_eq!(
            go2.safety_policy_path.as_deref(),
            Some(Path::new("/etc/fb.toml"))
        );
        assert_eq!(go2.poll_interval_secs, 1.0);
        assert_eq!(cfg.agent(Some("g1")).unwrap().forum.username, "hum");
        assert!(cfg.agent(None).is_err());
        assert_eq!(
            SafetyPolicy::from_toml(SAMPLE).unwrap().deny_patterns,
            ["run into"]
        );
    }

    #[test]
    fn rejects_bad_agents() {
        let bad = SAMPLE.replace("\"@humanoid\"", "\"humanoid\"");
        assert!(ForumbotConfig::from_toml(&bad, None).is_err());
        let dup = SAMPLE.replace("agent_id = \"g1\"", "agent_id = \"go2\"");
        assert!(ForumbotConfig::from_toml(&dup, None).is_err());
    }

    #[test]
    fn defaults() {
        let cfg = ForumbotConfig::from_toml("", None).unwrap();
        assert_eq!(cfg.server.bind, "127.0.0.1:8080");
        assert!(cfg.agents.is_empty());
    }
}
