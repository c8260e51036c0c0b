//! Pre-execution command gate: role gating, dangerous phrase rejection,
//! per-account rate limiting and per-robot cooldown.

use std::collections::{HashMap, VecDeque};
use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::{Mutex, RwLock};
use std::time::SystemTime;

use chrono::{DateTime, TimeDelta, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::forum::Role;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateLimit {
    pub max_commands: u32,
    pub window_secs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SafetyPolicy {
    pub deny_patterns: Vec<String>,
    pub rate_limit: RateLimit,
    pub cooldown_secs: f64,
    pub min_role: Role,
}

impl Default for SafetyPolicy {
    fn default() -> Self {
        SafetyPolicy {
            deny_patterns: ["run into", "jump off", "hit ", "crash into", "attack"]
                .map(String::from)
                .to_vec(),
            rate_limit: RateLimit {
                max_commands: 5,
                window_secs: 60.0,
            },
            cooldown_secs: 10.0,
            min_role: Role::Operator,
        }
    }
}

#[derive(Debug, Error)]
pub enum PolicyError {
    #[error("invalid policy: {0}")]
    Invalid(String),
    #[error("cannot read policy file {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot parse policy file: {0}")]
    Parse(#[from] toml::de::Error),
}

impl SafetyPolicy {
    pub fn validate(&self) -> Result<(), PolicyError> {
        if self.rate_limit.max_commands < 1 {
            return Err(PolicyError::Invalid(
                "rate_limit.max_commands must be at least 1".into(),
            ));
        }
        if !(self.rate_limit.window_secs > 0.0) {
            return Err(PolicyError::Invalid(
                "rate_limit.window_secs must be positive".into(),
            ));
        }
        if !(self.cooldown_secs >= 0.0) {
            return Err(PolicyError::Invalid(
                "cooldown_secs must be non-negative".into(),
            ));
        }
        Ok(())
    }

    /// Reads a TOML policy, either bare or under a `[safety]` table.
    pub fn from_toml(text: &str) -> Result<Self, PolicyError> {
        let mut table: toml::Table = toml::from_str(text)?;
        let policy: SafetyPolicy = match table.remove("safety") {
            Some(inner) => inner.try_into()?,
            None => toml::Value::Table(table).try_into()?,
        };
        policy.validate()?;
        Ok(policy)
    }

    pub fn load(path: &Path) -> Result<Self, PolicyError> {
        let text = std::fs::read_to_string(path).map_err(|source| PolicyError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text)
    }

    fn window(&self) -> TimeDelta {
        secs(self.rate_limit.window_secs)
    }
}

fn secs(s: f64) -> TimeDelta {
    TimeDelta::nanoseconds((s * 1e9).round() as i64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ReasonCode {
    Ok,
    Dangerous,
    RateLimited,
    Cooldown,
    RoleDenied,
}

impl fmt::Display for ReasonCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ReasonCode::Ok => "OK",
            ReasonCode::Dangerous => "DANGEROUS",
            ReasonCode::RateLimited => "RATE_LIMITED",
            ReasonCode::Cooldown => "COOLDOWN",
            ReasonCode::RoleDenied => "ROLE_DENIED",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SafetyVerdict {
    pub allow: bool,
    pub reason_code: ReasonCode,
    pub detail: String,
}

impl SafetyVerdict {
    pub fn ok() -> Self {
        SafetyVerdict {
            allow: true,
            reason_code: ReasonCode::Ok,
            detail: String::new(),
        }
    }

    pub fn deny(reason_code: ReasonCode, detail: impl Into<String>) -> Self {
        SafetyVerdict {
            allow: false,
            reason_code,
            detail: detail.into(),
        }
    }
}

/// Secondary danger check. May only add denials.
pub trait DangerClassifier: Send + Sync {
    /// `Ok(true)` means dangerous. Errors are ignored.
    fn is_dangerous(&self, command: &str) -> Result<bool, String>;
}

fn fold(text: &str) -> String {
    let lower = text.to_lowercase();
    let mut out = String::with_capacity(lower.len());
    let mut in_space = false;
    for c in lower.chars() {
        if c.is_whitespace() {
            if !in_space {
                out.push(' ');
            }
            in_space = true;
        } else {
            out.push(c);
            in_space = false;
        }
    }
    out
}

pub fn check_dangerous(
    command: &str,
    policy: &SafetyPolicy,
    classifier: Option<&dyn DangerClassifier>,
) -> SafetyVerdict {
    let text = fold(command);
    let text = text.trim_start();
    for pattern in &policy.deny_patterns {
        let p = fold(pattern);
        if !p.trim().is_empty() && text.contains(&p) {
            return SafetyVerdict::deny(
                ReasonCode::Dangerous,
                format!("command matches deny pattern \"{pattern}\""),
            );
        }
    }
    if let Some(Ok(true)) = classifier.map(|c| c.is_dangerous(command)) {
        return SafetyVerdict::deny(ReasonCode::Dangerous, "command flagged by classifier");
    }
    SafetyVerdict::ok()
}

/// Sliding window over (now − window, now].
pub fn check_rate(
    now: DateTime<Utc>,
    policy: &SafetyPolicy,
    history: &[DateTime<Utc>],
) -> SafetyVerdict {
    let mut sorted = history.to_vec();
    sorted.sort_unstable();
    let lo = now - policy.window();
    let start = sorted.partition_point(|t| *t <= lo);
    let end = sorted.partition_point(|t| *t <= now);
    let n = end - start;
    if n >= policy.rate_limit.max_commands as usize {
        SafetyVerdict::deny(
            ReasonCode::RateLimited,
            format!(
                "{n} commands accepted in the last {}s (limit {})",
                policy.rate_limit.window_secs, policy.rate_limit.max_commands
            ),
        )
    } else {
        SafetyVerdict::ok()
    }
}

pub fn check_cooldown(
    now: DateTime<Utc>,
    policy: &SafetyPolicy,
    last: Option<DateTime<Utc>>,
) -> SafetyVerdict {
    match last {
        Some(t) if now - t < secs(policy.cooldown_secs) => {
            let left = (secs(policy.cooldown_secs) - (now - t)).as_seconds_f64();
            SafetyVerdict::deny(
                ReasonCode::Cooldown,
                format!("robot cooling down, {left:.2}s remaining"),
            )
        }
        _ => SafetyVerdict::ok(),
    }
}

#[derive(Default)]
struct Ledger {
    accepted: HashMap<u64, VecDeque<DateTime<Utc>>>,
    last_execution: HashMap<String, DateTime<Utc>>,
}

struct PolicyFile {
    path: PathBuf,
    seen: Mutex<Option<SystemTime>>,
}

/// Stateful gate shared by the agents of one process.
pub struct SafetyGuard {
    policy: RwLock<SafetyPolicy>,
    file: Option<PolicyFile>,
    ledger: Mutex<Ledger>,
    classifier: Option<Box<dyn DangerClassifier>>,
}

impl SafetyGuard {
    pub fn new(policy: SafetyPolicy) -> Self {
        SafetyGuard {
            policy: RwLock::new(policy),
            file: None,
            ledger: Mutex::new(Ledger::default()),
            classifier: None,
        }
    }

    /// Watches `path`; the policy is re-read when its mtime changes.
    pub fn from_file(path: impl Into<PathBuf>) -> Result<Self, PolicyError> {
        let path = path.into();
        let policy = SafetyPolicy::load(&path)?;
        let mtime = mtime(&path);
        let mut guard = SafetyGuard::new(policy);
        guard.file = Some(PolicyFile {
            path,
            seen: Mutex::new(mtime),
        });
        Ok(guard)
    }

    pub fn with_classifier(mut self, classifier: Box<dyn DangerClassifier>) -> Self {
        self.classifier = Some(classifier);
        self
    }

    pub fn policy(&self) -> SafetyPolicy {
        self.policy.read().unwrap().clone()
    }

    pub fn set_policy(&self, policy: SafetyPolicy) {
        *self.policy.write().unwrap() = policy;
    }

    /// Re-reads the policy file. A broken file keeps the old policy.
    pub fn reload(&self) -> Result<bool, PolicyError> {
        let Some(file) = &self.file else {
            return Ok(false);
        };
        let policy = SafetyPolicy::load(&file.path)?;
        *file.seen.lock().unwrap() = mtime(&file.path);
        self.set_policy(policy);
        Ok(true)
    }

    fn reload_if_changed(&self) {
        let Some(file) = &self.file else { return };
        let current = mtime(&file.path);
        let changed = *file.seen.lock().unwrap() != current;
        if changed {
            match self.reload() {
                Ok(_) => tracing::info!(path = %file.path.display(), "safety policy reloaded"),
                Err(e) => {
                    tracing::warn!(error = %e, "keeping previous safety policy");
                    *file.seen.lock().unwrap() = current;
                }
            }
        }
    }

    pub fn check_dangerous(&self, command: &str) -> SafetyVerdict {
        check_dangerous(
            command,
            &self.policy.read().unwrap(),
            self.classifier.as_deref(),
        )
    }

    /// Role, then danger, then rate, then cooldown. An allowed command is
    /// recorded against the account and the robot.
    pub fn evaluate(
        &self,
        command: &str,
        account_id: u64,
        account_role: Role,
        robot: &str,
        now: DateTime<Utc>,
    ) -> SafetyVerdict {
        self.reload_if_changed();
        let policy = self.policy();
        if !account_role.at_least(policy.min_role) {
            return SafetyVerdict::deny(
                ReasonCode::RoleDenied,
                format!("role {account_role} below required {}", policy.min_role),
            );
        }
        let v = check_dangerous(command, &policy, self.classifier.as_deref());
        if !v.allow {
            return v;
        }
        let mut ledger = self.ledger.lock().unwrap();
        let history = ledger.accepted.entry(account_id).or_default();
        let cutoff = now - policy.window();
        while history.front().is_some_and(|t| *t <= cutoff) {
            history.pop_front();
        }
        let v = check_rate(now, &policy, history.make_contiguous());
        if !v.allow {
            return v;
        }
        let v = check_cooldown(now, &policy, ledger.last_execution.get(robot).copied());
        if !v.allow {
            return v;
        }
        let history = ledger.accepted.entry(account_id).or_default();
        let at = history.partition_point(|t| *t <= now);
        history.insert(at, now);
        ledger.last_execution.insert(robot.to_string(), now);
        SafetyVerdict::ok()
    }
}

fn mtime(path: &Path) -> Option<SystemTime> {
    std::fs::metadata(path).and_then(|m| m.modified()).ok()
}
