//! Scripted end-to-end runs: post as users, then wait for agent replies.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::process::Stdio;
use std::time::{Duration, Instant};

use regex::Regex;
use serde::{Deserialize, Serialize};
use tokio::process::{Child, Command};
use tracing::{info, warn};

use super::config::ForumbotConfig;
use super::seed::{fixture_accounts, seed};
use crate::agent::ConfigError;
use crate::client::ForumClient;
use crate::forum::PostView;

/// Extra wall time per expectation on top of the poll budget.
pub const EXPECT_SLACK: Duration = Duration::from_secs(2);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BoardRef {
    Id(u64),
    Name(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PostStep {
    pub label: String,
    pub post_as: String,
    pub board: BoardRef,
    pub title: String,
    pub content: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpectStep {
    pub topic: String,
    pub reply_matching: String,
    pub within_polls: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Step {
    Post(PostStep),
    Expect(ExpectStep),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct Scenario {
    pub name: String,
    /// Start the forum and every configured agent as child processes.
    pub auto_spawn: bool,
    /// Seed fixtures first; defaults to `auto_spawn`.
    pub seed: Option<bool>,
    /// Passwords by username; fixture accounts need no entry.
    pub credentials: BTreeMap<String, String>,
    /// Overrides the agents' poll interval when converting `within_polls`.
    pub poll_interval_secs: Option<f64>,
    pub steps: Vec<Step>,
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let s: Scenario = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let mut labels: Vec<&str> = Vec::new();
        for (i, step) in self.steps.iter().enumerate() {
            match step {
                Step::Post(p) => {
                    if labels.contains(&p.label.as_str()) {
                        return Err(ConfigError::Invalid(format!(
                            "step {i}: duplicate label `{}`",
                            p.label
                        )));
                    }
                    labels.push(&p.label);
                }
                Step::Expect(e) => {
                    if !labels.contains(&e.topic.as_str()) {
                        return Err(ConfigError::Invalid(format!(
                            "step {i}: expect refers to `{}`, which no earlier post defines",
                            e.topic
                        )));
                    }
                    Regex::new(&e.reply_matching).map_err(|err| {
                        ConfigError::Invalid(format!("step {i}: bad pattern: {err}"))
                    })?;
                    if e.within_polls == 0 {
                        return Err(ConfigError::Invalid(format!(
                            "step {i}: within_polls must be at least 1"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ThreadPost {
    pub author: String,
    pub content: String,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct StepReport {
    pub index: usize,
    pub kind: String,
    pub label: String,
    pub passed: bool,
    pub detail: String,
    pub elapsed_ms: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thread: Option<Vec<ThreadPost>>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ScenarioReport {
    pub name: String,
    pub passed: bool,
    pub steps: Vec<StepReport>,
    pub duration_ms: u64,
}

impl ScenarioReport {
    pub fn summary_lines(&self) -> Vec<String> {
        let mut out = vec![format!(
            "scenario {}: {} ({} ms)",
            if self.name.is_empty() {
                "<unnamed>"
            } else {
                &self.name
            },
            if self.passed { "PASS" } else { "FAIL" },
            self.duration_ms
        )];
        for s in &self.steps {
            out.push(format!(
                "  [{}] {} {}: {} {}",
                s.index,
                s.kind,
                s.label,
                if s.passed { "ok" } else { "FAILED" },
                s.detail
            ));
            if let Some(thread) = &s.thread {
                for p in thread {
                    out.push(format!(
                        "      {}: {}",
                        p.author,
                        p.content.replace('\n', " / ")
                    ));
                }
            }
        }
        out
    }
}

fn poll_interval(scenario: &Scenario, cfg: &ForumbotConfig) -> Duration {
    let secs = scenario.poll_interval_secs.unwrap_or_else(|| {
        cfg.agents
            .iter()
            .map(|a| a.poll_interval_secs)
            .fold(None, |m: Option<f64>, p| Some(m.map_or(p, |m| m.max(p))))
            .unwrap_or(30.0)
    });
    Duration::from_secs_f64(secs)
}

fn thread_of(posts: &[PostView]) -> Vec<ThreadPost> {
    posts
        .iter()
        .map(|p| ThreadPost {
            author: p.author.clone(),
            content: p.content.clone(),
        })
        .collect()
}

/// Runs the steps against a forum that is already up.
pub async fn run_steps(
    scenario: &Scenario,
    cfg: &ForumbotConfig,
    base_url: &str,
) -> ScenarioReport {
    let started = Instant::now();
    let poll = poll_interval(scenario, cfg);
    let mut passwords: HashMap<String, String> = fixture_accounts(cfg)
        .into_iter()
        .map(|(u, p, _)| (u, p))
        .collect();
    passwords.extend(scenario.credentials.clone());

    let mut client = ForumClient::new(base_url);
    let mut topics: HashMap<String, u64> = HashMap::new();
    let mut steps = Vec::new();
    let mut failed = false;

    for (index, step) in scenario.steps.iter().enumerate() {
        let t0 = Instant::now();
        let mut report = match step {
            Step::Post(p) => {
                let (passed, detail) = match post(&mut client, &passwords, p).await {
                    Ok(tid) => {
                        topics.insert(p.label.clone(), tid);
                        (true, format!("topic {tid}"))
                    }
                    Err(e) => (false, e),
                };
                StepReport {
                    index,
                    kind: "post".into(),
                    label: p.label.clone(),
                    passed,
                    detail,
                    elapsed_ms: 0,
                    thread: None,
                }
            }
            Step::Expect(e) => expect(&client, &topics, e, poll).await,
        };
        report.index = index;
        report.elapsed_ms = t0.elapsed().as_millis() as u64;
        let ok = report.passed;
        steps.push(report);
        if !ok {
            failed = true;
            break;
        }
    }
    client.logout().await;
    ScenarioReport {
        name: scenario.name.clone(),
        passed: !failed,
        steps,
        duration_ms: started.elapsed().as_millis() as u64,
    }
}

async fn post(
    client: &mut ForumClient,
    passwords: &HashMap<String, String>,
    p: &PostStep,
) -> Result<u64, String> {
    let password = passwords
        .get(&p.post_as)
        .ok_or_else(|| format!("no credentials for `{}`", p.post_as))?;
    if client.active_identity() != Some(p.post_as.as_str()) {
        client
            .switch_identity(&p.post_as, password)
            .await
            .map_err(|e| format!("login as {} failed: {e}", p.post_as))?;
    }
    let board_id = match &p.board {
        BoardRef::Id(id) => *id,
        BoardRef::Name(name) => {
            let boards = client.list_boards(1).await.map_err(|e| e.to_string())?;
            boards
                .items
                .iter()
                .find(|b| &b.name == name)
                .map(|b| b.id)
                .ok_or_else(|| format!("no board named `{name}`"))?
        }
    };
    let topic = client
        .create_topic(board_id, &p.title, &p.content)
        .await
        .map_err(|e| format!("post failed: {e}"))?;
    Ok(topic.id)
}

async fn expect(
    client: &ForumClient,
    topics: &HashMap<String, u64>,
    e: &ExpectStep,
    poll: Duration,
) -> StepReport {
    let tid = topics[&e.topic];
    let re = Regex::new(&e.reply_matching).expect("validated pattern");
    let deadline = Instant::now() + poll * e.within_polls + EXPECT_SLACK;
    let mut last: Option<Vec<PostView>> = None;
    loop {
        match client.get_topic(tid).await {
            Ok(detail) => {
                let hit = detail
                    .posts
                    .iter()
                    .skip(1)
                    .find(|p| p.agent_meta.is_some() && re.is_match(&p.content));
                if let Some(p) = hit {
                    return StepReport {
                        index: 0,
                        kind: "expect".into(),
                        label: e.topic.clone(),
                        passed: true,
                        detail: format!(
                            "reply {} by {} matched /{}/",
                            p.id, p.author, e.reply_matching
                        ),
                        elapsed_ms: 0,
                        thread: None,
                    };
                }
                last = Some(detail.posts);
            }
            Err(err) => warn!(error = %err, "reading topic {tid} failed"),
        }
        if Instant::now() >= deadline {
            break;
        }
        tokio::time::sleep(Duration::from_millis(100)).await;
    }
    StepReport {
        index: 0,
        kind: "expect".into(),
        label: e.topic.clone(),
        passed: false,
        detail: format!(
            "no agent reply matching /{}/ within {} polls ({:.1}s)",
            e.reply_matching,
            e.within_polls,
            (poll * e.within_polls + EXPECT_SLACK).as_secs_f64()
        ),
        elapsed_ms: 0,
        thread: Some(last.as_deref().map(thread_of).unwrap_or_default()),
    }
}

/// Child processes killed and reaped on drop.
pub struct Spawned {
    children: Vec<(String, Child)>,
}

impl Spawned {
    pub fn pids(&self) -> Vec<u32> {
        self.children.iter().filter_map(|(_, c)| c.id()).collect()
    }

    pub async fn reap(mut self) {
        for (name, child) in &mut self.children {
            let _ = child.start_kill();
            match tokio::time::timeout(Duration::from_secs(5), child.wait()).await {
                Ok(Ok(status)) => info!(%name, %status, "child exited"),
                _ => warn!(%name, "child did not exit"),
            }
        }
        self.children.clear();
    }
}

impl Drop for Spawned {
    fn drop(&mut self) {
        for (_, child) in &mut self.children {
            let _ = child.start_kill();
        }
    }
}

async fn wait_for_forum(base_url: &str, timeout: Duration) -> bool {
    let client = ForumClient::new(base_url);
    let deadline = Instant::now() + timeout;
    while Instant::now() < deadline {
        if client.list_boards(1).await.is_ok() {
            return true;
        }
        tokio::time::sleep(Duration::from_millis(100)).await;
    }
    false
}

fn spawn(exe: &Path, args: &[&str]) -> std::io::Result<Child> {
    Command::new(exe)
        .args(args)
        .stdin(Stdio::null())
        .stdout(Stdio::null())
        .stderr(Stdio::inherit())
        .kill_on_drop(true)
        .spawn()
}

/// Runs a scenario end to end, spawning processes from `exe` when the
/// scenario asks for it. Children are reaped whatever the outcome.
pub async fn execute(
    scenario: &Scenario,
    cfg: &ForumbotConfig,
    exe: &Path,
) -> Result<ScenarioReport, String> {
    let base_url = cfg.server.base_url();
    let mut spawned = Spawned {
        children: Vec::new(),
    };
    if scenario.auto_spawn {
        let cfg_path: PathBuf = cfg
            .path
            .clone()
            .ok_or("auto_spawn needs the config loaded from a file")?;
        let cfg_arg = cfg_path.to_string_lossy().into_owned();
        let forum = spawn(exe, &["serve", "--config", &cfg_arg])
            .map_err(|e| format!("cannot spawn forum: {e}"))?;
        spawned.children.push(("forum".into(), forum));
        if !wait_for_forum(&base_url, Duration::from_secs(10)).await {
            spawned.reap().await;
            return Err(format!("forum at {base_url} did not come up"));
        }
    }
    if scenario.seed.unwrap_or(scenario.auto_spawn) {
        if let Err(e) = seed(cfg, &base_url).await {
            spawned.reap().await;
            return Err(format!("seeding failed: {e}"));
        }
    }
    if scenario.auto_spawn {
        let cfg_arg = cfg
            .path
            .as_ref()
            .expect("checked above")
            .to_string_lossy()
            .into_owned();
        for agent in &cfg.agents {
            match spawn(
                exe,
                &[
                    "agent",
                    "--config",
                    &cfg_arg,
                    "--agent",
                    &agent.agent_id,
                    "--mode",
                    "polling",
                ],
            ) {
                Ok(child) => spawned.children.push((agent.agent_id.clone(), child)),
                Err(e) => {
                    spawned.reap().await;
                    return Err(format!("cannot spawn agent {}: {e}", agent.agent_id));
                }
            }
        }
    }
    let report = run_steps(scenario, cfg, &base_url).await;
    spawned.reap().await;
    Ok(report)
}
