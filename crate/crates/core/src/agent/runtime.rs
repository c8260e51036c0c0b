use std::path::PathBuf;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use chrono::{DateTime, Utc};
use serde::Serialize;
use thiserror::Error;
use tokio::sync::mpsc::UnboundedSender;
use tokio_util::sync::CancellationToken;
use tracing::{debug, info, warn};

use super::config::{AgentConfig, ConfigError, PlannerKind};
use super::extract::{extract_command, mentions_me, summarize_result};
use super::llm::LlmProvider;
use super::processed::ProcessedSet;
use crate::forum::{PostView, TopicView};
use crate::mcp::server::ServerSettings;
use crate::mcp::{
    ClientOptions, ForumTools, LocalTransport, McpClient, McpError, ToolFailure, ToolServer,
    ToolTransport,
};
use crate::meta::{self, AgentStatus};
use crate::robot::{
    vlm_loop_with, BlobStore, ExecutionResult, LoopOptions, Planner, ProviderPlanner,
    RobotRegistry, RobotSim, RobotState, ScriptedPlanner,
};
use crate::safety::{SafetyGuard, SafetyPolicy};

#[derive(Debug, Error)]
pub enum SetupError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("cannot start tool server: {0}")]
    Tools(#[from] McpError),
    #[error("processed set: {0}")]
    Processed(std::io::Error),
    #[error("provider: {0}")]
    Provider(#[from] super::llm::LlmError),
    #[error("safety policy: {0}")]
    Safety(#[from] crate::safety::PolicyError),
}

/// Observable milestones, mainly for tests and the scenario runner.
#[derive(Debug, Clone, PartialEq)]
pub enum AgentEvent {
    Detected {
        topic_id: u64,
        at: DateTime<Utc>,
    },
    Executed {
        topic_id: u64,
        success: bool,
    },
    Denied {
        topic_id: u64,
        reason: String,
    },
    Replied {
        topic_id: u64,
        post_id: u64,
        status: AgentStatus,
    },
    ReplyFailed {
        topic_id: u64,
        error: String,
    },
    NoCommand {
        topic_id: u64,
    },
    Scanned {
        started: DateTime<Utc>,
        finished: DateTime<Utc>,
        handled: usize,
    },
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ScanReport {
    pub handled: usize,
    pub executions: usize,
    pub replies: usize,
    pub errors: Vec<String>,
}

#[derive(Debug, Clone, Default)]
struct Counters {
    processed_count: usize,
    last_scan_at: Option<DateTime<Utc>>,
    executions: u64,
    replies: u64,
    scanning: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct AgentStatusView {
    pub agent_id: String,
    pub agent_type: String,
    pub processed_count: usize,
    pub last_scan_at: Option<DateTime<Utc>>,
    pub robot_state: Option<RobotState>,
    pub executions: u64,
    pub replies: u64,
    pub scanning: bool,
}

/// Status readable while a scan holds the agent.
#[derive(Clone)]
pub struct StatusHandle {
    agent_id: String,
    agent_type: String,
    registry: RobotRegistry,
    counters: Arc<Mutex<Counters>>,
}

impl StatusHandle {
    pub fn view(&self) -> AgentStatusView {
        let c = self.counters.lock().unwrap().clone();
        AgentStatusView {
            agent_id: self.agent_id.clone(),
            agent_type: self.agent_type.clone(),
            processed_count: c.processed_count,
            last_scan_at: c.last_scan_at,
            robot_state: self.registry.snapshot(&self.agent_id),
            executions: c.executions,
            replies: c.replies,
            scanning: c.scanning,
        }
    }
}

pub struct Agent {
    config: AgentConfig,
    tools: ForumTools,
    provider: Arc<dyn LlmProvider>,
    planner: Box<dyn Planner>,
    registry: RobotRegistry,
    safety: Option<Arc<SafetyGuard>>,
    processed: ProcessedSet,
    events: Option<UnboundedSender<AgentEvent>>,
    status: StatusHandle,
}

pub const DEFAULT_FORUM_URL: &str = "http://127.0.0.1:8080";

fn default_blob_dir() -> PathBuf {
    std::env::temp_dir().join("forumbot-blobs")
}

impl Agent {
    /// Builds an agent over an existing tool transport.
    pub fn new(
        config: AgentConfig,
        transport: Arc<dyn ToolTransport>,
    ) -> Result<Agent, SetupError> {
        config.validate()?;
        let provider = config.llm.build()?;
        let planner: Box<dyn Planner> = match config.planner {
            PlannerKind::Scripted => Box::new(ScriptedPlanner::new()),
            PlannerKind::Provider => Box::new(ProviderPlanner::new(provider.clone())),
        };
        let processed = match &config.processed_set_path {
            Some(p) => ProcessedSet::open(p).map_err(SetupError::Processed)?,
            None => ProcessedSet::in_memory(),
        };
        let safety = if !config.safety_enabled {
            None
        } else {
            Some(Arc::new(match &config.safety_policy_path {
                Some(p) => SafetyGuard::from_file(p)?,
                None => SafetyGuard::new(SafetyPolicy::default()),
            }))
        };
        let registry = RobotRegistry::new();
        let blobs = BlobStore::new(config.blob_dir.clone().unwrap_or_else(default_blob_dir));
        registry.register(
            &config.agent_id,
            RobotSim::new(config.agent_type).with_blob_store(blobs),
        );
        let status = StatusHandle {
            agent_id: config.agent_id.clone(),
            agent_type: config.agent_type.to_string(),
            registry: registry.clone(),
            counters: Arc::new(Mutex::new(Counters {
                processed_count: processed.len(),
                ..Default::default()
            })),
        };
        Ok(Agent {
            config,
            tools: ForumTools::new(transport),
            provider,
            planner,
            registry,
            safety,
            processed,
            events: None,
            status,
        })
    }

    /// Starts the tool server (spawned, or in-process when configured)
    /// and builds the agent on it.
    pub async fn connect(config: AgentConfig) -> Result<Agent, SetupError> {
        config.validate()?;
        let settings = ServerSettings {
            forum_base_url: Some(config.forum.base_url.clone())
                .filter(|u| !u.is_empty())
                .unwrap_or_else(|| DEFAULT_FORUM_URL.into()),
            username: Some(config.forum.username.clone()).filter(|u| !u.is_empty()),
            password: Some(config.forum.password.clone()).filter(|p| !p.is_empty()),
            agent_type: config.agent_type.to_string(),
            agent_id: config.agent_id.clone(),
            admin_credential: None,
        };
        let transport: Arc<dyn ToolTransport> = if config.tools.in_process {
            Arc::new(LocalTransport::new(ToolServer::new(settings)))
        } else {
            let program = match &config.tools.command {
                Some(c) => c.clone(),
                None => std::env::current_exe()
                    .map_err(|e| McpError::SpawnFailed(e.to_string()))?
                    .to_string_lossy()
                    .into_owned(),
            };
            let env = [
                ("FORUM_BASE_URL", settings.forum_base_url),
                ("FORUM_USERNAME", settings.username.unwrap_or_default()),
                ("FORUM_PASSWORD", settings.password.unwrap_or_default()),
                ("AGENT_TYPE", settings.agent_type),
                ("AGENT_ID", settings.agent_id),
            ];
            Arc::new(
                McpClient::spawn_and_initialize(
                    &program,
                    &config.tools.args,
                    env,
                    ClientOptions::default(),
                )
                .await?,
            )
        };
        Agent::new(config, transport)
    }

    pub fn with_provider(mut self, provider: Arc<dyn LlmProvider>) -> Self {
        if self.config.planner == PlannerKind::Provider {
            self.planner = Box::new(ProviderPlanner::new(provider.clone()));
        }
        self.provider = provider;
        self
    }

    pub fn with_planner(mut self, planner: Box<dyn Planner>) -> Self {
        self.planner = planner;
        self
    }

    pub fn with_safety(mut self, safety: Option<Arc<SafetyGuard>>) -> Self {
        self.safety = safety;
        self
    }

    pub fn with_events(mut self, tx: UnboundedSender<AgentEvent>) -> Self {
        self.events = Some(tx);
        self
    }

    pub fn config(&self) -> &AgentConfig {
        &self.config
    }

    pub fn tools(&self) -> &ForumTools {
        &self.tools
    }

    pub fn processed(&self) -> &ProcessedSet {
        &self.processed
    }

    pub fn registry(&self) -> &RobotRegistry {
        &self.registry
    }

    pub fn status_handle(&self) -> StatusHandle {
        self.status.clone()
    }

    /// Latest robot state.
    pub fn robot_state(&self) -> RobotState {
        self.registry
            .snapshot(&self.config.agent_id)
            .expect("agent robot registered")
    }

    fn emit(&self, e: AgentEvent) {
        if let Some(tx) = &self.events {
            let _ = tx.send(e);
        }
    }

    pub async fn scan_once(&mut self) -> Result<ScanReport, ToolFailure> {
        self.scan(None).await
    }

    /// One pass over page 1 of the board, oldest topic first. Checks
    /// `stop` between topics.
    async fn scan(&mut self, stop: Option<&CancellationToken>) -> Result<ScanReport, ToolFailure> {
        self.status.counters.lock().unwrap().scanning = true;
        let started = Utc::now();
        let result = self.scan_inner(stop).await;
        let finished = Utc::now();
        {
            let mut c = self.status.counters.lock().unwrap();
            c.scanning = false;
            c.last_scan_at = Some(finished);
            c.processed_count = self.processed.len();
        }
        if let Ok(r) = &result {
            self.emit(AgentEvent::Scanned {
                started,
                finished,
                handled: r.handled,
            });
        }
        result
    }

    async fn scan_inner(
        &mut self,
        stop: Option<&CancellationToken>,
    ) -> Result<ScanReport, ToolFailure> {
        let page = self.tools.list_posts(self.config.board_id, 1).await?;
        let mut report = ScanReport::default();
        for topic in page.items.iter().rev() {
            if stop.is_some_and(|s| s.is_cancelled()) {
                break;
            }
            if self.processed.contains(topic.id) {
                continue;
            }
            if let Err(e) = self.handle_topic(topic, &mut report).await {
                warn!(topic = topic.id, error = %e, "topic failed");
                report.errors.push(format!("topic {}: {e}", topic.id));
            }
        }
        Ok(report)
    }

    async fn first_post(&self, topic: &TopicView) -> Result<Option<PostView>, ToolFailure> {
        if let Some(p) = &topic.first_post {
            return Ok(Some(p.clone()));
        }
        Ok(self
            .tools
            .get_topic(topic.id)
            .await?
            .posts
            .into_iter()
            .next())
    }

    async fn handle_topic(
        &mut self,
        topic: &TopicView,
        report: &mut ScanReport,
    ) -> Result<(), ToolFailure> {
        let Some(post) = self.first_post(topic).await? else {
            return Ok(());
        };
        let is_agent = post.agent_meta.is_some() || meta::parse(&post.content).is_some();
        if !mentions_me(
            &topic.title,
            &post.content,
            &self.config.mention_pattern,
            is_agent,
        ) {
            return Ok(());
        }
        self.emit(AgentEvent::Detected {
            topic_id: topic.id,
            at: Utc::now(),
        });
        match self.processed.insert(topic.id) {
            Ok(_) => {}
            Err(e) => {
                // without a durable mark the topic could run twice after a restart
                warn!(topic = topic.id, error = %e, "cannot persist processed id, skipping topic");
                return Ok(());
            }
        }
        report.handled += 1;
        self.status.counters.lock().unwrap().processed_count = self.processed.len();
        info!(topic = topic.id, title = %topic.title, "command topic detected");

        let content =
            if post.content.contains(&self.config.mention_pattern) || topic.title.is_empty() {
                post.content.clone()
            } else {
                format!("{}\n{}", topic.title, post.content)
            };
        let extraction = extract_command(
            self.provider.as_ref(),
            &content,
            &self.config.mention_pattern,
            self.config.robot_description(),
        )
        .await;
        let Some(command) = extraction.command else {
            debug!(topic = topic.id, "no command for this agent");
            self.emit(AgentEvent::NoCommand { topic_id: topic.id });
            return Ok(());
        };

        if let Some(guard) = &self.safety {
            let verdict = guard.evaluate(
                &command,
                post.author_id,
                post.author_role,
                self.config.agent_type.as_str(),
                Utc::now(),
            );
            if !verdict.allow {
                info!(topic = topic.id, reason = %verdict.reason_code, "command denied");
                self.emit(AgentEvent::Denied {
                    topic_id: topic.id,
                    reason: verdict.reason_code.to_string(),
                });
                let text = format!(
                    "Command rejected by safety guard ({}): {}\n\nCommand: {command}",
                    verdict.reason_code, verdict.detail
                );
                self.reply(topic.id, &text, AgentStatus::Failure, report)
                    .await;
                return Ok(());
            }
        }

        let result = self.execute(&command).await;
        report.executions += 1;
        self.status.counters.lock().unwrap().executions += 1;
        self.emit(AgentEvent::Executed {
            topic_id: topic.id,
            success: result.success,
        });
        let summary = summarize_result(
            self.provider.as_ref(),
            &self.config.summary_prompt,
            &command,
            &result,
        )
        .await;
        let status = if result.success {
            AgentStatus::Success
        } else {
            AgentStatus::Failure
        };
        self.reply(topic.id, &summary, status, report).await;
        Ok(())
    }

    async fn execute(&mut self, command: &str) -> ExecutionResult {
        let mut lease = match self.registry.lease(&self.config.agent_id) {
            Ok(l) => l,
            Err(e) => {
                return ExecutionResult::failure(format!("command: {command}\n"), e.to_string())
            }
        };
        let opts = LoopOptions {
            realtime_scale: self.config.realtime_scale,
        };
        vlm_loop_with(command, self.planner.as_mut(), &mut lease, opts).await
    }

    /// Failures are logged and not retried.
    async fn reply(&self, topic_id: u64, text: &str, status: AgentStatus, report: &mut ScanReport) {
        match self.tools.reply_to_topic(topic_id, text, status).await {
            Ok(post) => {
                report.replies += 1;
                self.status.counters.lock().unwrap().replies += 1;
                self.emit(AgentEvent::Replied {
                    topic_id,
                    post_id: post.id,
                    status,
                });
            }
            Err(e) => {
                warn!(topic = topic_id, error = %e, "reply failed");
                report.errors.push(format!("reply to {topic_id}: {e}"));
                self.emit(AgentEvent::ReplyFailed {
                    topic_id,
                    error: e.to_string(),
                });
            }
        }
    }

    /// Scan, sleep, repeat until `stop` fires. A topic in progress is
    /// finished before returning.
    pub async fn run_loop(&mut self, stop: CancellationToken) {
        let interval = Duration::from_secs_f64(self.config.poll_interval_secs);
        while !stop.is_cancelled() {
            match self.scan(Some(&stop)).await {
                Ok(r) if r.handled > 0 => {
                    info!(handled = r.handled, replies = r.replies, "scan complete")
                }
                Ok(_) => debug!("scan complete, nothing new"),
                Err(e) => warn!(error = %e, "scan failed, retrying next poll"),
            }
            tokio::select! {
                _ = stop.cancelled() => break,
                _ = tokio::time::sleep(interval) => {}
            }
        }
    }

    pub async fn close(&self) {
        self.tools.close().await;
    }
}
