#![allow(dead_code)]

use std::sync::Arc;

use forumbot::agent::{Agent, AgentConfig, ScriptedProvider};
use forumbot::client::ForumClient;
use forumbot::forum::http::ForumServerHandle;
use forumbot::forum::{BoardPolicy, ForumConfig, ForumService, Role};
use forumbot::robot::RobotKind;

pub const ADMIN_TOKEN: &str = "test-admin";
pub const AGENT_PASSWORD: &str = "agent-password";

/// In-process forum on an ephemeral port with the usual accounts:
/// alice (operator), bob (member), quadruped and humanoid (operator).
pub struct Fixture {
    pub server: ForumServerHandle,
    pub forum: Arc<ForumService>,
    pub general: u64,
    pub commands: u64,
}

impl Fixture {
    pub async fn start() -> Fixture {
        let forum = Arc::new(ForumService::in_memory(ForumConfig {
            admin_token: Some(ADMIN_TOKEN.into()),
            ..ForumConfig::default()
        }));
        let admin = Some(ADMIN_TOKEN);
        for (user, pw, role) in [
            ("alice", "alice-password", Role::Operator),
            ("carol", "carol-password", Role::Operator),
            ("bob", "bob-password", Role::Member),
            ("quadruped", AGENT_PASSWORD, Role::Operator),
            ("humanoid", AGENT_PASSWORD, Role::Operator),
        ] {
            forum.register(user, pw, Some(role), admin).unwrap();
        }
        let general = forum
            .create_board(admin, "General", "", BoardPolicy::Open)
            .unwrap()
            .id;
        let commands = forum
            .create_board(admin, "Robot Commands", "", BoardPolicy::OperatorOnly)
            .unwrap()
            .id;
        let server = ForumServerHandle::start(forum.clone(), "127.0.0.1:0".parse().unwrap())
            .await
            .unwrap();
        Fixture {
            server,
            forum,
            general,
            commands,
        }
    }

    pub fn url(&self) -> String {
        self.server.base_url()
    }

    pub async fn client_as(&self, user: &str) -> ForumClient {
        let mut c = ForumClient::new(&self.url());
        c.authenticate(user, &format!("{user}-password"))
            .await
            .unwrap();
        c
    }

    /// Posts a new topic on the command board as `user`; returns its id.
    pub async fn post(&self, user: &str, title: &str, content: &str) -> u64 {
        let mut c = self.client_as(user).await;
        c.create_topic(self.commands, title, content)
            .await
            .unwrap()
            .id
    }

    pub fn agent_config(&self, id: &str, kind: RobotKind) -> AgentConfig {
        let mention = match kind {
            RobotKind::Go2 => "@quadruped",
            RobotKind::G1 => "@humanoid",
        };
        let mut cfg = AgentConfig::new(id, kind, mention, self.commands);
        cfg.poll_interval_secs = 1.0;
        cfg.forum.base_url = self.url();
        cfg.forum.username = mention.trim_start_matches('@').into();
        cfg.forum.password = AGENT_PASSWORD.into();
        cfg.tools.in_process = true;
        cfg.blob_dir = Some(std::env::temp_dir().join("forumbot-test-blobs"));
        cfg
    }

    pub async fn agent(&self, id: &str, kind: RobotKind) -> Agent {
        Agent::connect(self.agent_config(id, kind)).await.unwrap()
    }

    /// An agent whose provider always extracts `command`.
    pub async fn scripted_agent(&self, id: &str, kind: RobotKind, command: &str) -> Agent {
        self.agent(id, kind)
            .await
            .with_provider(Arc::new(ScriptedProvider::new(
                Some(command.to_string()),
                None,
            )))
    }
}
