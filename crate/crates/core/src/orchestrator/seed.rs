//! Demo fixtures, created over the REST API so a running server can be
//! seeded. Re-running changes nothing.

use serde::Serialize;

use super::config::ForumbotConfig;
use crate::client::{ClientError, ForumClient, RegistrationMode};
use crate::error::ErrorCode;
use crate::forum::{BoardPolicy, Role};

pub const GENERAL_BOARD: &str = "General";
pub const COMMAND_BOARD: &str = "Robot Commands";

#[derive(Debug, Clone, Serialize, PartialEq, Eq)]
pub struct SeededBoard {
    pub id: u64,
    pub name: String,
    pub created: bool,
}

#[derive(Debug, Clone, Serialize, PartialEq, Eq)]
pub struct SeededAccount {
    pub username: String,
    pub role: Role,
    pub created: bool,
}

#[derive(Debug, Clone, Serialize, PartialEq, Eq)]
pub struct SeedReport {
    pub boards: Vec<SeededBoard>,
    pub accounts: Vec<SeededAccount>,
}

impl SeedReport {
    pub fn board_id(&self, name: &str) -> Option<u64> {
        self.boards.iter().find(|b| b.name == name).map(|b| b.id)
    }
}

pub fn fixture_accounts(cfg: &ForumbotConfig) -> Vec<(String, String, Role)> {
    vec![
        ("admin".into(), cfg.seed.admin_password.clone(), Role::Admin),
        (
            "alice".into(),
            cfg.seed.operator_password.clone(),
            Role::Operator,
        ),
        (
            "quadruped".into(),
            cfg.seed.agent_password.clone(),
            Role::Operator,
        ),
        (
            "humanoid".into(),
            cfg.seed.agent_password.clone(),
            Role::Operator,
        ),
    ]
}

pub async fn seed(cfg: &ForumbotConfig, base_url: &str) -> Result<SeedReport, ClientError> {
    let admin = cfg
        .server
        .forum
        .admin_token
        .as_deref()
        .ok_or_else(|| ClientError {
            code: ErrorCode::ForbiddenRole,
            message: "seeding needs server.admin_token in the config".into(),
            retryable: false,
        })?;
    let client = ForumClient::new(base_url);

    let mut accounts = Vec::new();
    for (username, password, role) in fixture_accounts(cfg) {
        let created = match client
            .register_identity(
                &username,
                &password,
                RegistrationMode::Admin,
                Some(role),
                Some(admin),
            )
            .await
        {
            Ok(_) => true,
            Err(e) if e.code == ErrorCode::DuplicateUsername => false,
            Err(e) => return Err(e),
        };
        accounts.push(SeededAccount {
            username,
            role,
            created,
        });
    }

    let mut existing = Vec::new();
    let mut page = 1;
    loop {
        let p = client.list_boards(page).await?;
        existing.extend(p.items);
        if page >= p.total_pages {
            break;
        }
        page += 1;
    }
    let mut boards = Vec::new();
    for (name, description, policy) in [
        (GENERAL_BOARD, "Open discussion", BoardPolicy::Open),
        (
            COMMAND_BOARD,
            "Commands for robot agents; operators only",
            BoardPolicy::OperatorOnly,
        ),
    ] {
        match existing.iter().find(|b| b.name == name) {
            Some(b) => boards.push(SeededBoard {
                id: b.id,
                name: name.into(),
                created: false,
            }),
            None => {
                let b = client
                    .create_board(admin, name, description, policy)
                    .await?;
                boards.push(SeededBoard {
                    id: b.id,
                    name: name.into(),
                    created: true,
                });
            }
        }
    }
    Ok(SeedReport { boards, accounts })
}
