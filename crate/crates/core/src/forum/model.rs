use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::meta::AgentMeta;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Member,
    Operator,
    Moderator,
    Admin,
}

impl Role {
    /// Privilege rank; higher ranks include the lower ones.
    pub fn rank(self) -> u8 {
        match self {
            Role::Member => 0,
            Role::Operator => 1,
            Role::Moderator => 2,
            Role::Admin => 3,
        }
    }

    pub fn at_least(self, other: Role) -> bool {
        self.rank() >= other.rank()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Role::Member => "member",
            Role::Operator => "operator",
            Role::Moderator => "moderator",
            Role::Admin => "admin",
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Role {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "member" => Ok(Role::Member),
            "operator" => Ok(Role::Operator),
            "moderator" => Ok(Role::Moderator),
            "admin" => Ok(Role::Admin),
            other => Err(format!("unknown role `{other}`")),
        }
    }
}

/// Who may write on a board.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoardPolicy {
    #[default]
    Open,
    OperatorOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Account {
    pub id: u64,
    pub username: String,
    pub password_hash: String,
    pub role: Role,
    pub created_at: DateTime<Utc>,
}

/// The account as exposed over the API.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccountView {
    pub id: u64,
    pub username: String,
    pub role: Role,
    pub created_at: DateTime<Utc>,
}

impl From<&Account> for AccountView {
    fn from(a: &Account) -> Self {
        AccountView {
            id: a.id,
            username: a.username.clone(),
            role: a.role,
            created_at: a.created_at,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Board {
    pub id: u64,
    pub name: String,
    pub description: String,
    pub position: u32,
    #[serde(default)]
    pub policy: BoardPolicy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Topic {
    pub id: u64,
    pub board_id: u64,
    pub title: String,
    pub author_id: u64,
    pub created_at: DateTime<Utc>,
    pub reply_count: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Post {
    pub id: u64,
    pub topic_id: u64,
    pub author_id: u64,
    pub content: String,
    pub created_at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub token: String,
    pub account_id: u64,
    pub csrf_token: String,
    pub expires_at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PostView {
    pub id: u64,
    pub topic_id: u64,
    pub author_id: u64,
    pub author: String,
    pub author_role: Role,
    pub content: String,
    pub created_at: DateTime<Utc>,
    pub agent_meta: Option<AgentMeta>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicView {
    pub id: u64,
    pub board_id: u64,
    pub title: String,
    pub author_id: u64,
    pub author: String,
    pub created_at: DateTime<Utc>,
    pub reply_count: u64,
    /// Opening post, included so pollers can filter without a second request.
    pub first_post: Option<PostView>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicDetail {
    pub topic: TopicView,
    pub posts: Vec<PostView>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Page<T> {
    pub items: Vec<T>,
    pub page: u64,
    pub page_size: u64,
    pub total_pages: u64,
    pub total_items: u64,
}

impl<T: Clone> Page<T> {
    /// Slices `all` into 1-based page `page`. Out-of-range pages are empty.
    pub fn slice(all: &[T], page: u64, page_size: u64) -> Page<T> {
        let total = all.len() as u64;
        let total_pages = total.div_ceil(page_size);
        let start = page.saturating_sub(1).saturating_mul(page_size);
        let items = if page == 0 || start >= total {
            Vec::new()
        } else {
            let end = (start + page_size).min(total);
            all[start as usize..end as usize].to_vec()
        };
        Page {
            items,
            page,
            page_size,
            total_pages,
            total_items: total,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoginResponse {
    pub account: AccountView,
    pub csrf_token: String,
    pub expires_at: DateTime<Utc>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pagination_arithmetic() {
        let all: Vec<u32> = (0..25).collect();
        let p2 = Page::slice(&all, 2, 20);
        assert_eq!(p2.items, (20..25).collect::<Vec<_>>());
        assert_eq!(p2.total_pages, 2);
        assert!(Page::slice(&all, 3, 20).items.is_empty());
        let empty: Vec<u32> = vec![];
        let p = Page::slice(&empty, 1, 20);
        assert_eq!((p.items.len(), p.total_pages), (0, 0));
    }

    #[test]
    fn role_order() {
        assert!(Role::Admin.at_least(Role::Operator));
        assert!(!Role::Member.at_least(Role::Operator));
        assert_eq!("operator".parse::<Role>().unwrap(), Role::Operator);
    }
}
