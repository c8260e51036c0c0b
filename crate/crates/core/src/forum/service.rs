use std::collections::{BTreeMap, HashMap};
use std::path::Path;
use std::sync::{Mutex, RwLock};

use chrono::{DateTime, Duration, Utc};
use rand::RngCore;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::model::*;
use super::permission::{check_permission, Action};
use super::store::{StoreError, Wal, WalRecord};
use super::ForumError;
use crate::error::ErrorCode;
use crate::meta;

pub const MAX_TITLE_CHARS: usize = 200;
const HASH_ROUNDS: u32 = 1000;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ForumConfig {
    pub page_size: u64,
    pub session_ttl_secs: i64,
    /// Shared secret for privileged registration and board management.
    pub admin_token: Option<String>,
}

impl Default for ForumConfig {
    fn default() -> Self {
        ForumConfig {
            page_size: 20,
            session_ttl_secs: 24 * 3600,
            admin_token: None,
        }
    }
}

/// 128 random bits, hex encoded.
pub fn random_token() -> String {
    let mut bytes = [0u8; 16];
    rand::rng().fill_bytes(&mut bytes);
    hex::encode(bytes)
}

fn hash_password(password: &str, salt: &str) -> String {
    let mut digest = Sha256::new()
        .chain_update(salt.as_bytes())
        .chain_update(password.as_bytes())
        .finalize();
    for _ in 1..HASH_ROUNDS {
        digest = Sha256::new()
            .chain_update(digest)
            .chain_update(salt.as_bytes())
            .finalize();
    }
    format!("sha256-i{HASH_ROUNDS}${salt}${}", hex::encode(digest))
}

fn verify_password(password: &str, stored: &str) -> bool {
    let Some(salt) = stored.split('$').nth(1) else {
        return false;
    };
    let computed = hash_password(password, salt);
    computed.len() == stored.len()
        && computed
            .bytes()
            .zip(stored.bytes())
            .fold(0u8, |acc, (a, b)| acc | (a ^ b))
            == 0
}

#[derive(Default)]
struct ForumState {
    accounts: BTreeMap<u64, Account>,
    by_username: HashMap<String, u64>,
    boards: BTreeMap<u64, Board>,
    topics: BTreeMap<u64, Topic>,
    /// board id -> topic ids in creation order
    board_topics: HashMap<u64, Vec<u64>>,
    posts: BTreeMap<u64, Post>,
    /// topic id -> post ids in creation order
    topic_posts: HashMap<u64, Vec<u64>>,
    sessions: HashMap<String, Session>,
    next_account: u64,
    next_board: u64,
    next_topic: u64,
    next_post: u64,
}

impl ForumState {
    fn apply(&mut self, rec: WalRecord) {
        match rec {
            WalRecord::Header { .. } => {}
            WalRecord::Account(a) => {
                self.next_account = self.next_account.max(a.id);
                self.by_username.insert(a.username.clone(), a.id);
                self.accounts.insert(a.id, a);
            }
            WalRecord::Board(b) => {
                self.next_board = self.next_board.max(b.id);
                self.boards.insert(b.id, b);
            }
            WalRecord::Topic(mut t) => {
                self.next_topic = self.next_topic.max(t.id);
                t.reply_count = 0;
                self.board_topics.entry(t.board_id).or_default().push(t.id);
                self.topic_posts.entry(t.id).or_default();
                self.topics.insert(t.id, t);
            }
            WalRecord::Post(p) => {
                self.next_post = self.next_post.max(p.id);
                let list = self.topic_posts.entry(p.topic_id).or_default();
                list.push(p.id);
                let n = list.len() as u64;
                if let Some(t) = self.topics.get_mut(&p.topic_id) {
                    t.reply_count = n - 1;
                }
                self.posts.insert(p.id, p);
            }
        }
    }

    /// Drops topics whose opening post never made it to disk.
    fn drop_torn_topics(&mut self) {
        let torn: Vec<u64> = self
            .topics
            .keys()
            .copied()
            .filter(|id| self.topic_posts.get(id).is_none_or(|p| p.is_empty()))
            .collect();
        for id in torn {
            if let Some(t) = self.topics.remove(&id) {
                if let Some(list) = self.board_topics.get_mut(&t.board_id) {
                    list.retain(|x| *x != id);
                }
            }
            self.topic_posts.remove(&id);
        }
    }

    fn post_view(&self, p: &Post) -> PostView {
        let author = self.accounts.get(&p.author_id);
        PostView {
            id: p.id,
            topic_id: p.topic_id,
            author_id: p.author_id,
            author: author.map(|a| a.username.clone()).unwrap_or_default(),
            author_role: author.map(|a| a.role).unwrap_or(Role::Member),
            content: p.content.clone(),
            created_at: p.created_at,
            agent_meta: meta::parse_meta(&p.content),
        }
    }

    fn topic_view(&self, t: &Topic) -> TopicView {
        let first_post = self
            .topic_posts
            .get(&t.id)
            .and_then(|ids| ids.first())
            .and_then(|id| self.posts.get(id))
            .map(|p| self.post_view(p));
        TopicView {
            id: t.id,
            board_id: t.board_id,
            title: t.title.clone(),
            author_id: t.author_id,
            author: self
                .accounts
                .get(&t.author_id)
                .map(|a| a.username.clone())
                .unwrap_or_default(),
            created_at: t.created_at,
            reply_count: t.reply_count,
            first_post,
        }
    }

    fn authenticate(
        &self,
        session_token: Option<&str>,
        now: DateTime<Utc>,
    ) -> Result<(&Session, &Account), ForumError> {
        let token = session_token.ok_or_else(|| ForumError::auth("login required"))?;
        let session = self
            .sessions
            .get(token)
            .filter(|s| s.expires_at > now)
            .ok_or_else(|| ForumError::auth("session missing or expired"))?;
        let account = self
            .accounts
            .get(&session.account_id)
            .ok_or_else(|| ForumError::auth("session account missing"))?;
        Ok((session, account))
    }

    fn authorize_write(
        &self,
        session_token: Option<&str>,
        csrf: Option<&str>,
        now: DateTime<Utc>,
    ) -> Result<Account, ForumError> {
        let (session, account) = self.authenticate(session_token, now)?;
        match csrf {
            Some(c) if c == session.csrf_token => Ok(account.clone()),
            _ => Err(ForumError::new(
                ErrorCode::CsrfMismatch,
                "csrf token missing or stale",
            )),
        }
    }
}

/// The forum backend. All writes go through one lock, so every observable
/// state is the result of some serial order of the writes; reads take a
/// shared lock and see a consistent snapshot.
pub struct ForumService {
    config: ForumConfig,
    state: RwLock<ForumState>,
    wal: Option<Mutex<Wal>>,
}

fn validate_text(field: &str, value: &str) -> Result<(), ForumError> {
    if value.trim().is_empty() {
        return Err(ForumError::new(
            ErrorCode::InvalidInput,
            format!("{field} must be non-empty"),
        ));
    }
    Ok(())
}

impl ForumService {
    pub fn in_memory(config: ForumConfig) -> Self {
        ForumService {
            config,
            state: RwLock::new(ForumState::default()),
            wal: None,
        }
    }

    /// Opens a forum persisted to the log at `path`, replaying existing records.
    pub fn open(config: ForumConfig, path: &Path) -> Result<Self, StoreError> {
        let (wal, records) = Wal::open(path)?;
        let mut state = ForumState::default();
        for rec in records {
            state.apply(rec);
        }
        state.drop_torn_topics();
        Ok(ForumService {
            config,
            state: RwLock::new(state),
            wal: Some(Mutex::new(wal)),
        })
    }

    pub fn config(&self) -> &ForumConfig {
        &self.config
    }

    fn read(&self) -> std::sync::RwLockReadGuard<'_, ForumState> {
        self.state.read().unwrap_or_else(|e| e.into_inner())
    }

    fn write(&self) -> std::sync::RwLockWriteGuard<'_, ForumState> {
        self.state.write().unwrap_or_else(|e| e.into_inner())
    }

    fn persist(&self, records: &[WalRecord]) -> Result<(), ForumError> {
        if let Some(wal) = &self.wal {
            wal.lock()
                .unwrap_or_else(|e| e.into_inner())
                .append(records)
                .map_err(|e| ForumError::new(ErrorCode::Internal, e.to_string()))?;
        }
        Ok(())
    }

    fn admin_credential_ok(&self, credential: Option<&str>) -> bool {
        matches!(
            (self.config.admin_token.as_deref(), credential),
            (Some(expected), Some(given)) if !expected.is_empty() && expected == given
        )
    }

    pub fn register(
        &self,
        username: &str,
        password: &str,
        role: Option<Role>,
        admin_credential: Option<&str>,
    ) -> Result<AccountView, ForumError> {
        let username = username.trim();
        validate_text("username", username)?;
        validate_text("password", password)?;
        if username.chars().count() > 64 {
            return Err(ForumError::new(
                ErrorCode::InvalidInput,
                "username too long",
            ));
        }
        if role.is_some() && !self.admin_credential_ok(admin_credential) {
            return Err(ForumError::new(
                ErrorCode::ForbiddenRole,
                "a role can only be requested with a valid admin credential",
            ));
        }
        let salt = random_token();
        let hash = hash_password(password, &salt);
        let mut state = self.write();
        if state.by_username.contains_key(username) {
            return Err(ForumError::new(
                ErrorCode::DuplicateUsername,
                format!("username `{username}` is taken"),
            ));
        }
        let account = Account {
            id: state.next_account + 1,
            username: username.to_string(),
            password_hash: hash,
            role: role.unwrap_or(Role::Member),
            created_at: Utc::now(),
        };
        self.persist(&[WalRecord::Account(account.clone())])?;
        let view = AccountView::from(&account);
        state.apply(WalRecord::Account(account));
        Ok(view)
    }

    pub fn login(
        &self,
        username: &str,
        password: &str,
    ) -> Result<(Session, AccountView), ForumError> {
        let bad = || ForumError::new(ErrorCode::BadCredentials, "unknown user or wrong password");
        let account = {
            let state = self.read();
            let id = *state.by_username.get(username.trim()).ok_or_else(bad)?;
            state.accounts[&id].clone()
        };
        if !verify_password(password, &account.password_hash) {
            return Err(bad());
        }
        let mut state = self.write();
        let session = loop {
            let token = random_token();
            let csrf_token = random_token();
            if token != csrf_token && !state.sessions.contains_key(&token) {
                break Session {
                    token,
                    account_id: account.id,
                    csrf_token,
                    expires_at: Utc::now() + Duration::seconds(self.config.session_ttl_secs),
                };
            }
        };
        state
            .sessions
            .insert(session.token.clone(), session.clone());
        Ok((session, AccountView::from(&account)))
    }

    pub fn csrf_token(&self, session_token: Option<&str>) -> Result<String, ForumError> {
        let state = self.read();
        let (session, _) = state.authenticate(session_token, Utc::now())?;
        Ok(session.csrf_token.clone())
    }

    /// Checks session and CSRF token without performing a write.
    pub fn authorize_write(
        &self,
        session_token: Option<&str>,
        csrf: Option<&str>,
    ) -> Result<AccountView, ForumError> {
        let state = self.read();
        let account = state.authorize_write(session_token, csrf, Utc::now())?;
        Ok(AccountView::from(&account))
    }

    pub fn whoami(&self, session_token: Option<&str>) -> Result<AccountView, ForumError> {
        let state = self.read();
        let (_, account) = state.authenticate(session_token, Utc::now())?;
        Ok(AccountView::from(account))
    }

    /// Replaces the CSRF token of every live session of `username`.
    /// Models server-side token expiry.
    pub fn rotate_csrf(&self, username: &str) -> usize {
        let mut state = self.write();
        let Some(&id) = state.by_username.get(username) else {
            return 0;
        };
        let mut n = 0;
        for s in state.sessions.values_mut().filter(|s| s.account_id == id) {
            s.csrf_token = random_token();
            n += 1;
        }
        n
    }

    pub fn create_board(
        &self,
        admin_credential: Option<&str>,
        name: &str,
        description: &str,
        policy: BoardPolicy,
    ) -> Result<Board, ForumError> {
        if !self.admin_credential_ok(admin_credential) {
            return Err(ForumError::new(
                ErrorCode::PermissionDenied,
                "admin credential required",
            ));
        }
        validate_text("name", name)?;
        let mut state = self.write();
        let board = Board {
            id: state.next_board + 1,
            name: name.trim().to_string(),
            description: description.to_string(),
            position: state.boards.len() as u32,
            policy,
        };
        self.persist(&[WalRecord::Board(board.clone())])?;
        state.apply(WalRecord::Board(board.clone()));
        Ok(board)
    }

    pub fn list_boards(&self, page: u64) -> Page<Board> {
        let state = self.read();
        let mut boards: Vec<Board> = state.boards.values().cloned().collect();
        boards.sort_by_key(|b| (b.position, b.id));
        Page::slice(&boards, page, self.config.page_size)
    }

    pub fn list_topics(&self, board_id: u64, page: u64) -> Result<Page<TopicView>, ForumError> {
        let state = self.read();
        if !state.boards.contains_key(&board_id) {
            return Err(ForumError::board_not_found(board_id));
        }
        let ids = state
            .board_topics
            .get(&board_id)
            .map(Vec::as_slice)
            .unwrap_or(&[]);
        let total = ids.len() as u64;
        let size = self.config.page_size;
        let start = page.saturating_sub(1).saturating_mul(size);
        let items = if page == 0 || start >= total {
            Vec::new()
        } else {
            ids.iter()
                .rev()
                .skip(start as usize)
                .take(size as usize)
                .map(|id| state.topic_view(&state.topics[id]))
                .collect()
        };
        Ok(Page {
            items,
            page,
            page_size: size,
            total_pages: total.div_ceil(size),
            total_items: total,
        })
    }

    pub fn get_topic(&self, topic_id: u64) -> Result<TopicDetail, ForumError> {
        let state = self.read();
        let topic = state
            .topics
            .get(&topic_id)
            .ok_or_else(|| ForumError::topic_not_found(topic_id))?;
        let posts = state.topic_posts[&topic_id]
            .iter()
            .map(|id| state.post_view(&state.posts[id]))
            .collect();
        Ok(TopicDetail {
            topic: state.topic_view(topic),
            posts,
        })
    }

    pub fn create_topic(
        &self,
        session_token: Option<&str>,
        csrf: Option<&str>,
        board_id: u64,
        title: &str,
        content: &str,
    ) -> Result<TopicView, ForumError> {
        let mut state = self.write();
        let now = Utc::now();
        let account = state.authorize_write(session_token, csrf, now)?;
        let board = state
            .boards
            .get(&board_id)
            .ok_or_else(|| ForumError::board_not_found(board_id))?;
        if !check_permission(account.role, Action::PostCommand, board.policy) {
            return Err(ForumError::new(
                ErrorCode::PermissionDenied,
                format!("role {} may not post on board {}", account.role, board.name),
            ));
        }
        let title = title.trim();
        validate_text("title", title)?;
        validate_text("content", content)?;
        if title.chars().count() > MAX_TITLE_CHARS {
            return Err(ForumError::new(
                ErrorCode::InvalidInput,
                format!("title exceeds {MAX_TITLE_CHARS} characters"),
            ));
        }
        let topic = Topic {
            id: state.next_topic + 1,
            board_id,
            title: title.to_string(),
            author_id: account.id,
            created_at: now,
            reply_count: 0,
        };
        let post = Post {
            id: state.next_post + 1,
            topic_id: topic.id,
            author_id: account.id,
            content: content.to_string(),
            created_at: now,
        };
        self.persist(&[
            WalRecord::Topic(topic.clone()),
            WalRecord::Post(post.clone()),
        ])?;
        let id = topic.id;
        state.apply(WalRecord::Topic(topic));
        state.apply(WalRecord::Post(post));
        Ok(state.topic_view(&state.topics[&id]))
    }

    pub fn create_reply(
        &self,
        session_token: Option<&str>,
        csrf: Option<&str>,
        topic_id: u64,
        content: &str,
    ) -> Result<PostView, ForumError> {
        let mut state = self.write();
        let now = Utc::now();
        let account = state.authorize_write(session_token, csrf, now)?;
        let topic = state
            .topics
            .get(&topic_id)
            .ok_or_else(|| ForumError::topic_not_found(topic_id))?;
        let policy = state
            .boards
            .get(&topic.board_id)
            .map(|b| b.policy)
            .unwrap_or_default();
        if !check_permission(account.role, Action::PostReply, policy) {
            return Err(ForumError::new(
                ErrorCode::PermissionDenied,
                format!("role {} may not reply on this board", account.role),
            ));
        }
        validate_text("content", content)?;
        let post = Post {
            id: state.next_post + 1,
            topic_id,
            author_id: account.id,
            content: content.to_string(),
            created_at: now,
        };
        self.persist(&[WalRecord::Post(post.clone())])?;
        let view = state.post_view(&post);
        state.apply(WalRecord::Post(post));
        Ok(view)
    }

    pub fn account_count(&self) -> usize {
        self.read().accounts.len()
    }

    /// Stable digest of persistent state (accounts without hashes, boards,
    /// topics, posts), for idempotence checks.
    pub fn state_digest(&self) -> String {
        let state = self.read();
        let mut h = Sha256::new();
        for a in state.accounts.values() {
            h.update(format!("a|{}|{}|{}\n", a.id, a.username, a.role));
        }
        for b in state.boards.values() {
            h.update(format!(
                "b|{}|{}|{}|{:?}\n",
                b.id, b.name, b.position, b.policy
            ));
        }
        for t in state.topics.values() {
            h.update(format!(
                "t|{}|{}|{}|{}\n",
                t.id, t.board_id, t.title, t.reply_count
            ));
        }
        for p in state.posts.values() {
            h.update(format!(
                "p|{}|{}|{}|{}\n",
                p.id, p.topic_id, p.author_id, p.content
            ));
        }
        hex::encode(h.finalize())
    }
}
