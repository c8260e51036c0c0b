//! HTTP client for the forum API.
//!
//! Keeps a small cookie jar and a cached CSRF token. The token is fetched
//! right after login; when a write comes back `CSRF_MISMATCH` the token is
//! refetched and the write retried once. Session expiry is not handled
//! here: it surfaces as `AUTH_REQUIRED` and the caller decides.

use std::collections::BTreeMap;
use std::time::Duration;

use reqwest::header::{COOKIE, SET_COOKIE};
use reqwest::{Method, RequestBuilder, Response};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::error::ErrorCode;
use crate::forum::http::{CsrfResponse, ADMIN_HEADER, CSRF_HEADER};
use crate::forum::{
    AccountView, Board, BoardPolicy, ForumError, LoginResponse, Page, PostView, Role, TopicDetail,
    TopicView,
};

pub const REQUEST_TIMEOUT: Duration = Duration::from_secs(10);

#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("{code}: {message}")]
pub struct ClientError {
    pub code: ErrorCode,
    pub message: String,
    /// Set for transport failures the caller may retry.
    pub retryable: bool,
}

impl ClientError {
    fn new(code: ErrorCode, message: impl Into<String>) -> Self {
        ClientError {
            code,
            message: message.into(),
            retryable: false,
        }
    }

    fn network(err: reqwest::Error) -> Self {
        ClientError {
            code: ErrorCode::Network,
            retryable: err.is_connect() || err.is_timeout() || err.is_request(),
            message: err.to_string(),
        }
    }
}

impl From<ForumError> for ClientError {
    fn from(e: ForumError) -> Self {
        ClientError::new(e.code, e.message)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegistrationMode {
    /// Privileged flow: needs the admin credential, may pick a role.
    Admin,
    /// Public sign-up: always a member account.
    Public,
}

/// Observable client state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClientState {
    pub base_url: String,
    pub active_identity: Option<String>,
    pub cached_csrf: Option<String>,
    pub cookie_names: Vec<String>,
}

pub struct ForumClient {
    base_url: String,
    http: reqwest::Client,
    cookies: BTreeMap<String, String>,
    cached_csrf: Option<String>,
    active_identity: Option<String>,
    csrf_fetches: u64,
}

impl ForumClient {
    pub fn new(base_url: &str) -> Self {
        let http = reqwest::Client::builder()
            .timeout(REQUEST_TIMEOUT)
            .build()
            .expect("http client");
        ForumClient {
            base_url: base_url.trim_end_matches('/').to_string(),
            http,
            cookies: BTreeMap::new(),
            cached_csrf: None,
            active_identity: None,
            csrf_fetches: 0,
        }
    }

    pub fn base_url(&self) -> &str {
        &self.base_url
    }

    pub fn state(&self) -> ClientState {
        ClientState {
            base_url: self.base_url.clone(),
            active_identity: self.active_identity.clone(),
            cached_csrf: self.cached_csrf.clone(),
            cookie_names: self.cookies.keys().cloned().collect(),
        }
    }

    pub fn active_identity(&self) -> Option<&str> {
        self.active_identity.as_deref()
    }

    /// Number of CSRF token fetches issued so far.
    pub fn csrf_fetches(&self) -> u64 {
        self.csrf_fetches
    }

    fn clear_session(&mut self) {
        self.cookies.clear();
        self.cached_csrf = None;
        self.active_identity = None;
    }

    fn request(&self, method: Method, path: &str, with_cookies: bool) -> RequestBuilder {
        let mut req = self
            .http
            .request(method, format!("{}{}", self.base_url, path));
        if with_cookies && !self.cookies.is_empty() {
            let header = self
                .cookies
                .iter()
                .map(|(k, v)| format!("{k}={v}"))
                .collect::<Vec<_>>()
                .join("; ");
            req = req.header(COOKIE, header);
        }
        req
    }

    async fn decode<T: DeserializeOwned>(resp: Response) -> Result<T, ClientError> {
        let status = resp.status();
        let bytes = resp.bytes().await.map_err(ClientError::network)?;
        if status.is_success() {
            serde_json::from_slice(&bytes).map_err(|e| {
                ClientError::new(ErrorCode::Internal, format!("undecodable response: {e}"))
            })
        } else {
            match serde_json::from_slice::<ForumError>(&bytes) {
                Ok(e) => Err(e.into()),
                Err(_) => Err(ClientError::new(
                    ErrorCode::Internal,
                    format!("http {status}: {}", String::from_utf8_lossy(&bytes)),
                )),
            }
        }
    }

    async fn send<T: DeserializeOwned>(&self, req: RequestBuilder) -> Result<T, ClientError> {
        let resp = req.send().await.map_err(ClientError::network)?;
        Self::decode(resp).await
    }

    /// Logs in. On failure the previous state is kept.
    pub async fn authenticate(
        &mut self,
        username: &str,
        password: &str,
    ) -> Result<AccountView, ClientError> {
        let resp = self
            .request(Method::POST, "/api/v1/auth/login", false)
            .json(&json!({ "username": username, "password": password }))
            .send()
            .await
            .map_err(ClientError::network)?;
        let mut fresh = BTreeMap::new();
        for value in resp.headers().get_all(SET_COOKIE) {
            if let Some((k, v)) = value
                .to_str()
                .ok()
                .and_then(|s| s.split(';').next())
                .and_then(|kv| kv.split_once('='))
            {
                fresh.insert(k.trim().to_string(), v.trim().to_string());
            }
        }
        let login: LoginResponse = Self::decode(resp).await?;
        self.cookies = fresh;
        self.cached_csrf = None;
        self.active_identity = Some(login.account.username.clone());
        if let Err(e) = self.fetch_csrf().await {
            self.clear_session();
            return Err(e);
        }
        Ok(login.account)
    }

    async fn fetch_csrf(&mut self) -> Result<String, ClientError> {
        self.csrf_fetches += 1;
        let r: CsrfResponse = self
            .send(self.request(Method::GET, "/api/v1/auth/csrf", true))
            .await?;
        self.cached_csrf = Some(r.csrf_token.clone());
        Ok(r.csrf_token)
    }

    pub async fn ensure_csrf(&mut self) -> Result<String, ClientError> {
        if self.active_identity.is_none() {
            return Err(ClientError::new(ErrorCode::AuthRequired, "not logged in"));
        }
        match &self.cached_csrf {
            Some(t) => Ok(t.clone()),
            None => self.fetch_csrf().await,
        }
    }

    /// Drops the current session before logging in as `username`. A failed
    /// login leaves the client logged out.
    pub async fn switch_identity(
        &mut self,
        username: &str,
        password: &str,
    ) -> Result<AccountView, ClientError> {
        self.clear_session();
        let result = self.authenticate(username, password).await;
        if result.is_err() {
            self.clear_session();
        }
        result
    }

    pub async fn logout(&mut self) {
        self.clear_session();
    }

    /// Creates an account without touching the current session.
    pub async fn register_identity(
        &self,
        username: &str,
        password: &str,
        mode: RegistrationMode,
        role: Option<Role>,
        admin_credential: Option<&str>,
    ) -> Result<AccountView, ClientError> {
        let body = match mode {
            RegistrationMode::Public => json!({ "username": username, "password": password }),
            RegistrationMode::Admin => {
                let Some(cred) = admin_credential.filter(|c| !c.is_empty()) else {
                    return Err(ClientError::new(
                        ErrorCode::ForbiddenRole,
                        "admin registration needs an admin credential",
                    ));
                };
                json!({
                    "username": username,
                    "password": password,
                    "role": role.unwrap_or(Role::Operator),
                    "admin_credential": cred,
                })
            }
        };
        self.send(
            self.request(Method::POST, "/api/v1/auth/register", false)
                .json(&body),
        )
        .await
    }

    pub async fn create_board(
        &self,
        admin_credential: &str,
        name: &str,
        description: &str,
        policy: BoardPolicy,
    ) -> Result<Board, ClientError> {
        self.send(
            self.request(Method::POST, "/api/v1/admin/boards", false)
                .header(ADMIN_HEADER, admin_credential)
                .json(&json!({ "name": name, "description": description, "policy": policy })),
        )
        .await
    }

    pub async fn whoami(&self) -> Result<AccountView, ClientError> {
        self.send(self.request(Method::GET, "/api/v1/auth/me", true))
            .await
    }

    pub async fn list_boards(&self, page: u64) -> Result<Page<Board>, ClientError> {
        self.send(self.request(Method::GET, &format!("/api/v1/boards?page={page}"), true))
            .await
    }

    pub async fn list_topics(
        &self,
        board_id: u64,
        page: u64,
    ) -> Result<Page<TopicView>, ClientError> {
        self.send(self.request(
            Method::GET,
            &format!("/api/v1/boards/{board_id}/topics?page={page}"),
            true,
        ))
        .await
    }

    pub async fn get_topic(&self, topic_id: u64) -> Result<TopicDetail, ClientError> {
        self.send(self.request(Method::GET, &format!("/api/v1/topics/{topic_id}"), true))
            .await
    }

    /// A write with at most one CSRF refresh-and-retry.
    async fn write<T: DeserializeOwned>(
        &mut self,
        path: &str,
        body: Value,
    ) -> Result<T, ClientError> {
        let csrf = self.ensure_csrf().await?;
        let first = self
            .send(
                self.request(Method::POST, path, true)
                    .header(CSRF_HEADER, csrf)
                    .json(&body),
            )
            .await;
        match first {
            Err(e) if e.code == ErrorCode::CsrfMismatch => {
                self.cached_csrf = None;
                let csrf = self.fetch_csrf().await?;
                self.send(
                    self.request(Method::POST, path, true)
                        .header(CSRF_HEADER, csrf)
                        .json(&body),
                )
                .await
            }
            other => other,
        }
    }

    pub async fn create_topic(
        &mut self,
        board_id: u64,
        title: &str,
        content: &str,
    ) -> Result<TopicView, ClientError> {
        self.write(
            &format!("/api/v1/boards/{board_id}/topics"),
            json!({ "title": title, "content": content }),
        )
        .await
    }

    pub async fn create_reply(
        &mut self,
        topic_id: u64,
        content: &str,
    ) -> Result<PostView, ClientError> {
        self.write(
            &format!("/api/v1/topics/{topic_id}/replies"),
            json!({ "content": content }),
        )
        .await
    }
}
