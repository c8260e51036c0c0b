//! REST routes for the forum service.
//!
//! Session token travels in `Cookie: session=<token>`, the CSRF token in the
//! `X-CSRF-Token` header. Errors are `{error_code, message}` with a 4xx status.

use std::collections::HashMap;
use std::future::Future;
use std::net::SocketAddr;
use std::sync::{Arc, Mutex};

use axum::body::Bytes;
use axum::extract::{Path, Query, Request, State};
use axum::http::{header, HeaderMap, HeaderValue, Method, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use tokio::net::TcpListener;
use tokio::task::JoinHandle;
use tokio_util::sync::CancellationToken;

use super::model::{BoardPolicy, LoginResponse, Role};
use super::{ForumError, ForumService};
use crate::error::ErrorCode;

pub const SESSION_COOKIE: &str = "session";
pub const CSRF_HEADER: &str = "x-csrf-token";
pub const ADMIN_HEADER: &str = "x-admin-token";

/// One observed request, kept for test assertions on headers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecordedRequest {
    pub method: String,
    pub path: String,
    pub cookie: Option<String>,
    pub csrf: Option<String>,
}

pub type RequestLog = Arc<Mutex<Vec<RecordedRequest>>>;

#[derive(Clone)]
struct AppState {
    forum: Arc<ForumService>,
}

impl IntoResponse for ForumError {
    fn into_response(self) -> Response {
        let status = match self.code {
            ErrorCode::DuplicateUsername => StatusCode::CONFLICT,
            ErrorCode::ForbiddenRole | ErrorCode::CsrfMismatch | ErrorCode::PermissionDenied => {
                StatusCode::FORBIDDEN
            }
            ErrorCode::BadCredentials | ErrorCode::AuthRequired => StatusCode::UNAUTHORIZED,
            ErrorCode::BoardNotFound | ErrorCode::TopicNotFound => StatusCode::NOT_FOUND,
            ErrorCode::Internal | ErrorCode::Network => StatusCode::INTERNAL_SERVER_ERROR,
            _ => StatusCode::BAD_REQUEST,
        };
        (status, Json(self)).into_response()
    }
}

fn bad_input(msg: impl Into<String>) -> ForumError {
    ForumError::new(ErrorCode::InvalidInput, msg)
}

fn parse_body<T: DeserializeOwned>(body: &Bytes) -> Result<T, ForumError> {
    serde_json::from_slice(body).map_err(|e| bad_input(format!("invalid body: {e}")))
}

fn parse_id(raw: &str, what: &str) -> Result<u64, ForumError> {
    raw.parse::<u64>()
        .ok()
        .filter(|id| *id > 0)
        .ok_or_else(|| bad_input(format!("invalid {what} id `{raw}`")))
}

fn parse_page(q: &HashMap<String, String>) -> Result<u64, ForumError> {
    match q.get("page") {
        None => Ok(1),
        Some(raw) => raw
            .parse::<u64>()
            .ok()
            .filter(|p| *p >= 1)
            .ok_or_else(|| bad_input(format!("page must be a positive integer, got `{raw}`"))),
    }
}

pub fn session_from_headers(headers: &HeaderMap) -> Option<String> {
    headers
        .get_all(header::COOKIE)
        .iter()
        .filter_map(|v| v.to_str().ok())
        .flat_map(|v| v.split(';'))
        .filter_map(|kv| kv.trim().split_once('='))
        .find(|(k, _)| *k == SESSION_COOKIE)
        .map(|(_, v)| v.to_string())
}

fn header_str<'a>(headers: &'a HeaderMap, name: &str) -> Option<&'a str> {
    headers.get(name).and_then(|v| v.to_str().ok())
}

#[derive(Deserialize)]
struct RegisterBody {
    username: String,
    password: String,
    role: Option<Role>,
    admin_credential: Option<String>,
}

#[derive(Deserialize)]
struct LoginBody {
    username: String,
    password: String,
}

#[derive(Deserialize)]
struct TopicBody {
    title: String,
    content: String,
}

#[derive(Deserialize)]
struct ReplyBody {
    content: String,
}

#[derive(Deserialize)]
struct BoardBody {
    name: String,
    #[serde(default)]
    description: String,
    #[serde(default)]
    policy: BoardPolicy,
}

#[derive(Serialize, Deserialize)]
pub struct CsrfResponse {
    pub csrf_token: String,
}

async fn register(State(st): State<AppState>, body: Bytes) -> Result<Response, ForumError> {
    let b: RegisterBody = parse_body(&body)?;
    let account = st.forum.register(
        &b.username,
        &b.password,
        b.role,
        b.admin_credential.as_deref(),
    )?;
    Ok((StatusCode::CREATED, Json(account)).into_response())
}

async fn login(State(st): State<AppState>, body: Bytes) -> Result<Response, ForumError> {
    let b: LoginBody = parse_body(&body)?;
    let (session, account) = st.forum.login(&b.username, &b.password)?;
    let cookie = format!(
        "{SESSION_COOKIE}={}; Path=/; HttpOnly; SameSite=Strict",
        session.token
    );
    let body = LoginResponse {
        account,
        csrf_token: session.csrf_token,
        expires_at: session.expires_at,
    };
    let mut resp = Json(body).into_response();
    resp.headers_mut().insert(
        header::SET_COOKIE,
        HeaderValue::from_str(&cookie).expect("token is ascii"),
    );
    Ok(resp)
}

async fn csrf(State(st): State<AppState>, headers: HeaderMap) -> Result<Response, ForumError> {
    let token = st
        .forum
        .csrf_token(session_from_headers(&headers).as_deref())?;
    Ok(Json(CsrfResponse { csrf_token: token }).into_response())
}

async fn me(State(st): State<AppState>, headers: HeaderMap) -> Result<Response, ForumError> {
    Ok(Json(st.forum.whoami(session_from_headers(&headers).as_deref())?).into_response())
}

async fn list_boards(
    State(st): State<AppState>,
    Query(q): Query<HashMap<String, String>>,
) -> Result<Response, ForumError> {
    Ok(Json(st.forum.list_boards(parse_page(&q)?)).into_response())
}

async fn create_board(
    State(st): State<AppState>,
    headers: HeaderMap,
    body: Bytes,
) -> Result<Response, ForumError> {
    let b: BoardBody = parse_body(&body)?;
    let board = st.forum.create_board(
        header_str(&headers, ADMIN_HEADER),
        &b.name,
        &b.description,
        b.policy,
    )?;
    Ok((StatusCode::CREATED, Json(board)).into_response())
}

async fn list_topics(
    State(st): State<AppState>,
    Path(bid): Path<String>,
    Query(q): Query<HashMap<String, String>>,
) -> Result<Response, ForumError> {
    let bid = parse_id(&bid, "board")?;
    Ok(Json(st.forum.list_topics(bid, parse_page(&q)?)?).into_response())
}

async fn create_topic(
    State(st): State<AppState>,
    Path(bid): Path<String>,
    headers: HeaderMap,
    body: Bytes,
) -> Result<Response, ForumError> {
    let session = session_from_headers(&headers);
    let csrf = header_str(&headers, CSRF_HEADER);
    st.forum.authorize_write(session.as_deref(), csrf)?;
    let bid = parse_id(&bid, "board")?;
    let b: TopicBody = parse_body(&body)?;
    let topic = st
        .forum
        .create_topic(session.as_deref(), csrf, bid, &b.title, &b.content)?;
    Ok((StatusCode::CREATED, Json(topic)).into_response())
}

async fn get_topic(
    State(st): State<AppState>,
    Path(tid): Path<String>,
) -> Result<Response, ForumError> {
    let tid = parse_id(&tid, "topic")?;
    Ok(Json(st.forum.get_topic(tid)?).into_response())
}

async fn create_reply(
    State(st): State<AppState>,
    Path(tid): Path<String>,
    headers: HeaderMap,
    body: Bytes,
) -> Result<Response, ForumError> {
    let session = session_from_headers(&headers);
    let csrf = header_str(&headers, CSRF_HEADER);
    st.forum.authorize_write(session.as_deref(), csrf)?;
    let tid = parse_id(&tid, "topic")?;
    let b: ReplyBody = parse_body(&body)?;
    let post = st
        .forum
        .create_reply(session.as_deref(), csrf, tid, &b.content)?;
    Ok((StatusCode::CREATED, Json(post)).into_response())
}

async fn not_found() -> ForumError {
    ForumError::new(ErrorCode::InvalidInput, "no such endpoint")
}

async fn record(log: RequestLog, req: Request, next: Next) -> Response {
    let headers = req.headers();
    let entry = RecordedRequest {
        method: req.method().to_string(),
        path: req.uri().path().to_string(),
        cookie: header_str(headers, "cookie").map(str::to_string),
        csrf: header_str(headers, CSRF_HEADER).map(str::to_string),
    };
    log.lock().unwrap_or_else(|e| e.into_inner()).push(entry);
    next.run(req).await
}

pub fn router(forum: Arc<ForumService>, log: Option<RequestLog>) -> Router {
    let app = Router::new()
        .route("/api/v1/auth/register", post(register))
        .route("/api/v1/auth/login", post(login))
        .route("/api/v1/auth/csrf", get(csrf))
        .route("/api/v1/auth/me", get(me))
        .route("/api/v1/boards", get(list_boards))
        .route("/api/v1/admin/boards", post(create_board))
        .route(
            "/api/v1/boards/{bid}/topics",
            get(list_topics).post(create_topic),
        )
        .route("/api/v1/topics/{tid}", get(get_topic))
        .route("/api/v1/topics/{tid}/replies", post(create_reply))
        .fallback(not_found)
        .with_state(AppState { forum });
    match log {
        Some(log) => app.layer(middleware::from_fn(move |req, next| {
            record(log.clone(), req, next)
        })),
        None => app,
    }
}

/// Serves `forum` on `listener` until `shutdown` resolves.
pub async fn serve(
    forum: Arc<ForumService>,
    listener: TcpListener,
    log: Option<RequestLog>,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router(forum, log))
        .with_graceful_shutdown(shutdown)
        .await
}

/// A forum server running on a background task.
pub struct ForumServerHandle {
    pub addr: SocketAddr,
    pub forum: Arc<ForumService>,
    pub log: RequestLog,
    cancel: CancellationToken,
    task: Option<JoinHandle<std::io::Result<()>>>,
}

impl ForumServerHandle {
    pub async fn start(forum: Arc<ForumService>, addr: SocketAddr) -> std::io::Result<Self> {
        let listener = TcpListener::bind(addr).await?;
        let addr = listener.local_addr()?;
        let log: RequestLog = Arc::default();
        let cancel = CancellationToken::new();
        let stop = cancel.clone();
        let task = tokio::spawn(serve(
            Arc::clone(&forum),
            listener,
            Some(Arc::clone(&log)),
            async move { stop.cancelled().await },
        ));
        Ok(ForumServerHandle {
            addr,
            forum,
            log,
            cancel,
            task: Some(task),
        })
    }

    pub fn base_url(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub fn requests(&self) -> Vec<RecordedRequest> {
        self.log.lock().unwrap_or_else(|e| e.into_inner()).clone()
    }

    pub fn clear_requests(&self) {
        self.log.lock().unwrap_or_else(|e| e.into_inner()).clear();
    }

    pub async fn shutdown(mut self) {
        self.cancel.cancel();
        if let Some(task) = self.task.take() {
            let _ = task.await;
        }
    }
}

impl Drop for ForumServerHandle {
    fn drop(&mut self) {
        self.cancel.cancel();
    }
}

/// Writes are POSTs to anything except the auth endpoints.
pub fn is_forum_write(req: &RecordedRequest) -> bool {
    req.method == Method::POST.as_str() && !req.path.starts_with("/api/v1/auth/")
}
