//! Stdio tool server. Requests are handled strictly in arrival order.

use serde_json::{json, Map, Value};
use tokio::io::{AsyncBufRead, AsyncBufReadExt, AsyncWrite, AsyncWriteExt};
use tracing::{debug, warn};

use super::envelope::ToolEnvelope;
use super::protocol::*;
use super::tools::{self, TOOLS};
use crate::client::{ClientError, ForumClient, RegistrationMode};
use crate::error::ErrorCode;
use crate::forum::Role;
use crate::meta::{self, AgentMeta, AgentStatus};

pub const SERVER_NAME: &str = "forumbot-tools";

/// Settings normally taken from the environment at spawn.
#[derive(Debug, Clone, Default)]
pub struct ServerSettings {
    pub forum_base_url: String,
    pub username: Option<String>,
    pub password: Option<String>,
    pub agent_type: String,
    pub agent_id: String,
    pub admin_credential: Option<String>,
}

impl ServerSettings {
    /// Reads FORUM_BASE_URL, FORUM_USERNAME, FORUM_PASSWORD, AGENT_TYPE,
    /// AGENT_ID and the optional FORUM_ADMIN_TOKEN.
    pub fn from_env() -> Self {
        let var = |k: &str| std::env::var(k).ok().filter(|v| !v.is_empty());
        ServerSettings {
            forum_base_url: var("FORUM_BASE_URL").unwrap_or_else(|| "http://127.0.0.1:8080".into()),
            username: var("FORUM_USERNAME"),
            password: var("FORUM_PASSWORD"),
            agent_type: var("AGENT_TYPE").unwrap_or_else(|| "agent".into()),
            agent_id: var("AGENT_ID").unwrap_or_else(|| format!("agent-{}", std::process::id())),
            admin_credential: var("FORUM_ADMIN_TOKEN"),
        }
    }
}

pub struct ToolServer {
    settings: ServerSettings,
    client: ForumClient,
    credentials: Option<(String, String)>,
    initialized: bool,
    invocations: u64,
}

fn client_failure(tool: &str, e: ClientError) -> ToolEnvelope {
    ToolEnvelope::fail(tool, e.code, e.message)
}

fn to_value<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("payload serializes")
}

fn arg_u64(args: &Map<String, Value>, key: &str) -> Option<u64> {
    args.get(key).and_then(Value::as_u64)
}

fn arg_str<'a>(args: &'a Map<String, Value>, key: &str) -> Option<&'a str> {
    args.get(key).and_then(Value::as_str)
}

impl ToolServer {
    pub fn new(settings: ServerSettings) -> Self {
        let credentials = settings.username.clone().zip(settings.password.clone());
        ToolServer {
            client: ForumClient::new(&settings.forum_base_url),
            settings,
            credentials,
            initialized: false,
            invocations: 0,
        }
    }

    pub fn client(&self) -> &ForumClient {
        &self.client
    }

    pub fn invocations(&self) -> u64 {
        self.invocations
    }

    /// Handles one framed line. Notifications produce no output.
    pub async fn handle_line(&mut self, line: &str) -> Option<RpcResponse> {
        let value: Value = match serde_json::from_str(line) {
            Ok(v) => v,
            Err(e) => {
                return Some(RpcResponse::error(
                    Value::Null,
                    RpcError::new(PARSE_ERROR, format!("parse error: {e}")),
                ))
            }
        };
        let id = value.get("id").cloned();
        let req: RpcRequest = match serde_json::from_value(value) {
            Ok(r) => r,
            Err(e) => {
                return Some(RpcResponse::error(
                    id.unwrap_or(Value::Null),
                    RpcError::new(INVALID_REQUEST, format!("invalid request: {e}")),
                ))
            }
        };
        let Some(id) = req.id.clone() else {
            debug!(method = %req.method, "notification");
            return None;
        };
        if req.jsonrpc != JSONRPC {
            return Some(RpcResponse::error(
                id,
                RpcError::new(INVALID_REQUEST, "jsonrpc must be 2.0"),
            ));
        }
        Some(match self.handle_request(&req).await {
            Ok(result) => RpcResponse::result(id, result),
            Err(err) => RpcResponse::error(id, err),
        })
    }

    async fn handle_request(&mut self, req: &RpcRequest) -> Result<Value, RpcError> {
        match req.method.as_str() {
            "initialize" => self.handle_initialize(req.params.as_ref()),
            "ping" => Ok(json!({})),
            _ if !self.initialized => Err(RpcError::new(
                NOT_INITIALIZED,
                format!("`{}` before initialize", req.method),
            )),
            "tools/list" => {
                Ok(json!({ "tools": TOOLS.iter().map(|t| t.descriptor()).collect::<Vec<_>>() }))
            }
            "tools/call" => {
                let params = req.params.clone().unwrap_or(Value::Null);
                let Some(name) = params.get("name").and_then(Value::as_str) else {
                    return Err(RpcError::new(
                        INVALID_PARAMS,
                        "tools/call needs params.name",
                    ));
                };
                let args = params.get("arguments").cloned().unwrap_or(Value::Null);
                let envelope = self.dispatch_tool(name, &args).await;
                let text = serde_json::to_string(&envelope).expect("envelope serializes");
                Ok(json!({
                    "content": [{ "type": "text", "text": text }],
                    "structuredContent": envelope,
                    "isError": !envelope.success,
                }))
            }
            other => Err(RpcError::new(
                METHOD_NOT_FOUND,
                format!("method `{other}` not found"),
            )),
        }
    }

    pub fn handle_initialize(&mut self, _params: Option<&Value>) -> Result<Value, RpcError> {
        if self.initialized {
            return Err(RpcError::new(INVALID_REQUEST, "already initialized"));
        }
        self.initialized = true;
        Ok(json!({
            "protocolVersion": PROTOCOL_VERSION,
            "capabilities": { "tools": { "listChanged": false } },
            "serverInfo": { "name": SERVER_NAME, "version": env!("CARGO_PKG_VERSION") },
        }))
    }

    fn meta(&self, status: AgentStatus) -> AgentMeta {
        AgentMeta {
            agent_type: self.settings.agent_type.clone(),
            agent_id: self.settings.agent_id.clone(),
            status,
        }
    }

    async fn ensure_login(&mut self) -> Result<(), ClientError> {
        if self.client.active_identity().is_some() {
            return Ok(());
        }
        match self.credentials.clone() {
            Some((u, p)) => self.client.authenticate(&u, &p).await.map(|_| ()),
            None => Err(ClientError {
                code: ErrorCode::AuthRequired,
                message: "no forum account configured; call login_account".into(),
                retryable: false,
            }),
        }
    }

    /// Validates and runs one tool. Domain failures become failure envelopes.
    pub async fn dispatch_tool(&mut self, name: &str, args: &Value) -> ToolEnvelope {
        self.invocations += 1;
        let Some(spec) = tools::spec(name) else {
            return ToolEnvelope::fail(
                name,
                ErrorCode::UnknownTool,
                format!("no tool named `{name}`"),
            );
        };
        let args = match spec.validate(args) {
            Ok(a) => a,
            Err(msg) => return ToolEnvelope::fail(name, ErrorCode::SchemaViolation, msg),
        };
        let result = self.run_tool(name, &args).await;
        match result {
            Ok(data) => ToolEnvelope::ok(name, data),
            Err(e) => {
                warn!(tool = name, code = %e.code, "tool failed: {}", e.message);
                client_failure(name, e)
            }
        }
    }

    async fn run_tool(
        &mut self,
        name: &str,
        args: &Map<String, Value>,
    ) -> Result<Value, ClientError> {
        let page = arg_u64(args, "page").unwrap_or(1);
        match name {
            "get_manual" => Ok(to_value(&tools::manual())),
            "list_boards" => Ok(to_value(&self.client.list_boards(page).await?)),
            "list_posts" => {
                let board = arg_u64(args, "board_id").expect("validated");
                Ok(to_value(&self.client.list_topics(board, page).await?))
            }
            "get_topic" => {
                let topic = arg_u64(args, "topic_id").expect("validated");
                Ok(to_value(&self.client.get_topic(topic).await?))
            }
            "create_topic" => {
                let status = arg_str(args, "status")
                    .map(|s| s.parse().expect("validated"))
                    .unwrap_or(AgentStatus::Info);
                let content = meta::inject(
                    arg_str(args, "content").expect("validated"),
                    &self.meta(status),
                );
                self.ensure_login().await?;
                let topic = self
                    .client
                    .create_topic(
                        arg_u64(args, "board_id").expect("validated"),
                        arg_str(args, "title").expect("validated"),
                        &content,
                    )
                    .await?;
                Ok(to_value(&topic))
            }
            "reply_to_topic" => {
                let status: AgentStatus = arg_str(args, "status")
                    .expect("validated")
                    .parse()
                    .expect("validated");
                let content = meta::inject(
                    arg_str(args, "content").expect("validated"),
                    &self.meta(status),
                );
                self.ensure_login().await?;
                let post = self
                    .client
                    .create_reply(arg_u64(args, "topic_id").expect("validated"), &content)
                    .await?;
                Ok(to_value(&post))
            }
            "login_account" => {
                let user = arg_str(args, "username").expect("validated").to_string();
                let pass = arg_str(args, "password").expect("validated").to_string();
                match self.client.switch_identity(&user, &pass).await {
                    Ok(account) => {
                        self.credentials = Some((user, pass));
                        Ok(json!({ "account": account }))
                    }
                    Err(e) => {
                        self.credentials = None;
                        Err(e)
                    }
                }
            }
            "register_account" => {
                let mode = match arg_str(args, "mode") {
                    Some("admin") => RegistrationMode::Admin,
                    _ => RegistrationMode::Public,
                };
                let role: Option<Role> =
                    arg_str(args, "role").map(|r| r.parse().expect("validated"));
                let cred = arg_str(args, "admin_credential")
                    .map(str::to_string)
                    .or_else(|| self.settings.admin_credential.clone());
                let account = self
                    .client
                    .register_identity(
                        arg_str(args, "username").expect("validated"),
                        arg_str(args, "password").expect("validated"),
                        mode,
                        role,
                        cred.as_deref(),
                    )
                    .await?;
                Ok(json!({ "account": account }))
            }
            _ => unreachable!("tool table lookup guards names"),
        }
    }
}

/// Serves newline-delimited JSON-RPC on the given streams until EOF.
pub async fn run_stdio<R, W>(
    server: &mut ToolServer,
    reader: R,
    mut writer: W,
) -> std::io::Result<()>
where
    R: AsyncBufRead + Unpin,
    W: AsyncWrite + Unpin,
{
    let mut lines = reader.lines();
    while let Some(line) = lines.next_line().await? {
        if line.trim().is_empty() {
            continue;
        }
        if let Some(resp) = server.handle_line(&line).await {
            writer.write_all(resp.to_line().as_bytes()).await?;
            writer.flush().await?;
        }
    }
    Ok(())
}
