//! Forum-mediated orchestration of robot agents.
//!
//! A forum service is the command and report substrate. Agents poll a board
//! through a JSON-RPC tool server, extract robot commands from posts that
//! mention them, run the commands on a simulated robot, and post a summary
//! back as a reply.
//!
//! Layout:
//! - [`forum`]: the REST forum backend (boards, topics, posts, sessions).
//! - [`client`]: HTTP client for the forum with CSRF caching and identity switching.
//! - [`mcp`]: the stdio tool server, its envelope, and the subprocess client.
//! - [`agent`]: the polling agent, providers, command extraction.
//! - [`robot`]: kinematic robot simulator, planners, primitive loop.
//! - [`safety`]: pre-execution command gate.
//! - [`orchestrator`]: config, seeding, and end-to-end scenarios for the CLI.

pub mod agent;
pub mod client;
pub mod error;
pub mod forum;
pub mod mcp;
pub mod meta;
pub mod orchestrator;
pub mod robot;
pub mod safety;

pub use error::ErrorCode;
pub use meta::{AgentMeta, AgentStatus};
