mod common;

use std::net::TcpListener;
use std::path::Path;
use std::process::{Command, Output};

use common::Fixture;

const BIN: &str = env!("CARGO_BIN_EXE_forumbot");

fn free_port() -> u16 {
    TcpListener::bind("127.0.0.1:0")
        .unwrap()
        .local_addr()
        .unwrap()
        .port()
}

fn run(args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .env_remove("FORUMBOT_CONFIG")
        .env("RUST_LOG", "error")
        .output()
        .unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

fn config(forum_port: u16, go2_http: u16) -> String {
    format!(
        r#"
[server]
bind = "127.0.0.1:{forum_port}"
admin_token = "cli-test"

[safety]
cooldown_secs = 0

[[agents]]
agent_id = "go2-1"
agent_type = "go2"
mention_pattern = "@quadruped"
board_id = 2
poll_interval_secs = 0.5
http_bind = "127.0.0.1:{go2_http}"
[agents.tools]
in_process = true

[[agents]]
agent_id = "g1-1"
agent_type = "g1"
mention_pattern = "@humanoid"
board_id = 2
poll_interval_secs = 0.5
[agents.tools]
in_process = true
"#
    )
}

const SCENARIO: &str = r#"
name = "cli"
auto_spawn = true

[[steps]]
post = { label = "walk", post_as = "alice", board = "Robot Commands", title = "go", content = "@quadruped walk forward 1 meter then say hello" }

[[steps]]
expect = { topic = "walk", reply_matching = "status=success", within_polls = 3 }

[[steps]]
post = { label = "flip", post_as = "alice", board = 2, title = "flip", content = "@humanoid do a backflip" }

[[steps]]
expect = { topic = "flip", reply_matching = "status=failure", within_polls = 3 }
"#;

#[test]
fn scenario_spawns_and_passes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "forumbot.toml",
        &config(free_port(), free_port()),
    );
    let scenario = write(dir.path(), "s.toml", SCENARIO);
    let out = run(&["--config", &cfg, "scenario", &scenario, "--json"]);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(
        out.status.success(),
        "{stdout}\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let report: serde_json::Value = serde_json::from_str(&stdout).unwrap();
    assert_eq!(report["passed"], true);
    assert_eq!(report["steps"].as_array().unwrap().len(), 4);
}

#[test]
fn failing_expectation_reports_thread() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "forumbot.toml",
        &config(free_port(), free_port()),
    );
    let scenario = write(
        dir.path(),
        "s.toml",
        &SCENARIO
            .replace("status=success", "never matches")
            .replace("within_polls = 3", "within_polls = 1"),
    );
    let out = run(&["--config", &cfg, "scenario", &scenario]);
    assert_eq!(out.status.code(), Some(1));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("FAIL"), "{stdout}");
    assert!(
        stdout.contains("alice: @quadruped walk forward"),
        "{stdout}"
    );
}

#[test]
fn invalid_scenario_is_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "forumbot.toml",
        &config(free_port(), free_port()),
    );
    let scenario = write(
        dir.path(),
        "s.toml",
        "[[steps]]\nexpect = { topic = \"ghost\", reply_matching = \"x\", within_polls = 1 }\n",
    );
    assert_eq!(
        run(&["--config", &cfg, "scenario", &scenario])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn config_errors_exit_2() {
    assert_eq!(
        run(&["--config", "/nonexistent.toml", "status"])
            .status
            .code(),
        Some(2)
    );
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.toml", "[[agents]]\nagent_id = \"x\"\n");
    assert_eq!(run(&["--config", &cfg, "agent"]).status.code(), Some(2));
    let cfg = write(dir.path(), "ok.toml", &config(free_port(), free_port()));
    assert_eq!(
        run(&["--config", &cfg, "agent", "--agent", "nobody"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn status_of_nothing_is_unreachable() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "forumbot.toml",
        &config(free_port(), free_port()),
    );
    let out = run(&["--config", &cfg, "status", "--json"]);
    assert_eq!(out.status.code(), Some(3));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["forum"]["online"], false);
    assert_eq!(v["agents"][0]["online"], false);
}

#[tokio::test]
async fn single_run_agent_against_live_forum() {
    let fx = Fixture::start().await;
    fx.post("alice", "t", "@quadruped say hello").await;
    let dir = tempfile::tempdir().unwrap();
    let cfg = format!(
        r#"
[seed]
agent_password = "{}"

[[agents]]
agent_id = "go2-1"
agent_type = "go2"
mention_pattern = "@quadruped"
board_id = {}
[agents.forum]
base_url = "{}"
"#,
        common::AGENT_PASSWORD,
        fx.commands,
        fx.url()
    );
    let cfg = write(dir.path(), "forumbot.toml", &cfg);
    let out = tokio::task::spawn_blocking(move || {
        run(&["--config", &cfg, "agent", "--mode", "single-run"])
    })
    .await
    .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["replies"], 1);
}

#[test]
fn single_run_unreachable_forum_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "forumbot.toml",
        &config(free_port(), free_port()),
    );
    let out = run(&[
        "--config",
        &cfg,
        "agent",
        "--agent",
        "go2-1",
        "--mode",
        "single-run",
    ]);
    assert_eq!(
        out.status.code(),
        Some(3),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}
