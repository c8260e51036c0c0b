//! One PASS/FAIL line per acceptance criterion. Runs as a plain binary so the
//! lines are always visible; exits non-zero if any criterion fails.

mod common;

use std::collections::HashSet;
use std::f64::consts::PI;
use std::future::Future;
use std::pin::Pin;
use std::sync::Arc;
use std::time::{Duration, Instant};

use chrono::{DateTime, Utc};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde_json::{json, Value};
use tokio::sync::mpsc;
use tokio_util::sync::CancellationToken;

use common::{Fixture, AGENT_PASSWORD};
use forumbot::agent::{extract_fallback, Agent, AgentEvent, ScriptedProvider};
use forumbot::forum::http::is_forum_write;
use forumbot::forum::TopicDetail;
use forumbot::mcp::server::{ServerSettings, ToolServer};
use forumbot::mcp::tools::TOOLS;
use forumbot::mcp::{ForumTools, LocalTransport};
use forumbot::meta::AgentStatus;
use forumbot::robot::{normalize_heading, Direction, RobotKind, RobotLimits, RobotSim};
use forumbot::safety::{check_cooldown, check_rate, ReasonCode, SafetyPolicy};

type Outcome = Result<String, String>;
type Check = fn() -> Pin<Box<dyn Future<Output = Outcome>>>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

const FULL_CYCLE_COMMAND: &str = "walk forward 1 meter then say hello";

fn agent_replies(detail: &TopicDetail) -> Vec<&forumbot::forum::PostView> {
    detail
        .posts
        .iter()
        .skip(1)
        .filter(|p| p.agent_meta.is_some())
        .collect()
}

/// Scenario 1: forum plus one polling go2 agent. With `scripted` the
/// provider returns the command; otherwise no provider is configured.
async fn full_cycle(scripted: bool) -> Outcome {
    let started = Instant::now();
    let fx = Fixture::start().await;
    let mut agent = fx.agent("go2-1", RobotKind::Go2).await;
    if scripted {
        agent = agent.with_provider(Arc::new(ScriptedProvider::new(
            Some(FULL_CYCLE_COMMAND.into()),
            None,
        )));
    }
    let registry = agent.registry().clone();
    let stop = CancellationToken::new();
    let task = {
        let stop = stop.clone();
        tokio::spawn(async move {
            agent.run_loop(stop).await;
            agent.close().await;
        })
    };

    let posted = Instant::now();
    let tid = fx
        .post(
            "alice",
            "Warm-up",
            &format!("@quadruped {FULL_CYCLE_COMMAND}"),
        )
        .await;
    let mut reply_after = None;
    while posted.elapsed() < Duration::from_secs(3) {
        let detail = fx.forum.get_topic(tid).unwrap();
        if !agent_replies(&detail).is_empty() {
            reply_after = Some(posted.elapsed());
            break;
        }
        tokio::time::sleep(Duration::from_millis(20)).await;
    }
    // one more poll interval to catch duplicates
    tokio::time::sleep(Duration::from_millis(1200)).await;
    stop.cancel();
    let _ = task.await;

    let reply_after = reply_after.ok_or("no agent reply within 3 s")?;
    let detail = fx.forum.get_topic(tid).unwrap();
    let replies = agent_replies(&detail);
    ensure!(
        replies.len() == 1,
        "expected 1 agent reply, got {}",
        replies.len()
    );
    let meta = replies[0].agent_meta.as_ref().unwrap();
    ensure!(
        meta.status == AgentStatus::Success,
        "reply status {}",
        meta.status
    );
    ensure!(
        replies[0].content.contains(FULL_CYCLE_COMMAND),
        "reply does not name the command: {}",
        replies[0].content
    );

    let state = registry.snapshot("go2-1").ok_or("robot missing")?;
    let (x, y, h) = state.pose();
    ensure!(
        (x - 1.0).abs() <= 1e-6 && y.abs() <= 1e-6 && h.abs() <= 1e-6,
        "pose ({x}, {y}, {h})"
    );
    let log: Vec<(String, Value)> = state
        .event_log
        .iter()
        .map(|c| (c.name.clone(), c.params.clone()))
        .collect();
    let expected = vec![
        (
            "act_move".to_string(),
            json!({"direction": "forward", "magnitude": 1.0, "speed": 0.5}),
        ),
        ("act_hello".to_string(), json!({})),
    ];
    ensure!(log == expected, "event log {log:?}");
    ensure!(
        started.elapsed() < Duration::from_secs(10),
        "runtime {:?}",
        started.elapsed()
    );
    Ok(format!(
        "reply after {:.0} ms, pose (1, 0, 0), log [act_move(forward,1.0,0.5), act_hello], runtime {:.1} s",
        reply_after.as_secs_f64() * 1000.0,
        started.elapsed().as_secs_f64()
    ))
}

async fn c1_full_cycle() -> Outcome {
    full_cycle(true).await
}

fn tool_server(fx: &Fixture) -> ToolServer {
    let mut s = ToolServer::new(ServerSettings {
        forum_base_url: fx.url(),
        username: Some("quadruped".into()),
        password: Some(AGENT_PASSWORD.into()),
        agent_type: "go2".into(),
        agent_id: "go2-1".into(),
        admin_credential: Some(common::ADMIN_TOKEN.into()),
    });
    s.handle_initialize(None).unwrap();
    s
}

/// Argument sets that each break the tool's schema in a different way.
fn schema_violations(tool: &str) -> Vec<Value> {
    let mut v = vec![
        json!("not an object"),
        json!([1, 2]),
        json!({"unexpected": 1}),
    ];
    match tool {
        "list_boards" => v.extend([json!({"page": 0}), json!({"page": "1"})]),
        "list_posts" => v.extend([json!({}), json!({"board_id": -1}), json!({"board_id": 1.5})]),
        "get_topic" => v.extend([json!({}), json!({"topic_id": "7"})]),
        "create_topic" => v.extend([
            json!({"board_id": 2, "title": "t"}),
            json!({"board_id": 2, "title": "", "content": "c"}),
            json!({"board_id": 2, "title": "x".repeat(201), "content": "c"}),
            json!({"board_id": 2, "title": "t", "content": "c", "status": "done"}),
        ]),
        "reply_to_topic" => v.extend([
            json!({"topic_id": 1, "content": "c"}),
            json!({"topic_id": 1, "content": "   ", "status": "info"}),
            json!({"topic_id": 1, "content": "c", "status": "ok"}),
        ]),
        "login_account" => v.extend([
            json!({"username": "alice"}),
            json!({"username": 3, "password": "p"}),
        ]),
        "register_account" => v.extend([
            json!({"username": "z", "password": "p"}),
            json!({"username": "z", "password": "p", "mode": "root"}),
            json!({"username": "z", "password": "p", "mode": "admin", "role": "king"}),
        ]),
        _ => {}
    }
    v
}

async fn c2_tool_conformance() -> Outcome {
    let started = Instant::now();
    let fx = Fixture::start().await;
    let mut server = tool_server(&fx);
    let tid = fx.post("alice", "seed", "hello").await;

    let valid: Vec<(&str, Value)> = vec![
        ("get_manual", json!({})),
        ("list_boards", json!({"page": 1})),
        ("list_posts", json!({"board_id": fx.commands})),
        ("get_topic", json!({"topic_id": tid})),
        (
            "create_topic",
            json!({"board_id": fx.commands, "title": "Status", "content": "ok", "status": "info"}),
        ),
        (
            "reply_to_topic",
            json!({"topic_id": tid, "content": "ack", "status": "success"}),
        ),
        (
            "register_account",
            json!({"username": "go2_agent", "password": "pw", "mode": "admin", "role": "operator"}),
        ),
        (
            "login_account",
            json!({"username": "go2_agent", "password": "pw"}),
        ),
    ];
    ensure!(
        valid.len() == TOOLS.len(),
        "{} tools listed, {} checked",
        TOOLS.len(),
        valid.len()
    );
    let mut traces = HashSet::new();
    let mut calls = 0usize;
    for (name, args) in &valid {
        let env = server.dispatch_tool(name, args).await;
        calls += 1;
        ensure!(env.is_well_formed() && env.success, "{name}: {env:?}");
        ensure!(env.tool == *name, "{name}: envelope names {}", env.tool);
        traces.insert(env.trace_id);
    }

    let mut violations = 0usize;
    for spec in TOOLS {
        for args in schema_violations(spec.name) {
            let before = fx.forum.state_digest();
            let env = server.dispatch_tool(spec.name, &args).await;
            calls += 1;
            violations += 1;
            ensure!(
                env.is_well_formed() && !env.success,
                "{} accepted {args}",
                spec.name
            );
            ensure!(
                fx.forum.state_digest() == before,
                "{} with {args} changed forum state",
                spec.name
            );
            traces.insert(env.trace_id);
        }
    }

    let cheap: Vec<(&str, Value)> = vec![
        ("get_manual", json!({})),
        ("list_boards", json!({})),
        ("get_topic", json!({"topic_id": tid})),
        ("create_topic", json!({"board_id": "x"})),
        ("reply_to_topic", json!({"topic_id": tid})),
        ("no_such_tool", json!({})),
    ];
    let mut i = 0;
    while calls < 10_000 {
        let (name, args) = &cheap[i % cheap.len()];
        let env = server.dispatch_tool(name, args).await;
        ensure!(env.is_well_formed(), "{name}: malformed {env:?}");
        traces.insert(env.trace_id);
        calls += 1;
        i += 1;
    }
    ensure!(
        traces.len() == calls,
        "{} distinct trace ids over {calls} calls",
        traces.len()
    );
    let elapsed = started.elapsed();
    ensure!(elapsed < Duration::from_secs(60), "runtime {elapsed:?}");
    Ok(format!(
        "8/8 tools well formed, {calls} calls with {calls} distinct trace ids, {violations} schema violations left state unchanged, {:.1} s",
        elapsed.as_secs_f64()
    ))
}

async fn c3_at_most_once() -> Outcome {
    let fx = Fixture::start().await;
    let mut agent = fx.agent("go2-1", RobotKind::Go2).await;
    // the agent's own posts, mentions included, must be skipped
    for i in 0..3 {
        agent
            .tools()
            .create_topic(
                fx.commands,
                &format!("report {i}"),
                "@quadruped battery fine",
                AgentStatus::Info,
            )
            .await
            .map_err(|e| e.to_string())?;
    }
    let tid = fx.post("alice", "cmd", "@quadruped say hello").await;
    let (mut executions, mut replies) = (0, 0);
    for _ in 0..20 {
        let r = agent.scan_once().await.map_err(|e| e.to_string())?;
        executions += r.executions;
        replies += r.replies;
    }
    agent.close().await;
    ensure!(
        executions == 1 && replies == 1,
        "{executions} executions, {replies} replies over 20 scans"
    );
    ensure!(
        fx.forum.get_topic(tid).unwrap().posts.len() == 2,
        "command topic has extra posts"
    );

    let fx = Fixture::start().await;
    let mut go2 = fx.agent("go2-1", RobotKind::Go2).await;
    let mut g1 = fx.agent("g1-1", RobotKind::G1).await;
    let tid = fx
        .post("alice", "both", "@quadruped say hello\n@humanoid say hello")
        .await;
    let count = |fx: &Fixture| {
        fx.forum
            .list_topics(fx.commands, 1)
            .unwrap()
            .items
            .iter()
            .map(|t| 1 + t.reply_count)
            .sum::<u64>()
    };
    let mut quiet = 0;
    let mut rounds = 0;
    let mut last = count(&fx);
    while quiet < 5 {
        ensure!(rounds < 50, "no quiescence after 50 rounds");
        go2.scan_once().await.map_err(|e| e.to_string())?;
        g1.scan_once().await.map_err(|e| e.to_string())?;
        let now = count(&fx);
        quiet = if now == last { quiet + 1 } else { 0 };
        last = now;
        rounds += 1;
    }
    go2.close().await;
    g1.close().await;
    let detail = fx.forum.get_topic(tid).unwrap();
    let by = |t: &str| {
        agent_replies(&detail)
            .iter()
            .filter(|p| p.agent_meta.as_ref().unwrap().agent_type == t)
            .count()
    };
    ensure!(
        by("go2") == 1 && by("g1") == 1,
        "go2 {} replies, g1 {} replies",
        by("go2"),
        by("g1")
    );
    ensure!(
        detail.posts.len() == 3,
        "dual-mention topic has {} posts",
        detail.posts.len()
    );
    Ok(format!(
        "1 execution and 1 reply over 20 scans; go2 + g1 quiet after {rounds} rounds with one reply each"
    ))
}

async fn c4_latency() -> Outcome {
    let fx = Fixture::start().await;
    let mut cfg = fx.agent_config("go2-1", RobotKind::Go2);
    cfg.safety_enabled = false;
    let (tx, mut rx) = mpsc::unbounded_channel();
    let mut agent = Agent::connect(cfg)
        .await
        .map_err(|e| e.to_string())?
        .with_events(tx);
    let stop = CancellationToken::new();
    let task = {
        let stop = stop.clone();
        tokio::spawn(async move {
            agent.run_loop(stop).await;
            agent.close().await;
        })
    };
    let mut rng = StdRng::seed_from_u64(4);
    let mut client = fx.client_as("alice").await;
    let mut posted: Vec<(u64, DateTime<Utc>)> = Vec::new();
    for i in 0..50 {
        tokio::time::sleep(Duration::from_millis(rng.random_range(0..1000))).await;
        let t = client
            .create_topic(fx.commands, &format!("cmd {i}"), "@quadruped say hello")
            .await
            .map_err(|e| e.to_string())?;
        posted.push((t.id, t.created_at));
    }
    tokio::time::sleep(Duration::from_millis(1500)).await;
    stop.cancel();
    let _ = task.await;

    let mut detected = std::collections::HashMap::new();
    let mut max_scan = 0.0f64;
    while let Ok(e) = rx.try_recv() {
        match e {
            AgentEvent::Detected { topic_id, at } => {
                detected.insert(topic_id, at);
            }
            AgentEvent::Scanned {
                started, finished, ..
            } => {
                max_scan =
                    max_scan.max((finished - started).num_microseconds().unwrap() as f64 / 1e6);
            }
            _ => {}
        }
    }
    let mut max_delay = 0.0f64;
    for (tid, at) in &posted {
        let d = detected
            .get(tid)
            .ok_or(format!("topic {tid} never detected"))?;
        max_delay = max_delay.max((*d - *at).num_microseconds().unwrap() as f64 / 1e6);
    }
    // timer wake-up jitter
    let bound = 1.0 + max_scan + 0.05;
    ensure!(
        max_delay <= bound,
        "max delay {max_delay:.3} s exceeds {bound:.3} s"
    );
    Ok(format!(
        "50 posts, max detection delay {:.0} ms, bound 1 s + scan {:.0} ms",
        max_delay * 1000.0,
        max_scan * 1000.0
    ))
}

fn unit(dir: Direction, h: f64) -> (f64, f64) {
    match dir {
        Direction::Forward => (h.cos(), h.sin()),
        Direction::Backward => (-h.cos(), -h.sin()),
        Direction::StrafeLeft => (-h.sin(), h.cos()),
        Direction::StrafeRight => (h.sin(), -h.cos()),
        _ => (0.0, 0.0),
    }
}

/// Euler integration of one command at dt = 0.01 s.
fn euler(pose: (f64, f64, f64), dir: Direction, magnitude: f64, speed: f64) -> (f64, f64, f64) {
    let (mut x, mut y, mut h) = pose;
    let duration = magnitude / speed;
    let dt = 0.01;
    let steps = (duration / dt).floor() as u64;
    let rem = duration - steps as f64 * dt;
    let mut step = |dt: f64| match dir {
        Direction::TurnLeft => h += (speed * dt).to_radians(),
        Direction::TurnRight => h -= (speed * dt).to_radians(),
        _ => {
            let (ux, uy) = unit(dir, h);
            x += ux * speed * dt;
            y += uy * speed * dt;
        }
    };
    for _ in 0..steps {
        step(dt);
    }
    step(rem);
    (x, y, h)
}

fn angle_diff(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(2.0 * PI);
    d.min(2.0 * PI - d)
}

async fn c5_kinematics() -> Outcome {
    let started = Instant::now();
    let mut rng = StdRng::seed_from_u64(5);
    let mut calls = 0;
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let kind = if rng.random_bool(0.5) {
            RobotKind::Go2
        } else {
            RobotKind::G1
        };
        let limits = RobotLimits::for_kind(kind);
        let mut sim = RobotSim::new(kind);
        for _ in 0..rng.random_range(1..=8) {
            let dir = Direction::ALL[rng.random_range(0..Direction::ALL.len())];
            let (mag, speed) = if dir.is_turn() {
                (
                    rng.random_range(0.0..360.0),
                    rng.random_range(1.0..=limits.max_turn_speed_deg),
                )
            } else {
                (
                    rng.random_range(0.0..3.0),
                    rng.random_range(0.05..=limits.max_linear_speed),
                )
            };
            let before = sim.pose();
            sim.act_move(dir, mag, speed).map_err(|e| e.to_string())?;
            sim.wait_idle();
            let (x, y, h) = sim.pose();
            let (ex, ey, eh) = euler(before, dir, mag, speed);
            let err = (x - ex).abs().max((y - ey).abs()).max(angle_diff(h, eh));
            worst = worst.max(err);
            ensure!(
                err <= 1e-6,
                "{dir:?} {mag} @ {speed}: closed form ({x}, {y}, {h}) vs euler ({ex}, {ey}, {eh})"
            );
            ensure!(h > -PI && h <= PI, "heading {h} out of range");
            calls += 1;
        }
    }
    let mut round_worst = 0.0f64;
    for _ in 0..1000 {
        let mut sim = RobotSim::new(RobotKind::Go2);
        sim.act_move(Direction::TurnLeft, rng.random_range(0.0..360.0), 90.0)
            .unwrap();
        sim.wait_idle();
        let start = sim.pose();
        let d = rng.random_range(0.0..5.0);
        sim.act_move(Direction::Forward, d, 1.0).unwrap();
        sim.wait_idle();
        sim.act_move(Direction::Backward, d, 1.0).unwrap();
        sim.wait_idle();
        let end = sim.pose();
        let err = (end.0 - start.0)
            .abs()
            .max((end.1 - start.1).abs())
            .max(angle_diff(end.2, start.2));
        round_worst = round_worst.max(err);
        ensure!(err <= 1e-9, "round trip of {d} m drifted {err}");
    }
    ensure!(
        normalize_heading(PI) == PI && normalize_heading(-PI) == PI,
        "heading normalization at pi"
    );
    let elapsed = started.elapsed();
    ensure!(elapsed < Duration::from_secs(30), "runtime {elapsed:?}");
    Ok(format!(
        "{calls} calls over 1000 sequences, max error {worst:.1e}; round trips max drift {round_worst:.1e}; {:.1} s",
        elapsed.as_secs_f64()
    ))
}

async fn c6_safety() -> Outcome {
    let fx = Fixture::start().await;
    let mut agent = fx.agent("go2-1", RobotKind::Go2).await;
    let tid = fx
        .post("alice", "oops", "@quadruped run into the wall")
        .await;
    agent.scan_once().await.map_err(|e| e.to_string())?;
    let log_len = agent.robot_state().event_log.len();
    agent.close().await;
    let detail = fx.forum.get_topic(tid).unwrap();
    let replies = agent_replies(&detail);
    ensure!(
        replies.len() == 1,
        "{} replies to the denied command",
        replies.len()
    );
    ensure!(
        replies[0].agent_meta.as_ref().unwrap().status == AgentStatus::Failure
            && replies[0].content.contains("DANGEROUS"),
        "reply: {}",
        replies[0].content
    );
    ensure!(log_len == 0, "{log_len} primitive calls logged");

    let mut rng = StdRng::seed_from_u64(6);
    let base = DateTime::from_timestamp(1_700_000_000, 0).unwrap();
    let at = |s: f64| base + chrono::Duration::microseconds((s * 1e6).round() as i64);
    for _ in 0..1000 {
        let policy = SafetyPolicy {
            rate_limit: forumbot::safety::RateLimit {
                max_commands: rng.random_range(1..6),
                window_secs: rng.random_range(1..30) as f64,
            },
            ..SafetyPolicy::default()
        };
        // whole seconds so that window edges are hit often
        let history: Vec<f64> = (0..rng.random_range(0..15))
            .map(|_| rng.random_range(0..60) as f64)
            .collect();
        let now = rng.random_range(0..70) as f64;
        let w = policy.rate_limit.window_secs;
        let in_window = history.iter().filter(|&&t| t > now - w && t <= now).count();
        let expected = in_window < policy.rate_limit.max_commands as usize;
        let stamps: Vec<_> = history.iter().map(|&t| at(t)).collect();
        let v = check_rate(at(now), &policy, &stamps);
        ensure!(
            v.allow == expected,
            "history {history:?} now {now} window {w} max {}: got {}",
            policy.rate_limit.max_commands,
            v.allow
        );
        ensure!(
            v.allow || v.reason_code == ReasonCode::RateLimited,
            "wrong reason {:?}",
            v.reason_code
        );
    }

    let policy = SafetyPolicy::default();
    let cd = policy.cooldown_secs;
    let eps = 1e-3;
    let before = check_cooldown(at(cd - eps), &policy, Some(at(0.0)));
    let after = check_cooldown(at(cd + eps), &policy, Some(at(0.0)));
    ensure!(
        !before.allow && before.reason_code == ReasonCode::Cooldown,
        "allowed at cooldown - eps"
    );
    ensure!(after.allow, "denied at cooldown + eps");
    Ok(format!(
        "\"run into the wall\" denied DANGEROUS with 0 primitive calls; rate limiter matches oracle on 1000 sets; cooldown {cd} s denies at -{eps} and allows at +{eps}"
    ))
}

async fn c7_fallback() -> Outcome {
    let prefixes = [
        "",
        "Hey",
        "Hi team,",
        "Urgent:",
        "ok so",
        "Please",
        "[ops]",
        "FYI -",
        "yo!",
        "Morning all.",
        "Quick one:",
        "(test)",
    ];
    let commands = [
        "walk forward 1 meter then say hello",
        "turn left 90 degrees",
        "take a photo",
        "do a backflip",
        "strafe right 2 meters at 0.3 m/s",
        "say hello and make a heart",
        "move back half a meter",
    ];
    let mut n = 0;
    for p in prefixes {
        for c in commands {
            let post = format!("{p} @quadruped {c}");
            let r = extract_fallback(post.trim_start(), "@quadruped");
            ensure!(
                r.command.as_deref() == Some(c),
                "{post:?} extracted {:?}",
                r.command
            );
            n += 1;
        }
    }
    let scenario = full_cycle(false)
        .await
        .map_err(|e| format!("scenario 1 without provider: {e}"))?;
    Ok(format!(
        "{n} corpus posts extracted; scenario 1 without provider: {scenario}"
    ))
}

async fn c8_identity() -> Outcome {
    let fx = Fixture::start().await;
    let server = ToolServer::new(ServerSettings {
        forum_base_url: fx.url(),
        username: None,
        password: None,
        agent_type: "go2".into(),
        agent_id: "go2-1".into(),
        admin_credential: None,
    });
    let tools = ForumTools::new(Arc::new(LocalTransport::new(server)));
    let alice = tools
        .login_account("alice", "alice-password")
        .await
        .map_err(|e| e.to_string())?;
    let t1 = tools
        .create_topic(fx.commands, "first", "from alice", AgentStatus::Info)
        .await
        .map_err(|e| e.to_string())?;
    let carol = tools
        .login_account("carol", "carol-password")
        .await
        .map_err(|e| e.to_string())?;
    let t2 = tools
        .create_topic(fx.commands, "second", "from carol", AgentStatus::Info)
        .await
        .map_err(|e| e.to_string())?;
    ensure!(
        t1.author_id == alice.id && t2.author_id == carol.id,
        "authors {} and {}",
        t1.author_id,
        t2.author_id
    );
    ensure!(
        t1.author_id != t2.author_id,
        "both posts by {}",
        t1.author_id
    );

    let reqs = fx.server.requests();
    let writes: Vec<_> = reqs.iter().filter(|r| is_forum_write(r)).collect();
    ensure!(writes.len() == 2, "{} writes recorded", writes.len());
    let session = |cookie: &Option<String>| {
        cookie.as_deref().and_then(|c| {
            c.split(';')
                .find_map(|kv| kv.trim().strip_prefix("session=").map(str::to_string))
        })
    };
    let s1 = session(&writes[0].cookie).ok_or("first write had no session cookie")?;
    let s2 = session(&writes[1].cookie).ok_or("second write had no session cookie")?;
    ensure!(s1 != s2, "same session for both identities");
    ensure!(
        writes[0].csrf != writes[1].csrf,
        "csrf token reused across identities"
    );
    let second_login = reqs
        .iter()
        .rposition(|r| r.path == "/api/v1/auth/login")
        .ok_or("no login recorded")?;
    let leaked = reqs[second_login..]
        .iter()
        .filter(|r| r.cookie.as_deref().is_some_and(|c| c.contains(&s1)))
        .count();
    ensure!(
        leaked == 0,
        "{leaked} requests after the switch carried alice's session"
    );
    ensure!(
        reqs[second_login].cookie.is_none(),
        "login request carried cookie {:?}",
        reqs[second_login].cookie
    );
    Ok(format!(
        "posts by author {} then {}; sessions and csrf tokens differ; no cookie carried over",
        t1.author_id, t2.author_id
    ))
}

fn main() {
    let rt = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .unwrap();
    let checks: [(u32, &str, Check); 8] = [
        (1, "full cycle", || Box::pin(c1_full_cycle())),
        (2, "tool conformance", || Box::pin(c2_tool_conformance())),
        (3, "at-most-once and loop prevention", || {
            Box::pin(c3_at_most_once())
        }),
        (4, "detection latency", || Box::pin(c4_latency())),
        (5, "kinematics oracle", || Box::pin(c5_kinematics())),
        (6, "safety", || Box::pin(c6_safety())),
        (7, "fallback parity", || Box::pin(c7_fallback())),
        (8, "identity switching", || Box::pin(c8_identity())),
    ];
    let filter: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    let mut failed = 0;
    for (n, name, check) in checks {
        if !filter.is_empty()
            && !filter
                .iter()
                .any(|f| name.contains(f.as_str()) || *f == n.to_string())
        {
            continue;
        }
        let t = Instant::now();
        let outcome = rt.block_on(check());
        match outcome {
            Ok(detail) => println!(
                "criterion {n} ({name}): PASS in {:.1} s - {detail}",
                t.elapsed().as_secs_f64()
            ),
            Err(why) => {
                failed += 1;
                println!("criterion {n} ({name}): FAIL - {why}");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
