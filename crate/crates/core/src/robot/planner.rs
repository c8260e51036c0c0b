//! Planners choose the next primitive given the command and what has
//! happened so far.

use std::sync::{Arc, LazyLock};

use async_trait::async_trait;
use regex::Regex;
use serde_json::{json, Value};

use super::model::*;
use crate::agent::llm::LlmProvider;

pub const UNRECOGNIZED: &str = "unrecognized: ";

#[derive(Debug, Clone, PartialEq)]
pub enum PlannerStep {
    ToolCall { name: String, params: Value },
    Done { note: String },
}

impl PlannerStep {
    pub fn call(name: &str, params: Value) -> Self {
        PlannerStep::ToolCall {
            name: name.to_string(),
            params,
        }
    }

    pub fn done(note: impl Into<String>) -> Self {
        PlannerStep::Done { note: note.into() }
    }
}

/// One executed step, as fed back to the planner.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub name: String,
    pub params: Value,
    pub ok: bool,
    pub observation: String,
}

#[async_trait]
pub trait Planner: Send + Sync {
    async fn step(
        &mut self,
        command: &str,
        history: &[StepRecord],
        primitives: &[&str],
    ) -> PlannerStep;
}

/// Deterministic rule-table planner.
#[derive(Debug, Clone, Default)]
pub struct ScriptedPlanner;

impl ScriptedPlanner {
    pub fn new() -> Self {
        ScriptedPlanner
    }

    /// The full step sequence for `command`, plus any residue that no
    /// rule matched. Steps after the residue are dropped.
    pub fn plan(command: &str) -> (Vec<(String, Value)>, Option<String>) {
        let mut steps = Vec::new();
        for seg in segments(command) {
            match match_segment(&seg) {
                Some(mut s) => steps.append(&mut s),
                None => return (steps, Some(seg)),
            }
        }
        (steps, None)
    }
}

#[async_trait]
impl Planner for ScriptedPlanner {
    async fn step(
        &mut self,
        command: &str,
        history: &[StepRecord],
        _primitives: &[&str],
    ) -> PlannerStep {
        let (steps, residue) = Self::plan(command);
        let done = history.iter().filter(|h| h.ok).count();
        match steps.into_iter().nth(done) {
            Some((name, params)) => PlannerStep::ToolCall { name, params },
            None => match residue {
                Some(r) => PlannerStep::done(format!("{UNRECOGNIZED}{r}")),
                None => PlannerStep::done("command complete"),
            },
        }
    }
}

static SPLIT: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)\s*(?:;|,|\n|\band then\b|\bthen\b|\band\b)\s*").unwrap());
static LIST_MARK: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^(?:\d+[.)]|[-*•])\s*").unwrap());
static FILLER: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^(?:please|now|also|finally|first|next)\b\s*").unwrap());

static TURN_AROUND: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\bturn(?:\s+yourself)?\s+around\b").unwrap());
static TURN: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"\b(?:turn|rotate)\s+(left|right)(?:\s+(?:by\s+)?(\S+)\s*(?:deg|degs|degree|degrees|°))?",
    )
    .unwrap()
});
static MOVE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"\b(?:walk|move|go|step|strafe)\s+(forwards?|ahead|backwards?|back|left|right)(?:\s+(?:for\s+)?(\S+)\s*(?:m|meters?|metres?)\b)?(?:\s+at\s+([0-9.]+)\s*m/s)?",
    )
    .unwrap()
});
static FLIP: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\b(?:back)?flip\b").unwrap());
static HEART: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\bhearts?\b").unwrap());
static HELLO: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\b(?:hello|hi|greet\w*|wave)\b").unwrap());
static PHOTO: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\b(?:photo\w*|picture|pic|look|snapshot|image)\b").unwrap());

fn segments(command: &str) -> Vec<String> {
    SPLIT
        .split(command)
        .map(|s| {
            let s = s.trim().to_lowercase();
            let s = LIST_MARK.replace(&s, "").to_string();
            let s = FILLER.replace(&s, "").to_string();
            s.trim_matches(|c: char| c.is_ascii_punctuation() || c.is_whitespace())
                .to_string()
        })
        .filter(|s| !s.is_empty())
        .collect()
}

fn number(word: &str) -> Option<f64> {
    const WORDS: [&str; 11] = [
        "zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten",
    ];
    match word {
        "a" | "an" => Some(1.0),
        "half" => Some(0.5),
        w => WORDS
            .iter()
            .position(|n| *n == w)
            .map(|i| i as f64)
            .or_else(|| w.parse().ok()),
    }
}

fn move_step(direction: Direction, magnitude: f64, speed: f64) -> (String, Value) {
    (
        ACT_MOVE.to_string(),
        json!({ "direction": direction, "magnitude": magnitude, "speed": speed }),
    )
}

fn match_segment(seg: &str) -> Option<Vec<(String, Value)>> {
    if TURN_AROUND.is_match(seg) {
        return Some(vec![move_step(Direction::TurnLeft, 180.0, 45.0)]);
    }
    if let Some(c) = TURN.captures(seg) {
        let dir = if &c[1] == "left" {
            Direction::TurnLeft
        } else {
            Direction::TurnRight
        };
        let deg = match c.get(2) {
            Some(n) => number(n.as_str())?,
            None => 90.0,
        };
        return Some(vec![move_step(dir, deg, 45.0)]);
    }
    if let Some(c) = MOVE.captures(seg) {
        let dir = match &c[1] {
            "forward" | "forwards" | "ahead" => Direction::Forward,
            "backward" | "backwards" | "back" => Direction::Backward,
            "left" => Direction::StrafeLeft,
            _ => Direction::StrafeRight,
        };
        let dist = match c.get(2) {
            Some(n) => number(n.as_str())?,
            None => 1.0,
        };
        let speed = match c.get(3) {
            Some(s) => s.as_str().parse().ok()?,
            None => 0.5,
        };
        return Some(vec![move_step(dir, dist, speed)]);
    }
    if FLIP.is_match(seg) {
        return Some(vec![(ACT_BACKFLIP.into(), json!({}))]);
    }
    if HEART.is_match(seg) {
        return Some(vec![(ACT_HEART.into(), json!({}))]);
    }
    if HELLO.is_match(seg) {
        return Some(vec![(ACT_HELLO.into(), json!({}))]);
    }
    if PHOTO.is_match(seg) {
        return Some(vec![
            (GET_FRONT_IMAGE.into(), json!({})),
            (IMG_TO_VOLC.into(), json!({})),
        ]);
    }
    None
}

/// Asks a chat provider for one step at a time.
///
/// The reply must contain a JSON object, either
/// `{"tool": "<name>", "params": {...}}` or `{"done": "<note>"}`.
pub struct ProviderPlanner {
    provider: Arc<dyn LlmProvider>,
}

impl ProviderPlanner {
    pub fn new(provider: Arc<dyn LlmProvider>) -> Self {
        ProviderPlanner { provider }
    }

    fn system_prompt(primitives: &[&str]) -> String {
        let mut s = String::from(
            "You control a robot through primitives. Reply with exactly one JSON object: \
             {\"tool\": <primitive>, \"params\": {...}} to act, or {\"done\": <note>} when the command is fulfilled.\n\
             act_move params: direction (forward|backward|strafe_left|strafe_right|turn_left|turn_right), \
             magnitude (meters, degrees for turns), speed (m/s, deg/s for turns).\nPrimitives:",
        );
        for p in primitives {
            s.push_str("\n- ");
            s.push_str(p);
        }
        s
    }
}

fn first_json_object(text: &str) -> Option<Value> {
    let start = text.find('{')?;
    let mut stream = serde_json::Deserializer::from_str(&text[start..]).into_iter::<Value>();
    stream.next()?.ok()
}

#[async_trait]
impl Planner for ProviderPlanner {
    async fn step(
        &mut self,
        command: &str,
        history: &[StepRecord],
        primitives: &[&str],
    ) -> PlannerStep {
        let mut user = format!("Command: {command}\n");
        for (i, h) in history.iter().enumerate() {
            let outcome = if h.ok { "ok" } else { "rejected" };
            user.push_str(&format!(
                "{}. {}({}) -> {outcome}: {}\n",
                i + 1,
                h.name,
                h.params,
                h.observation
            ));
        }
        let reply = match self
            .provider
            .chat(&Self::system_prompt(primitives), &user)
            .await
        {
            Ok(r) => r,
            Err(e) => {
                return PlannerStep::done(format!("{UNRECOGNIZED}planner provider failed: {e}"))
            }
        };
        let Some(v) = first_json_object(&reply) else {
            return PlannerStep::done(format!("{UNRECOGNIZED}{}", reply.trim()));
        };
        if let Some(note) = v.get("done") {
            return PlannerStep::done(note.as_str().unwrap_or("done"));
        }
        match v.get("tool").and_then(Value::as_str) {
            Some(name) => {
                PlannerStep::call(name, v.get("params").cloned().unwrap_or_else(|| json!({})))
            }
            None => PlannerStep::done(format!("{UNRECOGNIZED}{}", reply.trim())),
        }
    }
}
