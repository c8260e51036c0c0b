use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::image::pose_caption;
use super::model::RobotKind;
use super::planner::{Planner, PlannerStep, StepRecord, UNRECOGNIZED};
use super::sim::{Observation, RobotSim};
use super::RobotError;

pub const MAX_ITERATIONS: usize = 16;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecutionResult {
    pub success: bool,
    pub output: String,
    pub error: Option<String>,
}

impl ExecutionResult {
    /// The error is also appended to the transcript.
    pub fn failure(mut output: String, error: impl Into<String>) -> Self {
        let error = error.into();
        if !output.is_empty() && !output.ends_with('\n') {
            output.push('\n');
        }
        output.push_str(&format!("error: {error}"));
        ExecutionResult {
            success: false,
            output,
            error: Some(error),
        }
    }

    /// The raw text handed to the summarizer.
    pub fn raw_report(&self) -> String {
        format!("success: {}\n{}", self.success, self.output)
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct LoopOptions {
    /// Wall seconds slept per simulated second; 0 runs instantly.
    pub realtime_scale: f64,
}

pub async fn vlm_loop(
    command: &str,
    planner: &mut dyn Planner,
    robot: &mut RobotSim,
) -> ExecutionResult {
    vlm_loop_with(command, planner, robot, LoopOptions::default()).await
}

pub async fn vlm_loop_with(
    command: &str,
    planner: &mut dyn Planner,
    robot: &mut RobotSim,
    opts: LoopOptions,
) -> ExecutionResult {
    robot.wait_idle();
    let primitives = robot.model().primitive_names();
    let mut history: Vec<StepRecord> = Vec::new();
    let mut out = format!("command: {command}\n");
    let mut strikes = 0;

    for _ in 0..MAX_ITERATIONS {
        let (name, params) = match planner.step(command, &history, &primitives).await {
            PlannerStep::Done { note } => {
                robot.wait_idle();
                out.push_str(&format!("done: {note}\n"));
                let (x, y, h) = robot.pose();
                out.push_str(&format!("final {}", pose_caption(x, y, h)));
                return match note.strip_prefix(UNRECOGNIZED) {
                    Some(residue) => {
                        ExecutionResult::failure(out, format!("unrecognized command: {residue}"))
                    }
                    None => ExecutionResult {
                        success: true,
                        output: out,
                        error: None,
                    },
                };
            }
            PlannerStep::ToolCall { name, params } => (name, params),
        };

        robot.wait_idle();
        let result = robot.invoke(&name, &params);
        let (ok, observation) = match &result {
            Ok(obs) => (true, obs.describe()),
            Err(e) => (false, format!("{}: {e}", e.code())),
        };
        out.push_str(&format!(
            "[{}] {name} {params} -> {}: {observation}\n",
            history.len() + 1,
            if ok { "ok" } else { "rejected" }
        ));
        history.push(StepRecord {
            name: name.clone(),
            params,
            ok,
            observation: observation.clone(),
        });

        match result {
            Ok(obs) => {
                strikes = 0;
                if opts.realtime_scale > 0.0 {
                    let secs = match obs {
                        Observation::Moved { duration, .. }
                        | Observation::Gestured { duration } => duration,
                        _ => 0.0,
                    };
                    tokio::time::sleep(Duration::from_secs_f64(secs * opts.realtime_scale)).await;
                }
            }
            Err(_) => {
                strikes += 1;
                if strikes >= 2 {
                    robot.wait_idle();
                    return ExecutionResult::failure(
                        out,
                        format!("{name} failed twice: {observation}"),
                    );
                }
            }
        }
    }
    robot.wait_idle();
    ExecutionResult::failure(out, format!("iteration limit ({MAX_ITERATIONS}) reached"))
}

/// Sets up a fresh simulated robot of `kind` and runs the loop on it.
pub async fn drive_robot(
    kind: &str,
    command: &str,
    planner: &mut dyn Planner,
) -> Result<(ExecutionResult, RobotSim), RobotError> {
    let kind: RobotKind = kind.parse()?;
    let mut robot = RobotSim::new(kind);
    let result = vlm_loop(command, planner, &mut robot).await;
    Ok((result, robot))
}
