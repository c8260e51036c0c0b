//! Simulated robot layer: kinematic robots, primitives, planners and the
//! iterative tool-calling loop.

pub mod blob;
pub mod driver;
pub mod image;
pub mod model;
pub mod planner;
pub mod registry;
pub mod sim;

use thiserror::Error;

pub use blob::BlobStore;
pub use driver::{
    drive_robot, vlm_loop, vlm_loop_with, ExecutionResult, LoopOptions, MAX_ITERATIONS,
};
pub use model::{Direction, RobotKind, RobotLimits, RobotModel};
pub use planner::{Planner, PlannerStep, ProviderPlanner, ScriptedPlanner, StepRecord};
pub use registry::{RobotLease, RobotRegistry};
pub use sim::{
    normalize_heading, CallOutcome, Observation, Posture, PrimitiveCall, RobotSim, RobotState,
};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum RobotError {
    #[error("robot busy until t={until:.2}s")]
    RobotBusy { until: f64 },
    #[error("speed {speed} outside (0, {max}]")]
    SpeedLimit { speed: f64, max: f64 },
    #[error("negative magnitude {0}")]
    NegativeMagnitude(f64),
    #[error("{primitive} is not available on {kind}")]
    PrimitiveUnavailable { primitive: String, kind: RobotKind },
    #[error("blob store unwritable: {0}")]
    StoreUnwritable(String),
    #[error("empty blob")]
    EmptyBlob,
    #[error("unknown robot kind `{0}`")]
    UnknownRobotKind(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("robot {0} is leased to another controller")]
    Leased(String),
    #[error("no robot registered as {0}")]
    UnknownRobot(String),
}

impl RobotError {
    pub fn code(&self) -> &'static str {
        match self {
            RobotError::RobotBusy { .. } => "ROBOT_BUSY",
            RobotError::SpeedLimit { .. } => "SPEED_LIMIT",
            RobotError::NegativeMagnitude(_) => "NEGATIVE_MAGNITUDE",
            RobotError::PrimitiveUnavailable { .. } => "PRIMITIVE_UNAVAILABLE",
            RobotError::StoreUnwritable(_) => "STORE_UNWRITABLE",
            RobotError::EmptyBlob => "EMPTY_BLOB",
            RobotError::UnknownRobotKind(_) => "UNKNOWN_ROBOT_KIND",
            RobotError::InvalidParams(_) => "INVALID_PARAMS",
            RobotError::Leased(_) => "ROBOT_LEASED",
            RobotError::UnknownRobot(_) => "UNKNOWN_ROBOT",
        }
    }
}
