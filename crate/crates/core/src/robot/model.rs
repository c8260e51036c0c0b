use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::RobotError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RobotKind {
    /// 12-DOF quadruped.
    Go2,
    /// 23-DOF humanoid.
    G1,
}

impl RobotKind {
    pub fn as_str(self) -> &'static str {
        match self {
            RobotKind::Go2 => "go2",
            RobotKind::G1 => "g1",
        }
    }
}

impl fmt::Display for RobotKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RobotKind {
    type Err = RobotError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "go2" => Ok(RobotKind::Go2),
            "g1" => Ok(RobotKind::G1),
            other => Err(RobotError::UnknownRobotKind(other.to_string())),
        }
    }
}

pub const ACT_MOVE: &str = "act_move";
pub const ACT_HELLO: &str = "act_hello";
pub const ACT_HEART: &str = "act_heart";
pub const ACT_BACKFLIP: &str = "act_backflip";
pub const GET_FRONT_IMAGE: &str = "get_front_image";
pub const IMG_TO_VOLC: &str = "img_to_volc";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct PrimitiveDescriptor {
    pub name: &'static str,
    pub description: &'static str,
    pub perception: bool,
}

const MOVE: PrimitiveDescriptor = PrimitiveDescriptor {
    name: ACT_MOVE,
    description: "velocity-controlled locomotion: direction (forward, backward, strafe_left, strafe_right, turn_left, turn_right), magnitude (meters, or degrees for turns), speed (m/s, or deg/s for turns)",
    perception: false,
};
const HELLO: PrimitiveDescriptor = PrimitiveDescriptor {
    name: ACT_HELLO,
    description: "wave hello in place",
    perception: false,
};
const HEART: PrimitiveDescriptor = PrimitiveDescriptor {
    name: ACT_HEART,
    description: "make a heart gesture in place",
    perception: false,
};
const BACKFLIP: PrimitiveDescriptor = PrimitiveDescriptor {
    name: ACT_BACKFLIP,
    description: "perform an in-place backflip",
    perception: false,
};
const FRONT_IMAGE: PrimitiveDescriptor = PrimitiveDescriptor {
    name: GET_FRONT_IMAGE,
    description: "capture a frame from the front camera",
    perception: true,
};
const UPLOAD: PrimitiveDescriptor = PrimitiveDescriptor {
    name: IMG_TO_VOLC,
    description: "upload the last captured frame and return its URL",
    perception: true,
};

const GO2_PRIMITIVES: &[PrimitiveDescriptor] = &[MOVE, HELLO, HEART, BACKFLIP, FRONT_IMAGE, UPLOAD];
const G1_PRIMITIVES: &[PrimitiveDescriptor] = &[MOVE, HELLO, FRONT_IMAGE, UPLOAD];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RobotModel {
    pub kind: RobotKind,
    /// Metadata only; no joint-level simulation.
    pub dof: u32,
    pub primitives: &'static [PrimitiveDescriptor],
}

impl RobotModel {
    pub fn of(kind: RobotKind) -> Self {
        match kind {
            RobotKind::Go2 => RobotModel {
                kind,
                dof: 12,
                primitives: GO2_PRIMITIVES,
            },
            RobotKind::G1 => RobotModel {
                kind,
                dof: 23,
                primitives: G1_PRIMITIVES,
            },
        }
    }

    pub fn has(&self, primitive: &str) -> bool {
        self.primitives.iter().any(|p| p.name == primitive)
    }

    pub fn primitive_names(&self) -> Vec<&'static str> {
        self.primitives.iter().map(|p| p.name).collect()
    }
}

/// Speed caps and gesture durations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobotLimits {
    pub max_linear_speed: f64,
    pub max_turn_speed_deg: f64,
    pub hello_secs: f64,
    pub heart_secs: f64,
    pub backflip_secs: f64,
}

impl RobotLimits {
    pub fn for_kind(kind: RobotKind) -> Self {
        let (lin, turn) = match kind {
            RobotKind::Go2 => (1.5, 90.0),
            RobotKind::G1 => (0.8, 60.0),
        };
        RobotLimits {
            max_linear_speed: lin,
            max_turn_speed_deg: turn,
            hello_secs: 2.0,
            heart_secs: 3.0,
            backflip_secs: 2.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Forward,
    Backward,
    StrafeLeft,
    StrafeRight,
    TurnLeft,
    TurnRight,
}

impl Direction {
    pub const ALL: [Direction; 6] = [
        Direction::Forward,
        Direction::Backward,
        Direction::StrafeLeft,
        Direction::StrafeRight,
        Direction::TurnLeft,
        Direction::TurnRight,
    ];

    pub fn is_turn(self) -> bool {
        matches!(self, Direction::TurnLeft | Direction::TurnRight)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Forward => "forward",
            Direction::Backward => "backward",
            Direction::StrafeLeft => "strafe_left",
            Direction::StrafeRight => "strafe_right",
            Direction::TurnLeft => "turn_left",
            Direction::TurnRight => "turn_right",
        }
    }
}

impl FromStr for Direction {
    type Err = RobotError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Direction::ALL
            .into_iter()
            .find(|d| d.as_str() == s)
            .ok_or_else(|| RobotError::InvalidParams(format!("unknown direction `{s}`")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn primitive_sets() {
        let go2 = RobotModel::of(RobotKind::Go2);
        let g1 = RobotModel::of(RobotKind::G1);
        assert_eq!(
            go2.primitive_names(),
            [
                ACT_MOVE,
                ACT_HELLO,
                ACT_HEART,
                ACT_BACKFLIP,
                GET_FRONT_IMAGE,
                IMG_TO_VOLC
            ]
        );
        assert_eq!(
            g1.primitive_names(),
            [ACT_MOVE, ACT_HELLO, GET_FRONT_IMAGE, IMG_TO_VOLC]
        );
        assert_eq!((go2.dof, g1.dof), (12, 23));
    }

    #[test]
    fn kind_parsing() {
        assert_eq!("GO2".parse::<RobotKind>().unwrap(), RobotKind::Go2);
        assert!(matches!(
            "drone".parse::<RobotKind>(),
            Err(RobotError::UnknownRobotKind(_))
        ));
    }
}
