use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use super::blob::BlobStore;
use super::image::{self, FrontImage};
use super::model::*;
use super::RobotError;

/// Maps any angle into (−π, π].
pub fn normalize_heading(h: f64) -> f64 {
    let r = (h + PI).rem_euclid(2.0 * PI) - PI;
    if r <= -PI {
        r + 2.0 * PI
    } else {
        r
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Posture {
    Standing,
    Gesturing,
    Flipping,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CallOutcome {
    Ok,
    Rejected,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrimitiveCall {
    pub name: String,
    pub params: Value,
    pub started_at: f64,
    pub ended_at: f64,
    pub outcome: CallOutcome,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotState {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub posture: Posture,
    /// Simulated seconds.
    pub clock: f64,
    pub busy_until: f64,
    pub event_log: Vec<PrimitiveCall>,
}

impl Default for RobotState {
    fn default() -> Self {
        RobotState {
            x: 0.0,
            y: 0.0,
            heading: 0.0,
            posture: Posture::Standing,
            clock: 0.0,
            busy_until: 0.0,
            event_log: Vec::new(),
        }
    }
}

impl RobotState {
    pub fn pose(&self) -> (f64, f64, f64) {
        (self.x, self.y, self.heading)
    }
}

/// Result of one successful primitive.
#[derive(Debug, Clone, PartialEq)]
pub enum Observation {
    Moved {
        pose: (f64, f64, f64),
        duration: f64,
    },
    Gestured {
        duration: f64,
    },
    Image(FrontImage),
    Uploaded {
        url: String,
    },
}

impl Observation {
    pub fn describe(&self) -> String {
        match self {
            Observation::Moved { pose, duration } => format!(
                "{} duration={duration:.2}s",
                image::pose_caption(pose.0, pose.1, pose.2)
            ),
            Observation::Gestured { duration } => format!("duration={duration:.2}s"),
            Observation::Image(img) => format!(
                "image {} bytes, caption \"{}\"",
                img.bytes.len(),
                img.caption
            ),
            Observation::Uploaded { url } => format!("url={url}"),
        }
    }
}

/// Deterministic kinematic stand-in for one robot.
#[derive(Debug, Clone)]
pub struct RobotSim {
    model: RobotModel,
    limits: RobotLimits,
    state: RobotState,
    blobs: Option<BlobStore>,
    last_image: Option<FrontImage>,
}

impl RobotSim {
    pub fn new(kind: RobotKind) -> Self {
        RobotSim {
            model: RobotModel::of(kind),
            limits: RobotLimits::for_kind(kind),
            state: RobotState::default(),
            blobs: None,
            last_image: None,
        }
    }

    pub fn with_limits(mut self, limits: RobotLimits) -> Self {
        self.limits = limits;
        self
    }

    pub fn with_blob_store(mut self, store: BlobStore) -> Self {
        self.blobs = Some(store);
        self
    }

    pub fn kind(&self) -> RobotKind {
        self.model.kind
    }

    pub fn model(&self) -> &RobotModel {
        &self.model
    }

    pub fn limits(&self) -> &RobotLimits {
        &self.limits
    }

    pub fn state(&self) -> &RobotState {
        &self.state
    }

    pub fn pose(&self) -> (f64, f64, f64) {
        self.state.pose()
    }

    pub fn event_log(&self) -> &[PrimitiveCall] {
        &self.state.event_log
    }

    pub fn is_busy(&self) -> bool {
        self.state.clock < self.state.busy_until
    }

    /// Advances the clock `secs`, finishing whatever was running.
    pub fn advance(&mut self, secs: f64) {
        self.state.clock += secs.max(0.0);
        if !self.is_busy() {
            self.state.posture = Posture::Standing;
        }
    }

    /// Advances the clock to the end of the running primitive.
    pub fn wait_idle(&mut self) {
        if self.is_busy() {
            self.state.clock = self.state.busy_until;
        }
        self.state.posture = Posture::Standing;
    }

    pub fn export_event_log(&self) -> String {
        let mut out = String::new();
        for call in &self.state.event_log {
            out.push_str(&serde_json::to_string(call).expect("call serializes"));
            out.push('\n');
        }
        out
    }

    fn log(&mut self, name: &str, params: Value, duration: f64, result: &Result<(), RobotError>) {
        let start = self.state.clock;
        let (outcome, error, end) = match result {
            Ok(()) => (CallOutcome::Ok, None, start + duration),
            Err(e @ RobotError::StoreUnwritable(_)) => {
                (CallOutcome::Failed, Some(e.to_string()), start)
            }
            Err(e) => (CallOutcome::Rejected, Some(e.to_string()), start),
        };
        self.state.event_log.push(PrimitiveCall {
            name: name.to_string(),
            params,
            started_at: start,
            ended_at: end,
            outcome,
            error,
        });
    }

    fn check_actuator(&self, name: &str) -> Result<(), RobotError> {
        if !self.model.has(name) {
            return Err(RobotError::PrimitiveUnavailable {
                primitive: name.to_string(),
                kind: self.model.kind,
            });
        }
        if self.is_busy() {
            return Err(RobotError::RobotBusy {
                until: self.state.busy_until,
            });
        }
        Ok(())
    }

    pub fn act_move(
        &mut self,
        direction: Direction,
        magnitude: f64,
        speed: f64,
    ) -> Result<Observation, RobotError> {
        let params = json!({ "direction": direction, "magnitude": magnitude, "speed": speed });
        let cap = if direction.is_turn() {
            self.limits.max_turn_speed_deg
        } else {
            self.limits.max_linear_speed
        };
        let checked = self.check_actuator(ACT_MOVE).and_then(|_| {
            if !(magnitude >= 0.0) || !magnitude.is_finite() {
                Err(RobotError::NegativeMagnitude(magnitude))
            } else if !(speed > 0.0 && speed <= cap) {
                Err(RobotError::SpeedLimit { speed, max: cap })
            } else {
                Ok(())
            }
        });
        let duration = if checked.is_ok() {
            magnitude / speed
        } else {
            0.0
        };
        self.log(ACT_MOVE, params, duration, &checked);
        checked?;

        let s = &mut self.state;
        let (c, sn) = (s.heading.cos(), s.heading.sin());
        match direction {
            Direction::Forward => {
                s.x += magnitude * c;
                s.y += magnitude * sn;
            }
            Direction::Backward => {
                s.x -= magnitude * c;
                s.y -= magnitude * sn;
            }
            Direction::StrafeLeft => {
                s.x -= magnitude * sn;
                s.y += magnitude * c;
            }
            Direction::StrafeRight => {
                s.x += magnitude * sn;
                s.y -= magnitude * c;
            }
            Direction::TurnLeft => {
                s.heading = normalize_heading(s.heading + magnitude.to_radians())
            }
            Direction::TurnRight => {
                s.heading = normalize_heading(s.heading - magnitude.to_radians())
            }
        }
        s.busy_until = s.clock + duration;
        Ok(Observation::Moved {
            pose: s.pose(),
            duration,
        })
    }

    fn gesture(
        &mut self,
        name: &str,
        secs: f64,
        posture: Posture,
    ) -> Result<Observation, RobotError> {
        let checked = self.check_actuator(name);
        self.log(name, json!({}), secs, &checked);
        checked?;
        self.state.posture = posture;
        self.state.busy_until = self.state.clock + secs;
        Ok(Observation::Gestured { duration: secs })
    }

    pub fn act_hello(&mut self) -> Result<Observation, RobotError> {
        self.gesture(ACT_HELLO, self.limits.hello_secs, Posture::Gesturing)
    }

    pub fn act_heart(&mut self) -> Result<Observation, RobotError> {
        self.gesture(ACT_HEART, self.limits.heart_secs, Posture::Gesturing)
    }

    pub fn act_backflip(&mut self) -> Result<Observation, RobotError> {
        self.gesture(ACT_BACKFLIP, self.limits.backflip_secs, Posture::Flipping)
    }

    /// Never blocked by a running primitive.
    pub fn get_front_image(&mut self) -> FrontImage {
        let (x, y, h) = self.pose();
        let img = image::render(&image::pose_caption(x, y, h));
        self.log(GET_FRONT_IMAGE, json!({}), 0.0, &Ok(()));
        self.last_image = Some(img.clone());
        img
    }

    pub fn last_image(&self) -> Option<&FrontImage> {
        self.last_image.as_ref()
    }

    pub fn img_to_volc(&mut self, blob: &[u8]) -> Result<String, RobotError> {
        let params = json!({ "bytes": blob.len() });
        let result = if blob.is_empty() {
            Err(RobotError::EmptyBlob)
        } else {
            match &self.blobs {
                Some(store) => store.put(blob),
                None => Err(RobotError::StoreUnwritable(
                    "no blob store configured".into(),
                )),
            }
        };
        let logged = result.as_ref().map(|_| ()).map_err(Clone::clone);
        self.log(IMG_TO_VOLC, params, 0.0, &logged);
        result
    }

    /// Invokes a primitive by name with JSON parameters, as a planner
    /// would. Unknown names and bad parameters are logged as rejected.
    pub fn invoke(&mut self, name: &str, params: &Value) -> Result<Observation, RobotError> {
        let empty = Map::new();
        let args = params.as_object().unwrap_or(&empty);
        match name {
            ACT_MOVE => {
                let parsed = parse_move(args);
                match parsed {
                    Ok((d, m, s)) => self.act_move(d, m, s),
                    Err(e) => {
                        let checked = self.check_actuator(ACT_MOVE).and(Err(e));
                        self.log(ACT_MOVE, params.clone(), 0.0, &checked);
                        Err(checked.unwrap_err())
                    }
                }
            }
            ACT_HELLO => self.act_hello(),
            ACT_HEART => self.act_heart(),
            ACT_BACKFLIP => self.act_backflip(),
            GET_FRONT_IMAGE => Ok(Observation::Image(self.get_front_image())),
            IMG_TO_VOLC => {
                let blob = self
                    .last_image
                    .as_ref()
                    .map(|i| i.bytes.clone())
                    .unwrap_or_default();
                self.img_to_volc(&blob)
                    .map(|url| Observation::Uploaded { url })
            }
            other => {
                let err = RobotError::PrimitiveUnavailable {
                    primitive: other.to_string(),
                    kind: self.model.kind,
                };
                self.log(other, params.clone(), 0.0, &Err::<(), _>(err.clone()));
                Err(err)
            }
        }
    }
}

fn parse_move(args: &Map<String, Value>) -> Result<(Direction, f64, f64), RobotError> {
    let direction: Direction = args
        .get("direction")
        .and_then(Value::as_str)
        .ok_or_else(|| RobotError::InvalidParams("act_move requires `direction`".into()))?
        .parse()?;
    let magnitude = args
        .get("magnitude")
        .and_then(Value::as_f64)
        .ok_or_else(|| RobotError::InvalidParams("act_move requires numeric `magnitude`".into()))?;
    let speed = match args.get("speed") {
        None | Some(Value::Null) => default_speed(direction),
        Some(v) => v
            .as_f64()
            .ok_or_else(|| RobotError::InvalidParams("`speed` must be numeric".into()))?,
    };
    Ok((direction, magnitude, speed))
}

pub fn default_speed(direction: Direction) -> f64 {
    if direction.is_turn() {
        45.0
    } else {
        0.5
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const EPS: f64 = 1e-9;

    #[test]
    fn forward_one_meter() {
        let mut r = RobotSim::new(RobotKind::Go2);
        let obs = r.act_move(Direction::Forward, 1.0, 0.5).unwrap();
        assert_eq!(
            obs,
            Observation::Moved {
                pose: (1.0, 0.0, 0.0),
                duration: 2.0
            }
        );
        assert_eq!(r.state().busy_until, 2.0);
    }

    #[test]
    fn turn_left_quarter() {
        let mut r = RobotSim::new(RobotKind::Go2);
        r.act_move(Direction::TurnLeft, 90.0, 45.0).unwrap();
        assert!((r.pose().2 - PI / 2.0).abs() < EPS);
        assert_eq!(r.state().busy_until, 2.0);
    }

    #[test]
    fn zero_move_is_identity() {
        let mut r = RobotSim::new(RobotKind::G1);
        r.act_move(Direction::Forward, 0.0, 0.5).unwrap();
        assert_eq!(r.pose(), (0.0, 0.0, 0.0));
        assert!(!r.is_busy());
    }

    #[test]
    fn move_errors() {
        let mut r = RobotSim::new(RobotKind::G1);
        assert!(matches!(
            r.act_move(Direction::Forward, -1.0, 0.5),
            Err(RobotError::NegativeMagnitude(_))
        ));
        assert!(matches!(
            r.act_move(Direction::Forward, 1.0, 0.9),
            Err(RobotError::SpeedLimit { .. })
        ));
        assert!(matches!(
            r.act_move(Direction::TurnLeft, 10.0, 61.0),
            Err(RobotError::SpeedLimit { .. })
        ));
        assert!(matches!(
            r.act_move(Direction::Forward, 1.0, 0.0),
            Err(RobotError::SpeedLimit { .. })
        ));
        r.act_move(Direction::Forward, 1.0, 0.8).unwrap();
        assert!(matches!(r.act_hello(), Err(RobotError::RobotBusy { .. })));
        assert_eq!(r.event_log().len(), 6);
        assert_eq!(
            r.event_log()
                .iter()
                .filter(|c| c.outcome == CallOutcome::Rejected)
                .count(),
            5
        );
    }

    #[test]
    fn gestures() {
        let mut go2 = RobotSim::new(RobotKind::Go2);
        go2.act_backflip().unwrap();
        assert_eq!(go2.state().posture, Posture::Flipping);
        assert_eq!(go2.pose(), (0.0, 0.0, 0.0));
        go2.wait_idle();
        assert_eq!(go2.state().posture, Posture::Standing);
        go2.act_hello().unwrap();
        go2.wait_idle();
        go2.act_hello().unwrap();
        let names: Vec<_> = go2.event_log().iter().map(|c| c.name.as_str()).collect();
        assert_eq!(names, [ACT_BACKFLIP, ACT_HELLO, ACT_HELLO]);
        assert_eq!(go2.state().clock, 4.0);

        let mut g1 = RobotSim::new(RobotKind::G1);
        assert!(matches!(
            g1.act_heart(),
            Err(RobotError::PrimitiveUnavailable { .. })
        ));
    }

    #[test]
    fn perception_while_busy() {
        let mut r = RobotSim::new(RobotKind::Go2);
        r.act_move(Direction::Forward, 1.0, 0.5).unwrap();
        r.act_heart().unwrap_err();
        r.wait_idle();
        r.act_heart().unwrap();
        let a = r.get_front_image();
        let b = r.get_front_image();
        assert_eq!(a, b);
        assert!(a.caption.contains("pose=(1.00, 0.00, 0.00)"));
    }

    #[test]
    fn upload_last_image() {
        let dir = tempfile::tempdir().unwrap();
        let mut r = RobotSim::new(RobotKind::G1).with_blob_store(BlobStore::new(dir.path()));
        assert!(matches!(
            r.invoke(IMG_TO_VOLC, &json!({})),
            Err(RobotError::EmptyBlob)
        ));
        r.invoke(GET_FRONT_IMAGE, &json!({})).unwrap();
        let Observation::Uploaded { url } = r.invoke(IMG_TO_VOLC, &json!({})).unwrap() else {
            panic!("expected upload");
        };
        let store = BlobStore::new(dir.path());
        assert_eq!(store.get(&url).unwrap(), r.last_image().unwrap().bytes);
    }

    #[test]
    fn invoke_logs_unknown_names() {
        let mut r = RobotSim::new(RobotKind::G1);
        assert!(r.invoke("act_fly", &json!({})).is_err());
        assert!(r
            .invoke(ACT_MOVE, &json!({"direction": "up", "magnitude": 1}))
            .is_err());
        assert_eq!(r.event_log().len(), 2);
        r.invoke(
            ACT_MOVE,
            &json!({"direction": "turn_right", "magnitude": 90}),
        )
        .unwrap();
        assert!((r.pose().2 + PI / 2.0).abs() < EPS);
    }

    #[test]
    fn event_log_jsonl() {
        let mut r = RobotSim::new(RobotKind::Go2);
        r.act_hello().unwrap();
        r.act_hello().unwrap_err();
        let text = r.export_event_log();
        let lines: Vec<PrimitiveCall> = text
            .lines()
            .map(|l| serde_json::from_str(l).unwrap())
            .collect();
        assert_eq!(lines, r.event_log());
    }

    #[test]
    fn heading_edges() {
        assert_eq!(normalize_heading(PI), PI);
        assert_eq!(normalize_heading(-PI), PI);
        assert!((normalize_heading(3.0 * PI) - PI).abs() < EPS);
        assert_eq!(normalize_heading(0.0), 0.0);
    }

    proptest! {
        #[test]
        fn heading_in_range(turns in proptest::collection::vec((any::<bool>(), 0.0f64..720.0), 0..20)) {
            let mut r = RobotSim::new(RobotKind::Go2);
            for (left, deg) in turns {
                let d = if left { Direction::TurnLeft } else { Direction::TurnRight };
                r.act_move(d, deg, 90.0).unwrap();
                r.wait_idle();
                let h = r.pose().2;
                prop_assert!(h > -PI && h <= PI);
            }
        }
    }
}
