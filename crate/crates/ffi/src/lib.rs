//! C ABI over the robot simulator, the safety guard and the post helpers.
//!
//! Handles are opaque and owned by the caller until passed to the matching
//! `_free`. Strings returned through `out` pointers are heap allocated and
//! must be released with [`fb_string_free`]. Every function returns an
//! [`FbStatus`]; on failure [`fb_last_error`] describes the cause.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use chrono::{TimeZone, Utc};
use forumbot::agent::extract_fallback;
use forumbot::agent::mentions_me;
use forumbot::forum::Role;
use forumbot::meta::{self, AgentMeta, AgentStatus};
use forumbot::robot::{
    vlm_loop, BlobStore, Direction, RobotError, RobotKind, RobotSim, ScriptedPlanner,
};
use forumbot::safety::{ReasonCode, SafetyGuard, SafetyPolicy};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FbStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    UnknownRobotKind = 4,
    RobotBusy = 5,
    SpeedLimit = 6,
    NegativeMagnitude = 7,
    PrimitiveUnavailable = 8,
    StoreError = 9,
    CommandFailed = 10,
    NotFound = 11,
    Panic = 99,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FbReason {
    Ok = 0,
    Dangerous = 1,
    RateLimited = 2,
    Cooldown = 3,
    RoleDenied = 4,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct FbPose {
    pub x: f64,
    pub y: f64,
    /// Radians in (-pi, pi].
    pub heading: f64,
    /// Simulated seconds.
    pub clock: f64,
    pub busy_until: f64,
}

/// Opaque simulated robot.
pub struct FbRobot {
    sim: RobotSim,
}

/// Opaque safety guard with its own rate and cooldown history.
pub struct FbSafetyGuard {
    guard: SafetyGuard,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let s = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(s).ok());
}

fn fail(status: FbStatus, msg: impl Into<String>) -> FbStatus {
    set_error(msg);
    status
}

fn robot_status(e: &RobotError) -> FbStatus {
    match e {
        RobotError::RobotBusy { .. } => FbStatus::RobotBusy,
        RobotError::SpeedLimit { .. } => FbStatus::SpeedLimit,
        RobotError::NegativeMagnitude(_) => FbStatus::NegativeMagnitude,
        RobotError::PrimitiveUnavailable { .. } => FbStatus::PrimitiveUnavailable,
        RobotError::StoreUnwritable(_) | RobotError::EmptyBlob => FbStatus::StoreError,
        RobotError::UnknownRobotKind(_) => FbStatus::UnknownRobotKind,
        _ => FbStatus::InvalidArgument,
    }
}

fn robot_fail(e: RobotError) -> FbStatus {
    fail(robot_status(&e), format!("{}: {e}", e.code()))
}

/// Runs `f`, turning panics into `FbStatus::Panic`.
fn guarded(f: impl FnOnce() -> Result<(), FbStatus>) -> FbStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => FbStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => fail(FbStatus::Panic, "internal panic"),
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, FbStatus> {
    if p.is_null() {
        return Err(fail(FbStatus::NullArgument, format!("`{name}` is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(FbStatus::InvalidUtf8, format!("`{name}` is not UTF-8")))
}

unsafe fn opt_str_arg<'a>(p: *const c_char, name: &str) -> Result<Option<&'a str>, FbStatus> {
    if p.is_null() {
        Ok(None)
    } else {
        str_arg(p, name).map(Some)
    }
}

unsafe fn put_string(out: *mut *mut c_char, s: String) -> Result<(), FbStatus> {
    if out.is_null() {
        return Err(fail(FbStatus::NullArgument, "`out` is null"));
    }
    let c = CString::new(s.replace('\0', " ")).expect("nul bytes replaced");
    *out = c.into_raw();
    Ok(())
}

unsafe fn robot_mut<'a>(r: *mut FbRobot) -> Result<&'a mut FbRobot, FbStatus> {
    r.as_mut()
        .ok_or_else(|| fail(FbStatus::NullArgument, "robot handle is null"))
}

/// Message for the last failed call on this thread, or NULL. Valid until the
/// next call on the same thread.
#[no_mangle]
pub extern "C" fn fb_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Static name of a status code.
#[no_mangle]
pub extern "C" fn fb_status_name(status: FbStatus) -> *const c_char {
    let s: &'static CStr = match status {
        FbStatus::Ok => c"OK",
        FbStatus::NullArgument => c"NULL_ARGUMENT",
        FbStatus::InvalidUtf8 => c"INVALID_UTF8",
        FbStatus::InvalidArgument => c"INVALID_ARGUMENT",
        FbStatus::UnknownRobotKind => c"UNKNOWN_ROBOT_KIND",
        FbStatus::RobotBusy => c"ROBOT_BUSY",
        FbStatus::SpeedLimit => c"SPEED_LIMIT",
        FbStatus::NegativeMagnitude => c"NEGATIVE_MAGNITUDE",
        FbStatus::PrimitiveUnavailable => c"PRIMITIVE_UNAVAILABLE",
        FbStatus::StoreError => c"STORE_ERROR",
        FbStatus::CommandFailed => c"COMMAND_FAILED",
        FbStatus::NotFound => c"NOT_FOUND",
        FbStatus::Panic => c"PANIC",
    };
    s.as_ptr()
}

/// # Safety
/// `s` must come from this library and not be freed twice. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn fb_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Creates a robot of kind `"go2"` or `"g1"` at the origin.
///
/// # Safety
/// `kind` must be a valid C string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fb_robot_new(kind: *const c_char, out: *mut *mut FbRobot) -> FbStatus {
    guarded(|| {
        if out.is_null() {
            return Err(fail(FbStatus::NullArgument, "`out` is null"));
        }
        let kind: RobotKind = str_arg(kind, "kind")?.parse().map_err(robot_fail)?;
        *out = Box::into_raw(Box::new(FbRobot {
            sim: RobotSim::new(kind),
        }));
        Ok(())
    })
}

/// # Safety
/// `robot` must come from [`fb_robot_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn fb_robot_free(robot: *mut FbRobot) {
    if !robot.is_null() {
        drop(Box::from_raw(robot));
    }
}

/// Directory that `img_to_volc` uploads into.
///
/// # Safety
/// `robot` must be a live handle; `dir` a valid C string.
#[no_mangle]
pub unsafe extern "C" fn fb_robot_set_blob_dir(
    robot: *mut FbRobot,
    dir: *const c_char,
) -> FbStatus {
    guarded(|| {
        let r = robot_mut(robot)?;
        let dir = str_arg(dir, "dir")?;
        let sim = std::mem::replace(&mut r.sim, RobotSim::new(RobotKind::Go2));
        r.sim = sim.with_blob_store(BlobStore::new(dir));
        Ok(())
    })
}

/// `direction` is one of forward, backward, strafe_left, strafe_right,
/// turn_left, turn_right. Magnitude is metres or degrees.
///
/// # Safety
/// `robot` must be a live handle; `direction` a valid C string.
#[no_mangle]
pub unsafe extern "C" fn fb_robot_act_move(
    robot: *mut FbRobot,
    direction: *const c_char,
    magnitude: f64,
    speed: f64,
) -> FbStatus {
    guarded(|| {
        let r = robot_mut(robot)?;
        let dir: Direction = str_arg(direction, "direction")?
            .parse()
            .map_err(robot_fail)?;
        r.sim
            .act_move(dir, magnitude, speed)
            .map(drop)
            .map_err(robot_fail)
    })
}

/// Calls a primitive by name with JSON params (NULL means `{}`). The
/// observation text goes to `out` when it is not NULL.
///
/// # Safety
/// `robot` must be a live handle; strings valid; `out` NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn fb_robot_invoke(
    robot: *mut FbRobot,
    name: *const c_char,
    params_json: *const c_char,
    out: *mut *mut c_char,
) -> FbStatus {
    guarded(|| {
        let r = robot_mut(robot)?;
        let name = str_arg(name, "name")?;
        let params = match opt_str_arg(params_json, "params_json")? {
            Some(s) => serde_json::from_str(s)
                .map_err(|e| fail(FbStatus::InvalidArgument, format!("params_json: {e}")))?,
            None => serde_json::json!({}),
        };
        let obs = r.sim.invoke(name, &params).map_err(robot_fail)?;
        if !out.is_null() {
            put_string(out, obs.describe())?;
        }
        Ok(())
    })
}

/// Moves the simulated clock forward.
///
/// # Safety
/// `robot` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn fb_robot_advance(robot: *mut FbRobot, secs: f64) -> FbStatus {
    guarded(|| {
        if !(secs >= 0.0 && secs.is_finite()) {
            return Err(fail(
                FbStatus::InvalidArgument,
                "secs must be finite and non-negative",
            ));
        }
        robot_mut(robot)?.sim.advance(secs);
        Ok(())
    })
}

/// Jumps the clock to the end of the running action.
///
/// # Safety
/// `robot` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn fb_robot_wait_idle(robot: *mut FbRobot) -> FbStatus {
    guarded(|| {
        robot_mut(robot)?.sim.wait_idle();
        Ok(())
    })
}

/// # Safety
/// `robot` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fb_robot_pose(robot: *const FbRobot, out: *mut FbPose) -> FbStatus {
    guarded(|| {
        let r = robot
            .as_ref()
            .ok_or_else(|| fail(FbStatus::NullArgument, "robot handle is null"))?;
        let out = out
            .as_mut()
            .ok_or_else(|| fail(FbStatus::NullArgument, "`out` is null"))?;
        let st = r.sim.state();
        *out = FbPose {
            x: st.x,
            y: st.y,
            heading: st.heading,
            clock: st.clock,
            busy_until: st.busy_until,
        };
        Ok(())
    })
}

/// Event log as JSON lines, one attempted primitive call per line.
///
/// # Safety
/// `robot` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fb_robot_event_log(
    robot: *const FbRobot,
    out: *mut *mut c_char,
) -> FbStatus {
    guarded(|| {
        let r = robot
            .as_ref()
            .ok_or_else(|| fail(FbStatus::NullArgument, "robot handle is null"))?;
        put_string(out, r.sim.export_event_log())
    })
}

/// Runs a natural-language command through the rule-based planner. The
/// transcript is written to `out` whether or not the command succeeded;
/// failure returns `CommandFailed`.
///
/// # Safety
/// `robot` must be a live handle; `command` valid; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fb_robot_execute(
    robot: *mut FbRobot,
    command: *const c_char,
    out: *mut *mut c_char,
) -> FbStatus {
    guarded(|| {
        let r = robot_mut(robot)?;
        let command = str_arg(command, "command")?;
        if out.is_null() {
            return Err(fail(FbStatus::NullArgument, "`out` is null"));
        }
        let rt = tokio::runtime::Builder::new_current_thread()
            .build()
            .map_err(|e| fail(FbStatus::Panic, format!("runtime: {e}")))?;
        let mut planner = ScriptedPlanner::new();
        let result = rt.block_on(vlm_loop(command, &mut planner, &mut r.sim));
        put_string(out, result.output)?;
        match result.error {
            None if result.success => Ok(()),
            err => Err(fail(FbStatus::CommandFailed, err.unwrap_or_default())),
        }
    })
}

/// Builds a guard from a TOML policy, or the default policy when
/// `policy_toml` is NULL.
///
/// # Safety
/// `policy_toml` NULL or a valid C string; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fb_safety_new(
    policy_toml: *const c_char,
    out: *mut *mut FbSafetyGuard,
) -> FbStatus {
    guarded(|| {
        if out.is_null() {
            return Err(fail(FbStatus::NullArgument, "`out` is null"));
        }
        let policy = match opt_str_arg(policy_toml, "policy_toml")? {
            Some(text) => SafetyPolicy::from_toml(text)
                .map_err(|e| fail(FbStatus::InvalidArgument, e.to_string()))?,
            None => SafetyPolicy::default(),
        };
        *out = Box::into_raw(Box::new(FbSafetyGuard {
            guard: SafetyGuard::new(policy),
        }));
        Ok(())
    })
}

/// # Safety
/// `guard` must come from [`fb_safety_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn fb_safety_free(guard: *mut FbSafetyGuard) {
    if !guard.is_null() {
        drop(Box::from_raw(guard));
    }
}

/// Checks a command. Allowed commands count towards the rate limit and
/// cooldown. `now_unix` is seconds since the epoch. `out_detail` may be NULL.
///
/// # Safety
/// `guard` must be live; strings valid; `out_reason` writable.
#[no_mangle]
pub unsafe extern "C" fn fb_safety_evaluate(
    guard: *mut FbSafetyGuard,
    command: *const c_char,
    account_id: u64,
    role: *const c_char,
    robot: *const c_char,
    now_unix: f64,
    out_reason: *mut FbReason,
    out_detail: *mut *mut c_char,
) -> FbStatus {
    guarded(|| {
        let g = guard
            .as_ref()
            .ok_or_else(|| fail(FbStatus::NullArgument, "guard handle is null"))?;
        let out_reason = out_reason
            .as_mut()
            .ok_or_else(|| fail(FbStatus::NullArgument, "`out_reason` is null"))?;
        let command = str_arg(command, "command")?;
        let role: Role = str_arg(role, "role")?
            .parse()
            .map_err(|e: String| fail(FbStatus::InvalidArgument, e))?;
        let robot = str_arg(robot, "robot")?;
        if !now_unix.is_finite() {
            return Err(fail(FbStatus::InvalidArgument, "now_unix must be finite"));
        }
        let now = Utc
            .timestamp_micros((now_unix * 1e6).round() as i64)
            .single()
            .ok_or_else(|| fail(FbStatus::InvalidArgument, "now_unix out of range"))?;
        let v = g.guard.evaluate(command, account_id, role, robot, now);
        *out_reason = match v.reason_code {
            ReasonCode::Ok => FbReason::Ok,
            ReasonCode::Dangerous => FbReason::Dangerous,
            ReasonCode::RateLimited => FbReason::RateLimited,
            ReasonCode::Cooldown => FbReason::Cooldown,
            ReasonCode::RoleDenied => FbReason::RoleDenied,
        };
        if !out_detail.is_null() {
            put_string(out_detail, v.detail)?;
        }
        Ok(())
    })
}

/// Prefixes `content` with an agent metadata block, replacing any existing
/// one. `status` is info, success, failure or in_progress.
///
/// # Safety
/// All strings valid; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fb_meta_inject(
    content: *const c_char,
    agent_type: *const c_char,
    agent_id: *const c_char,
    status: *const c_char,
    out: *mut *mut c_char,
) -> FbStatus {
    guarded(|| {
        let content = str_arg(content, "content")?;
        let status: AgentStatus = str_arg(status, "status")?
            .parse()
            .map_err(|e: meta::MetaError| fail(FbStatus::InvalidArgument, e.to_string()))?;
        let m = AgentMeta::new(
            str_arg(agent_type, "agent_type")?,
            str_arg(agent_id, "agent_id")?,
            status,
        )
        .map_err(|e| fail(FbStatus::InvalidArgument, e.to_string()))?;
        put_string(out, meta::inject(content, &m))
    })
}

/// Parses the metadata block into JSON
/// `{"agent_type","agent_id","status","body"}`. `NotFound` when the post
/// carries no block.
///
/// # Safety
/// `content` valid; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fb_meta_parse(content: *const c_char, out: *mut *mut c_char) -> FbStatus {
    guarded(|| {
        let content = str_arg(content, "content")?;
        let (m, body) =
            meta::parse(content).ok_or_else(|| fail(FbStatus::NotFound, "no metadata block"))?;
        let json = serde_json::json!({
            "agent_type": m.agent_type,
            "agent_id": m.agent_id,
            "status": m.status,
            "body": body,
        });
        put_string(out, json.to_string())
    })
}

/// Whether a human post addresses `pattern` in its title or body. Posts
/// carrying agent metadata never match.
///
/// # Safety
/// Strings valid; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fb_mentions(
    title: *const c_char,
    content: *const c_char,
    pattern: *const c_char,
    out: *mut bool,
) -> FbStatus {
    guarded(|| {
        let out = out
            .as_mut()
            .ok_or_else(|| fail(FbStatus::NullArgument, "`out` is null"))?;
        let content = str_arg(content, "content")?;
        let is_agent = meta::parse(content).is_some();
        *out = mentions_me(
            str_arg(title, "title")?,
            content,
            str_arg(pattern, "pattern")?,
            is_agent,
        );
        Ok(())
    })
}

/// Rule-based command extraction: the text after `mention`. `NotFound`
/// when there is none.
///
/// # Safety
/// Strings valid; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fb_extract_command(
    content: *const c_char,
    mention: *const c_char,
    out: *mut *mut c_char,
) -> FbStatus {
    guarded(|| {
        let r = extract_fallback(str_arg(content, "content")?, str_arg(mention, "mention")?);
        let cmd = r
            .command
            .ok_or_else(|| fail(FbStatus::NotFound, "no command after the mention"))?;
        put_string(out, cmd)
    })
}
