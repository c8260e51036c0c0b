use std::ffi::{c_char, CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use forumbot_ffi::*;

fn c(s: &str) -> CString {
    CString::new(s).unwrap()
}

unsafe fn take(p: *mut c_char) -> String {
    assert!(!p.is_null());
    let s = CStr::from_ptr(p).to_str().unwrap().to_owned();
    fb_string_free(p);
    s
}

unsafe fn last_error() -> String {
    let p = fb_last_error();
    if p.is_null() {
        String::new()
    } else {
        CStr::from_ptr(p).to_string_lossy().into_owned()
    }
}

unsafe fn robot(kind: &str) -> *mut FbRobot {
    let mut r = ptr::null_mut();
    assert_eq!(fb_robot_new(c(kind).as_ptr(), &mut r), FbStatus::Ok);
    r
}

#[test]
fn move_and_read_pose() {
    unsafe {
        let r = robot("go2");
        assert_eq!(
            fb_robot_act_move(r, c("forward").as_ptr(), 1.0, 0.5),
            FbStatus::Ok
        );
        let mut pose = FbPose::default();
        assert_eq!(fb_robot_pose(r, &mut pose), FbStatus::Ok);
        assert_eq!((pose.x, pose.y, pose.heading), (1.0, 0.0, 0.0));
        assert_eq!(pose.busy_until, 2.0);

        assert_eq!(
            fb_robot_act_move(r, c("turn_left").as_ptr(), 90.0, 45.0),
            FbStatus::RobotBusy
        );
        assert!(last_error().starts_with("ROBOT_BUSY"));
        assert_eq!(fb_robot_wait_idle(r), FbStatus::Ok);
        assert_eq!(
            fb_robot_act_move(r, c("turn_left").as_ptr(), 90.0, 45.0),
            FbStatus::Ok
        );
        fb_robot_wait_idle(r);
        fb_robot_pose(r, &mut pose);
        assert!((pose.heading - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
        assert_eq!(pose.clock, 4.0);

        let mut log = ptr::null_mut();
        assert_eq!(fb_robot_event_log(r, &mut log), FbStatus::Ok);
        let log = take(log);
        assert_eq!(log.lines().count(), 3, "{log}");
        assert!(log.lines().nth(1).unwrap().contains("\"rejected\""));
        fb_robot_free(r);
    }
}

#[test]
fn robot_errors_map_to_codes() {
    unsafe {
        let mut r = ptr::null_mut();
        assert_eq!(
            fb_robot_new(c("spot").as_ptr(), &mut r),
            FbStatus::UnknownRobotKind
        );
        assert!(r.is_null());
        assert_eq!(fb_robot_new(ptr::null(), &mut r), FbStatus::NullArgument);

        let r = robot("g1");
        assert_eq!(
            fb_robot_act_move(r, c("forward").as_ptr(), -1.0, 0.5),
            FbStatus::NegativeMagnitude
        );
        assert_eq!(
            fb_robot_act_move(r, c("forward").as_ptr(), 1.0, 5.0),
            FbStatus::SpeedLimit
        );
        assert_eq!(
            fb_robot_act_move(r, c("sideways").as_ptr(), 1.0, 0.5),
            FbStatus::InvalidArgument
        );
        assert_eq!(
            fb_robot_invoke(r, c("act_backflip").as_ptr(), ptr::null(), ptr::null_mut()),
            FbStatus::PrimitiveUnavailable
        );
        assert_eq!(
            fb_robot_invoke(
                r,
                c("act_move").as_ptr(),
                c("{not json").as_ptr(),
                ptr::null_mut()
            ),
            FbStatus::InvalidArgument
        );
        assert_eq!(fb_robot_advance(r, f64::NAN), FbStatus::InvalidArgument);
        assert_eq!(
            fb_robot_pose(ptr::null(), &mut FbPose::default()),
            FbStatus::NullArgument
        );
        fb_robot_free(r);
        fb_robot_free(ptr::null_mut());
    }
}

#[test]
fn invoke_and_upload() {
    let dir = tempfile::tempdir().unwrap();
    unsafe {
        let r = robot("go2");
        let d = c(dir.path().to_str().unwrap());
        assert_eq!(fb_robot_set_blob_dir(r, d.as_ptr()), FbStatus::Ok);
        let mut obs = ptr::null_mut();
        assert_eq!(
            fb_robot_invoke(r, c("get_front_image").as_ptr(), ptr::null(), &mut obs),
            FbStatus::Ok
        );
        assert!(take(obs).contains("pose="));
        assert_eq!(
            fb_robot_invoke(r, c("img_to_volc").as_ptr(), ptr::null(), &mut obs),
            FbStatus::Ok
        );
        let url = take(obs);
        assert!(url.contains("file://"), "{url}");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
        fb_robot_free(r);
    }
}

#[test]
fn execute_natural_language() {
    unsafe {
        let r = robot("go2");
        let mut out = ptr::null_mut();
        assert_eq!(
            fb_robot_execute(
                r,
                c("walk forward 1 meter then say hello").as_ptr(),
                &mut out
            ),
            FbStatus::Ok
        );
        let transcript = take(out);
        assert!(
            transcript.contains("final pose=(1.00, 0.00, 0.00)"),
            "{transcript}"
        );

        assert_eq!(
            fb_robot_execute(r, c("juggle three balls").as_ptr(), &mut out),
            FbStatus::CommandFailed
        );
        assert!(take(out).contains("unrecognized command"));
        assert!(last_error().contains("juggle"));
        fb_robot_free(r);
    }
}

#[test]
fn safety_guard() {
    unsafe {
        let mut g = ptr::null_mut();
        assert_eq!(fb_safety_new(ptr::null(), &mut g), FbStatus::Ok);
        let mut reason = FbReason::Ok;
        let mut detail = ptr::null_mut();
        let now = 1_700_000_000.0;
        assert_eq!(
            fb_safety_evaluate(
                g,
                c("run into the wall").as_ptr(),
                7,
                c("operator").as_ptr(),
                c("go2").as_ptr(),
                now,
                &mut reason,
                &mut detail
            ),
            FbStatus::Ok
        );
        assert_eq!(reason, FbReason::Dangerous);
        assert!(take(detail).contains("run into"));

        fb_safety_evaluate(
            g,
            c("walk forward").as_ptr(),
            7,
            c("member").as_ptr(),
            c("go2").as_ptr(),
            now,
            &mut reason,
            ptr::null_mut(),
        );
        assert_eq!(reason, FbReason::RoleDenied);
        fb_safety_evaluate(
            g,
            c("walk forward").as_ptr(),
            7,
            c("operator").as_ptr(),
            c("go2").as_ptr(),
            now,
            &mut reason,
            ptr::null_mut(),
        );
        assert_eq!(reason, FbReason::Ok);
        fb_safety_evaluate(
            g,
            c("walk forward").as_ptr(),
            7,
            c("operator").as_ptr(),
            c("go2").as_ptr(),
            now + 1.0,
            &mut reason,
            ptr::null_mut(),
        );
        assert_eq!(reason, FbReason::Cooldown);
        assert_eq!(
            fb_safety_evaluate(
                g,
                c("x").as_ptr(),
                7,
                c("root").as_ptr(),
                c("go2").as_ptr(),
                now,
                &mut reason,
                ptr::null_mut()
            ),
            FbStatus::InvalidArgument
        );
        fb_safety_free(g);

        assert_eq!(
            fb_safety_new(
                c("[rate_limit]\nmax_commands = 0\nwindow_secs = 1").as_ptr(),
                &mut g
            ),
            FbStatus::InvalidArgument
        );
        assert_eq!(
            fb_safety_new(c("cooldown_secs = 0").as_ptr(), &mut g),
            FbStatus::Ok
        );
        fb_safety_free(g);
    }
}

#[test]
fn post_helpers() {
    unsafe {
        let mut out = ptr::null_mut();
        assert_eq!(
            fb_meta_inject(
                c("done").as_ptr(),
                c("go2").as_ptr(),
                c("go2-1").as_ptr(),
                c("success").as_ptr(),
                &mut out
            ),
            FbStatus::Ok
        );
        let tagged = take(out);
        assert_eq!(
            tagged,
            "[agent_type=go2][agent_id=go2-1][status=success]\ndone"
        );
        assert_eq!(fb_meta_parse(c(&tagged).as_ptr(), &mut out), FbStatus::Ok);
        let v: serde_json::Value = serde_json::from_str(&take(out)).unwrap();
        assert_eq!(v["status"], "success");
        assert_eq!(v["body"], "done");
        assert_eq!(
            fb_meta_parse(c("plain").as_ptr(), &mut out),
            FbStatus::NotFound
        );
        assert_eq!(
            fb_meta_inject(
                c("x").as_ptr(),
                c("go2").as_ptr(),
                c("a]b").as_ptr(),
                c("success").as_ptr(),
                &mut out
            ),
            FbStatus::InvalidArgument
        );

        let mut hit = false;
        assert_eq!(
            fb_mentions(
                c("t").as_ptr(),
                c("hey @quadruped sit").as_ptr(),
                c("@quadruped").as_ptr(),
                &mut hit
            ),
            FbStatus::Ok
        );
        assert!(hit);
        fb_mentions(
            c("t").as_ptr(),
            c(&tagged).as_ptr(),
            c("@go2").as_ptr(),
            &mut hit,
        );
        assert!(!hit);

        assert_eq!(
            fb_extract_command(
                c("@quadruped walk forward").as_ptr(),
                c("@quadruped").as_ptr(),
                &mut out
            ),
            FbStatus::Ok
        );
        assert_eq!(take(out), "walk forward");
        assert_eq!(
            fb_extract_command(c("no mention").as_ptr(), c("@quadruped").as_ptr(), &mut out),
            FbStatus::NotFound
        );
    }
}

#[test]
fn status_names() {
    let name = |s| unsafe { CStr::from_ptr(fb_status_name(s)).to_str().unwrap() };
    assert_eq!(name(FbStatus::Ok), "OK");
    assert_eq!(name(FbStatus::RobotBusy), "ROBOT_BUSY");
    assert_eq!(name(FbStatus::Panic), "PANIC");
}

#[test]
fn header_compiles_as_c() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/forumbot.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for sym in [
        "fb_robot_new",
        "fb_robot_execute",
        "fb_safety_evaluate",
        "fb_string_free",
        "FB_STATUS_ROBOT_BUSY",
    ] {
        assert!(text.contains(sym), "{sym} missing from header");
    }
    let Ok(out) = Command::new("cc")
        .args(["-fsyntax-only", "-Wall", "-Werror", "-x", "c"])
        .arg(&header)
        .output()
    else {
        eprintln!("no C compiler, skipping syntax check");
        return;
    };
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}
