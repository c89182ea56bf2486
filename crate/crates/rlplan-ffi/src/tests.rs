use std::ffi::CString;
use std::ptr;

use super::*;

fn last_error() -> String {
    let needed = rlp_last_error(ptr::null_mut(), 0);
    let mut buf = vec![0i8; needed + 1];
    rlp_last_error(buf.as_mut_ptr().cast(), buf.len());
    let bytes: Vec<u8> = buf[..needed].iter().map(|&b| b as u8).collect();
    String::from_utf8(bytes).unwrap()
}

fn build_line() -> *mut RlpLine {
    let xy: Vec<f64> = (0..6).flat_map(|i| [i as f64 * 40.0, 0.0]).collect();
    let mut line: *mut RlpLine = ptr::null_mut();
    assert_eq!(rlp_line_build(xy.as_ptr(), 6, 0.5, &mut line), RlpStatus::Ok);
    assert!(!line.is_null());
    line
}

#[test]
fn lines_build_measure_and_free() {
    let line = build_line();
    let mut len = 0.0;
    assert_eq!(rlp_line_length(line, &mut len), RlpStatus::Ok);
    assert!((len - 200.0).abs() < 1e-6, "length {len}");
    rlp_line_free(line);
    rlp_line_free(ptr::null_mut());
}

#[test]
fn degenerate_lines_are_rejected_with_a_message() {
    let xy = [0.0, 0.0, 0.0, 0.0];
    let mut line: *mut RlpLine = ptr::null_mut();
    assert_eq!(rlp_line_build(xy.as_ptr(), 2, 0.5, &mut line), RlpStatus::Geometry);
    assert!(line.is_null());
    assert!(!last_error().is_empty());

    assert_eq!(
        rlp_line_build(ptr::null(), 2, 0.5, &mut line),
        RlpStatus::NullArgument
    );
    assert_eq!(rlp_line_build(xy.as_ptr(), 1, 0.5, &mut line), RlpStatus::InvalidArgument);
}

#[test]
fn frenet_conversions_round_trip() {
    let line = build_line();
    // Acceleration along the velocity direction, the only kind a scalar
    // pose acceleration can carry back.
    let state = [50.0, 8.0, 0.3, 1.25, -0.4, -0.015];
    let mut pose = [0.0; 5];
    assert_eq!(rlp_frenet_to_cartesian(line, state.as_ptr(), pose.as_mut_ptr()), RlpStatus::Ok);
    assert!((pose[0] - 50.0).abs() < 1e-9 && (pose[1] - 1.25).abs() < 1e-9);

    let mut back = [0.0; 6];
    assert_eq!(
        rlp_cartesian_to_frenet(line, pose.as_ptr(), 10.0, back.as_mut_ptr()),
        RlpStatus::Ok
    );
    for (a, b) in state.iter().zip(&back) {
        assert!((a - b).abs() < 1e-6, "{state:?} vs {back:?}");
    }

    // The same pose with a corridor narrower than its offset must fail.
    assert_eq!(
        rlp_cartesian_to_frenet(line, pose.as_ptr(), 1.0, back.as_mut_ptr()),
        RlpStatus::Geometry
    );
    rlp_line_free(line);
}

#[test]
fn planning_fills_the_buffer_and_checks_capacity() {
    let from = [10.0, 5.0, 0.0, 1.0, 0.0, 0.0];
    let goal = [2.0, 0.0, 12.0, 7.0];
    let mut states = [0.0; 6 * 30];
    let mut n = 0usize;
    assert_eq!(
        rlp_plan(from.as_ptr(), goal.as_ptr(), 0.1, 3.0, states.as_mut_ptr(), states.len(), &mut n),
        RlpStatus::Ok
    );
    assert_eq!(n, 30);
    let last = &states[6 * 29..];
    assert!((last[3] - 0.0).abs() < 1e-9, "settles on the target offset");
    assert!((last[1] - 7.0).abs() < 1e-9, "settles on the target speed");

    assert_eq!(
        rlp_plan(from.as_ptr(), goal.as_ptr(), 0.1, 3.0, states.as_mut_ptr(), 12, &mut n),
        RlpStatus::InvalidArgument
    );
    assert!(last_error().contains("need 180"), "{}", last_error());

    let bad_goal = [9.0, 0.0, 12.0, 7.0]; // duration beyond the maximum
    assert_eq!(
        rlp_plan(from.as_ptr(), bad_goal.as_ptr(), 0.1, 3.0, states.as_mut_ptr(), states.len(), &mut n),
        RlpStatus::Geometry
    );
}

#[test]
fn covariances_propagate_and_yield_ellipses() {
    let mut sigma = [0.0; 16];
    let q = [0.1, 0.2, 0.3, 0.4];
    let mut next = [0.0; 16];
    assert_eq!(
        rlp_covariance_propagate(sigma.as_ptr(), 0.1, q.as_ptr(), next.as_mut_ptr()),
        RlpStatus::Ok
    );
    // From zero, one step leaves exactly the process noise diagonal.
    assert_eq!(next[0], 0.1);
    assert_eq!(next[5], 0.2);
    assert_eq!(next[10], 0.3);
    assert_eq!(next[15], 0.4);

    let mut ellipse = [0.0; 3];
    assert_eq!(rlp_confidence_ellipse(next.as_ptr(), 0.95, ellipse.as_mut_ptr()), RlpStatus::Ok);
    assert!(ellipse[0] >= ellipse[1] && ellipse[1] > 0.0);

    assert_eq!(
        rlp_confidence_ellipse(next.as_ptr(), 1.5, ellipse.as_mut_ptr()),
        RlpStatus::Uncertainty
    );

    sigma[1] = 5.0; // asymmetric: sigma[1] != sigma[4]
    assert_eq!(
        rlp_covariance_propagate(sigma.as_ptr(), 0.1, q.as_ptr(), next.as_mut_ptr()),
        RlpStatus::Uncertainty
    );
}

#[test]
fn footprints_inflate_and_zero_ellipses_stay_rectangles() {
    let zero = [0.0; 3];
    let mut xy = [0.0; 40];
    let mut n = 0usize;
    assert_eq!(
        rlp_inflate_footprint(1.0, 2.0, 0.5, 4.5, 1.8, zero.as_ptr(), xy.as_mut_ptr(), 40, &mut n),
        RlpStatus::Ok
    );
    assert_eq!(n, 4);

    let ell = [0.8, 0.3, 0.2];
    assert_eq!(
        rlp_inflate_footprint(1.0, 2.0, 0.5, 4.5, 1.8, ell.as_ptr(), xy.as_mut_ptr(), 40, &mut n),
        RlpStatus::Ok
    );
    assert!(n > 4 && n <= 20, "inflated polygon has {n} vertices");

    assert_eq!(
        rlp_inflate_footprint(1.0, 2.0, 0.5, 4.5, 1.8, ell.as_ptr(), xy.as_mut_ptr(), 6, &mut n),
        RlpStatus::InvalidArgument
    );
    assert_eq!(
        rlp_inflate_footprint(1.0, 2.0, 0.5, 0.0, 1.8, ell.as_ptr(), xy.as_mut_ptr(), 40, &mut n),
        RlpStatus::InvalidArgument
    );
}

#[test]
fn policies_load_report_shapes_and_act() {
    use rlplan::neural::{save_checkpoint, Activation};

    let dir = std::env::temp_dir().join(format!("rlplan_ffi_{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("policy.ckpt");
    let mut rng = rlplan::rngs::stream_rng(3, rlplan::rngs::Stream::Init);
    let net = Mlp::new(&[5, 8, 2], Activation::Tanh, &mut rng).unwrap();
    save_checkpoint(&path, &net).unwrap();

    let c_path = CString::new(path.to_str().unwrap()).unwrap();
    let mut policy: *mut RlpPolicy = ptr::null_mut();
    assert_eq!(rlp_policy_load(c_path.as_ptr(), &mut policy), RlpStatus::Ok);

    let mut obs_len = 0usize;
    let mut act_len = 0usize;
    assert_eq!(rlp_policy_obs_len(policy, &mut obs_len), RlpStatus::Ok);
    assert_eq!(rlp_policy_act_len(policy, &mut act_len), RlpStatus::Ok);
    assert_eq!((obs_len, act_len), (5, 2));

    let obs = [0.1, -0.2, 0.3, 0.0, 0.5];
    let mut act = [0.0; 2];
    assert_eq!(rlp_policy_act(policy, obs.as_ptr(), 5, act.as_mut_ptr(), 2), RlpStatus::Ok);
    assert_eq!(act.to_vec(), net.forward(&obs));
    assert!(act.iter().all(|a| a.abs() <= 1.0));

    assert_eq!(
        rlp_policy_act(policy, obs.as_ptr(), 4, act.as_mut_ptr(), 2),
        RlpStatus::InvalidArgument
    );
    assert_eq!(
        rlp_policy_act(policy, obs.as_ptr(), 5, act.as_mut_ptr(), 1),
        RlpStatus::InvalidArgument
    );
    rlp_policy_free(policy);

    let missing = CString::new(dir.join("missing.ckpt").to_str().unwrap()).unwrap();
    assert_eq!(rlp_policy_load(missing.as_ptr(), &mut policy), RlpStatus::Io);
    std::fs::write(dir.join("junk.ckpt"), b"junk").unwrap();
    let junk = CString::new(dir.join("junk.ckpt").to_str().unwrap()).unwrap();
    assert_eq!(rlp_policy_load(junk.as_ptr(), &mut policy), RlpStatus::Io);
    assert!(!last_error().is_empty());
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn the_generated_header_covers_the_surface() {
    let header = std::fs::read_to_string(
        std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("include/rlplan.h"),
    )
    .expect("the build script generates include/rlplan.h");
    for symbol in [
        "RLPLAN_H",
        "RlpStatus",
        "RLP_STATUS_OK",
        "rlp_last_error",
        "rlp_line_build",
        "rlp_line_free",
        "rlp_line_length",
        "rlp_frenet_to_cartesian",
        "rlp_cartesian_to_frenet",
        "rlp_plan",
        "rlp_covariance_propagate",
        "rlp_confidence_ellipse",
        "rlp_inflate_footprint",
        "rlp_policy_load",
        "rlp_policy_free",
        "rlp_policy_obs_len",
        "rlp_policy_act_len",
        "rlp_policy_act",
    ] {
        assert!(header.contains(symbol), "header is missing {symbol}");
    }
}
