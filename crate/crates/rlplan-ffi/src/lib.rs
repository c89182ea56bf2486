//! C interface to the planning, projection and uncertainty primitives, plus
//! evaluation of saved policy networks.
//!
//! Conventions: every fallible function returns an [`RlpStatus`]; on any
//! failure a per-thread message is stored and can be read with
//! [`rlp_last_error`]. Frenet states are `double[6]` laid out as
//! `s, s_dot, s_ddot, d, d_dot, d_ddot`; poses are `double[5]` laid out as
//! `x, y, heading, speed, accel`; covariances are `double[16]` row-major
//! over `(s, d, s_dot, d_dot)`; ellipses are `double[3]` as
//! `a, b, angle`. Handles created by `_build`/`_load` functions own their
//! memory and must be released with the matching `_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use rlplan::frenet::{plan_trajectory, CartesianPose, FrenetState, GoalAction, ReferenceLine};
use rlplan::neural::{load_checkpoint, Mlp};
use rlplan::uncertainty::{
    confidence_ellipse, minkowski_inflate, propagate_covariance, Ellipse, NoiseModel,
    OrientedRect, StateCovariance, VehicleKind, DEFAULT_ARC_SAMPLES,
};

/// Result of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RlpStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullArgument = 1,
    /// An argument was out of range or a buffer too small.
    InvalidArgument = 2,
    /// Geometry failed: degenerate line, projection outside the corridor,
    /// infeasible plan duration.
    Geometry = 3,
    /// A covariance was not usable or a confidence level out of (0, 1).
    Uncertainty = 4,
    /// A file could not be read or did not contain a checkpoint.
    Io = 5,
    /// An internal panic was caught at the boundary.
    Panic = 6,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let sanitized: Vec<u8> = msg.bytes().filter(|&b| b != 0).collect();
    LAST_ERROR.with(|e| {
        *e.borrow_mut() = CString::new(sanitized).expect("interior NULs removed");
    });
}

fn fail(status: RlpStatus, msg: impl std::fmt::Display) -> RlpStatus {
    set_error(&msg.to_string());
    status
}

/// Copy the message of the last failure on this thread into `buf`
/// (NUL-terminated, truncated to `cap` bytes) and return the full message
/// length in bytes, excluding the NUL. Call with a null `buf` or zero `cap`
/// to query the required length.
#[no_mangle]
pub extern "C" fn rlp_last_error(buf: *mut c_char, cap: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        let bytes = msg.as_bytes();
        if !buf.is_null() && cap > 0 {
            let n = bytes.len().min(cap - 1);
            unsafe {
                std::ptr::copy_nonoverlapping(bytes.as_ptr().cast::<c_char>(), buf, n);
                *buf.add(n) = 0;
            }
        }
        bytes.len()
    })
}

/// Wrap a body so panics become `RLP_STATUS_PANIC` instead of crossing the
/// FFI boundary.
fn guard(body: impl FnOnce() -> RlpStatus) -> RlpStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".to_string());
            fail(RlpStatus::Panic, msg)
        }
    }
}

unsafe fn slice_in<'a>(p: *const f64, n: usize) -> Option<&'a [f64]> {
    if p.is_null() {
        None
    } else {
        Some(std::slice::from_raw_parts(p, n))
    }
}

unsafe fn slice_out<'a>(p: *mut f64, n: usize) -> Option<&'a mut [f64]> {
    if p.is_null() {
        None
    } else {
        Some(std::slice::from_raw_parts_mut(p, n))
    }
}

fn state_from(raw: &[f64]) -> FrenetState {
    FrenetState {
        s: raw[0],
        s_dot: raw[1],
        s_ddot: raw[2],
        d: raw[3],
        d_dot: raw[4],
        d_ddot: raw[5],
    }
}

fn state_to(fs: &FrenetState, out: &mut [f64]) {
    out[0] = fs.s;
    out[1] = fs.s_dot;
    out[2] = fs.s_ddot;
    out[3] = fs.d;
    out[4] = fs.d_dot;
    out[5] = fs.d_ddot;
}

fn covariance_from(raw: &[f64]) -> StateCovariance {
    StateCovariance::from_rows(raw.try_into().expect("callers pass 16 doubles"))
}

fn covariance_to(cov: &StateCovariance, out: &mut [f64]) {
    for r in 0..4 {
        for c in 0..4 {
            out[4 * r + c] = cov.0[(r, c)];
        }
    }
}

/// A sampled reference line; build with [`rlp_line_build`], release with
/// [`rlp_line_free`].
pub struct RlpLine(ReferenceLine);

/// A policy network loaded from a checkpoint; release with
/// [`rlp_policy_free`].
pub struct RlpPolicy(Mlp);

/// Build a reference line through `n_points` waypoints given as interleaved
/// `x0, y0, x1, y1, ...`, resampled every `ds`.
#[no_mangle]
pub extern "C" fn rlp_line_build(
    xy: *const f64,
    n_points: usize,
    ds: f64,
    out: *mut *mut RlpLine,
) -> RlpStatus {
    guard(|| {
        if out.is_null() {
            return fail(RlpStatus::NullArgument, "out is null");
        }
        let Some(raw) = (unsafe { slice_in(xy, 2 * n_points) }) else {
            return fail(RlpStatus::NullArgument, "xy is null");
        };
        if n_points < 2 {
            return fail(RlpStatus::InvalidArgument, "need at least two waypoints");
        }
        let points: Vec<(f64, f64)> = raw.chunks_exact(2).map(|c| (c[0], c[1])).collect();
        match ReferenceLine::build(&points, ds) {
            Ok(line) => {
                unsafe { *out = Box::into_raw(Box::new(RlpLine(line))) };
                RlpStatus::Ok
            }
            Err(e) => fail(RlpStatus::Geometry, e),
        }
    })
}

#[no_mangle]
pub extern "C" fn rlp_line_free(line: *mut RlpLine) {
    if !line.is_null() {
        drop(unsafe { Box::from_raw(line) });
    }
}

/// Total arc length of the line.
#[no_mangle]
pub extern "C" fn rlp_line_length(line: *const RlpLine, out: *mut f64) -> RlpStatus {
    guard(|| {
        if line.is_null() || out.is_null() {
            return fail(RlpStatus::NullArgument, "line and out must be non-null");
        }
        unsafe { *out = (*line).0.length() };
        RlpStatus::Ok
    })
}

/// Convert a Frenet state (`double[6]`) to a pose (`double[5]`).
#[no_mangle]
pub extern "C" fn rlp_frenet_to_cartesian(
    line: *const RlpLine,
    state: *const f64,
    pose_out: *mut f64,
) -> RlpStatus {
    guard(|| {
        if line.is_null() {
            return fail(RlpStatus::NullArgument, "line is null");
        }
        let (Some(raw), Some(out)) =
            (unsafe { slice_in(state, 6) }, unsafe { slice_out(pose_out, 5) })
        else {
            return fail(RlpStatus::NullArgument, "state and pose_out must be non-null");
        };
        match unsafe { &(*line).0 }.frenet_to_cartesian(&state_from(raw)) {
            Ok(p) => {
                out.copy_from_slice(&[p.x, p.y, p.heading, p.speed, p.accel]);
                RlpStatus::Ok
            }
            Err(e) => fail(RlpStatus::Geometry, e),
        }
    })
}

/// Project a pose (`double[5]`) onto the line as a Frenet state
/// (`double[6]`). Fails if the pose lies more than `corridor` off the line.
#[no_mangle]
pub extern "C" fn rlp_cartesian_to_frenet(
    line: *const RlpLine,
    pose: *const f64,
    corridor: f64,
    state_out: *mut f64,
) -> RlpStatus {
    guard(|| {
        if line.is_null() {
            return fail(RlpStatus::NullArgument, "line is null");
        }
        let (Some(raw), Some(out)) =
            (unsafe { slice_in(pose, 5) }, unsafe { slice_out(state_out, 6) })
        else {
            return fail(RlpStatus::NullArgument, "pose and state_out must be non-null");
        };
        let p = CartesianPose {
            x: raw[0],
            y: raw[1],
            heading: raw[2],
            speed: raw[3],
            accel: raw[4],
        };
        match unsafe { &(*line).0 }.cartesian_to_frenet(&p, corridor) {
            Ok(fs) => {
                state_to(&fs, out);
                RlpStatus::Ok
            }
            Err(e) => fail(RlpStatus::Geometry, e),
        }
    })
}

/// Plan jerk-minimal lateral/longitudinal profiles from `from`
/// (`double[6]`) for a goal (`double[4]` as `t_target, d_target,
/// sigma_advance, s_dot_target`), sampled every `delta` out to `horizon`.
/// Writes up to `cap` doubles of consecutive states (6 each) into
/// `states_out` and stores the number of states in `n_out`; fails without
/// writing if `cap` is too small.
#[no_mangle]
pub extern "C" fn rlp_plan(
    from: *const f64,
    goal: *const f64,
    delta: f64,
    horizon: f64,
    states_out: *mut f64,
    cap: usize,
    n_out: *mut usize,
) -> RlpStatus {
    guard(|| {
        if n_out.is_null() {
            return fail(RlpStatus::NullArgument, "n_out is null");
        }
        let (Some(raw_from), Some(raw_goal)) =
            (unsafe { slice_in(from, 6) }, unsafe { slice_in(goal, 4) })
        else {
            return fail(RlpStatus::NullArgument, "from and goal must be non-null");
        };
        let action = GoalAction {
            t_target: raw_goal[0],
            d_target: raw_goal[1],
            sigma_advance: raw_goal[2],
            s_dot_target: raw_goal[3],
        };
        let traj = match plan_trajectory(&state_from(raw_from), &action, delta, horizon) {
            Ok(t) => t,
            Err(e) => return fail(RlpStatus::Geometry, e),
        };
        let needed = 6 * traj.states.len();
        let Some(out) = (unsafe { slice_out(states_out, needed.min(cap)) }) else {
            return fail(RlpStatus::NullArgument, "states_out is null");
        };
        if cap < needed {
            return fail(
                RlpStatus::InvalidArgument,
                format!("states_out holds {cap} doubles, need {needed}"),
            );
        }
        for (chunk, fs) in out.chunks_exact_mut(6).zip(&traj.states) {
            state_to(fs, chunk);
        }
        unsafe { *n_out = traj.states.len() };
        RlpStatus::Ok
    })
}

/// One constant-velocity prediction step of a covariance (`double[16]`
/// row-major over `s, d, s_dot, d_dot`) with process noise diagonal
/// `q_diag` (`double[4]`) added.
#[no_mangle]
pub extern "C" fn rlp_covariance_propagate(
    sigma: *const f64,
    delta: f64,
    q_diag: *const f64,
    sigma_out: *mut f64,
) -> RlpStatus {
    guard(|| {
        let (Some(raw), Some(q), Some(out)) = (
            unsafe { slice_in(sigma, 16) },
            unsafe { slice_in(q_diag, 4) },
            unsafe { slice_out(sigma_out, 16) },
        ) else {
            return fail(RlpStatus::NullArgument, "sigma, q_diag and sigma_out must be non-null");
        };
        let model = NoiseModel::new(delta, [q[0], q[1], q[2], q[3]], [q[0], q[1], q[2], q[3]]);
        match propagate_covariance(&covariance_from(raw), &model, VehicleKind::Av) {
            Ok(next) => {
                covariance_to(&next, out);
                RlpStatus::Ok
            }
            Err(e) => fail(RlpStatus::Uncertainty, e),
        }
    })
}

/// Confidence ellipse (`double[3]` as `a, b, angle`) of the position block
/// of a covariance (`double[16]` row-major) at confidence mass `conf`.
#[no_mangle]
pub extern "C" fn rlp_confidence_ellipse(
    sigma: *const f64,
    conf: f64,
    ellipse_out: *mut f64,
) -> RlpStatus {
    guard(|| {
        let (Some(raw), Some(out)) =
            (unsafe { slice_in(sigma, 16) }, unsafe { slice_out(ellipse_out, 3) })
        else {
            return fail(RlpStatus::NullArgument, "sigma and ellipse_out must be non-null");
        };
        match confidence_ellipse(&covariance_from(raw), conf) {
            Ok(e) => {
                out.copy_from_slice(&[e.a, e.b, e.angle]);
                RlpStatus::Ok
            }
            Err(e) => fail(RlpStatus::Uncertainty, e),
        }
    })
}

/// Convex polygon containing the Minkowski sum of an oriented rectangle and
/// an ellipse (`double[3]` as `a, b, angle`). Writes interleaved vertex
/// coordinates into `xy_out` (at most `cap` doubles; 40 always suffices)
/// and the vertex count into `n_out`. A zero ellipse yields the four
/// rectangle corners exactly.
#[no_mangle]
pub extern "C" fn rlp_inflate_footprint(
    cx: f64,
    cy: f64,
    heading: f64,
    length: f64,
    width: f64,
    ellipse: *const f64,
    xy_out: *mut f64,
    cap: usize,
    n_out: *mut usize,
) -> RlpStatus {
    guard(|| {
        if n_out.is_null() {
            return fail(RlpStatus::NullArgument, "n_out is null");
        }
        let Some(raw) = (unsafe { slice_in(ellipse, 3) }) else {
            return fail(RlpStatus::NullArgument, "ellipse is null");
        };
        if !(length > 0.0 && width > 0.0) {
            return fail(RlpStatus::InvalidArgument, "length and width must be positive");
        }
        let rect = OrientedRect { cx, cy, heading, length, width };
        let ell = Ellipse { a: raw[0], b: raw[1], angle: raw[2] };
        if !(ell.a >= 0.0 && ell.b >= 0.0) {
            return fail(RlpStatus::InvalidArgument, "ellipse semi-axes must be non-negative");
        }
        let footprint = minkowski_inflate(&rect, &ell, DEFAULT_ARC_SAMPLES);
        let needed = 2 * footprint.vertices.len();
        let Some(out) = (unsafe { slice_out(xy_out, needed.min(cap)) }) else {
            return fail(RlpStatus::NullArgument, "xy_out is null");
        };
        if cap < needed {
            return fail(
                RlpStatus::InvalidArgument,
                format!("xy_out holds {cap} doubles, need {needed}"),
            );
        }
        for (chunk, v) in out.chunks_exact_mut(2).zip(&footprint.vertices) {
            chunk.copy_from_slice(v);
        }
        unsafe { *n_out = footprint.vertices.len() };
        RlpStatus::Ok
    })
}

/// Load a policy network from a checkpoint file.
#[no_mangle]
pub extern "C" fn rlp_policy_load(path: *const c_char, out: *mut *mut RlpPolicy) -> RlpStatus {
    guard(|| {
        if path.is_null() || out.is_null() {
            return fail(RlpStatus::NullArgument, "path and out must be non-null");
        }
        let path = match unsafe { CStr::from_ptr(path) }.to_str() {
            Ok(s) => s,
            Err(_) => return fail(RlpStatus::InvalidArgument, "path is not valid UTF-8"),
        };
        match load_checkpoint(std::path::Path::new(path)) {
            Ok(net) => {
                unsafe { *out = Box::into_raw(Box::new(RlpPolicy(net))) };
                RlpStatus::Ok
            }
            Err(e) => fail(RlpStatus::Io, e),
        }
    })
}

#[no_mangle]
pub extern "C" fn rlp_policy_free(policy: *mut RlpPolicy) {
    if !policy.is_null() {
        drop(unsafe { Box::from_raw(policy) });
    }
}

/// Number of observation features the policy expects.
#[no_mangle]
pub extern "C" fn rlp_policy_obs_len(policy: *const RlpPolicy, out: *mut usize) -> RlpStatus {
    guard(|| {
        if policy.is_null() || out.is_null() {
            return fail(RlpStatus::NullArgument, "policy and out must be non-null");
        }
        unsafe { *out = (*policy).0.input_len() };
        RlpStatus::Ok
    })
}

/// Number of action coordinates the policy emits.
#[no_mangle]
pub extern "C" fn rlp_policy_act_len(policy: *const RlpPolicy, out: *mut usize) -> RlpStatus {
    guard(|| {
        if policy.is_null() || out.is_null() {
            return fail(RlpStatus::NullArgument, "policy and out must be non-null");
        }
        unsafe { *out = (*policy).0.output_len() };
        RlpStatus::Ok
    })
}

/// Run the policy on `obs_len` observation features and write its
/// normalized action (each coordinate in [-1, 1]) into `act_out`, which
/// must hold at least the policy's action width. Scaling normalized
/// coordinates to physical ranges is up to the caller.
#[no_mangle]
pub extern "C" fn rlp_policy_act(
    policy: *const RlpPolicy,
    obs: *const f64,
    obs_len: usize,
    act_out: *mut f64,
    cap: usize,
) -> RlpStatus {
    guard(|| {
        if policy.is_null() {
            return fail(RlpStatus::NullArgument, "policy is null");
        }
        let net = unsafe { &(*policy).0 };
        let Some(raw) = (unsafe { slice_in(obs, obs_len) }) else {
            return fail(RlpStatus::NullArgument, "obs is null");
        };
        if obs_len != net.input_len() {
            return fail(
                RlpStatus::InvalidArgument,
                format!("policy expects {} features, got {obs_len}", net.input_len()),
            );
        }
        let needed = net.output_len();
        let Some(out) = (unsafe { slice_out(act_out, needed.min(cap)) }) else {
            return fail(RlpStatus::NullArgument, "act_out is null");
        };
        if cap < needed {
            return fail(
                RlpStatus::InvalidArgument,
                format!("act_out holds {cap} doubles, need {needed}"),
            );
        }
        out.copy_from_slice(&net.forward(raw));
        RlpStatus::Ok
    })
}

#[cfg(test)]
mod tests;
