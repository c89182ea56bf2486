//! Reference lines, Frenet-frame conversions and quintic trajectory planning.
//!
//! A reference line is resampled from a waypoint polyline at uniform arc
//! length. Conversions between Cartesian poses and Frenet states use the
//! sampled tangent/curvature with linear interpolation between samples, so
//! a pose converted to Frenet and back lands on the original pose up to
//! floating-point error regardless of sampling density.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum FrenetError {
    #[error("degenerate input: {0}")]
    DegenerateInput(&'static str),
    #[error("sampling step must be positive and finite")]
    InvalidStep,
    #[error("arc length {s} outside the reference line")]
    OutOfRange { s: f64 },
    #[error("point projects outside the reference line span")]
    ProjectsOutside,
    #[error("lateral offset {d} exceeds corridor {corridor}")]
    OutOfCorridor { d: f64, corridor: f64 },
    #[error("singular projection: 1 - d*kappa = {one_minus_dk} <= 0")]
    SingularProjection { one_minus_dk: f64 },
    #[error("trajectory duration {t} outside [{min}, {max}]")]
    InvalidDuration { t: f64, min: f64, max: f64 },
    #[error("horizon {horizon} is not an integer multiple of step {delta}")]
    NonDivisibleHorizon { horizon: f64, delta: f64 },
    #[error("waypoint file line {line}: {reason}")]
    WaypointParse { line: usize, reason: &'static str },
}

/// Wrap an angle to (-pi, pi].
pub fn wrap_angle(a: f64) -> f64 {
    let mut r = a.rem_euclid(std::f64::consts::TAU);
    if r > std::f64::consts::PI {
        r -= std::f64::consts::TAU;
    }
    r
}

/// Vehicle pose in the plane. `speed` is along `heading`; `accel` is the
/// rate of change of `speed` (the acceleration component along the velocity
/// direction).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CartesianPose {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub speed: f64,
    pub accel: f64,
}

/// Longitudinal/lateral state along a reference line: arc length `s` and
/// signed lateral offset `d` (positive to the left of the line), each with
/// first and second time derivatives.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct FrenetState {
    pub s: f64,
    pub s_dot: f64,
    pub s_ddot: f64,
    pub d: f64,
    pub d_dot: f64,
    pub d_ddot: f64,
}

/// One uniformly spaced sample of a reference line.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LineSample {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub curvature: f64,
    /// Arc length from the start of the line; sample i sits at i * ds.
    pub s: f64,
}

/// Lateral corridor used when projecting poses onto a line.
pub const DEFAULT_CORRIDOR: f64 = 20.0;

/// A polyline resampled at uniform arc length, with per-sample heading and
/// curvature from central differences.
#[derive(Clone, Debug, PartialEq)]
pub struct ReferenceLine {
    samples: Vec<LineSample>,
    ds: f64,
}

impl ReferenceLine {
    /// Resample `waypoints` at uniform arc-length step `ds`. The line is
    /// truncated to the largest multiple of `ds` that fits the polyline.
    pub fn build(waypoints: &[(f64, f64)], ds: f64) -> Result<Self, FrenetError> {
        if !(ds > 0.0) || !ds.is_finite() {
            return Err(FrenetError::InvalidStep);
        }
        if waypoints.len() < 2 {
            return Err(FrenetError::DegenerateInput("fewer than 2 waypoints"));
        }
        for w in waypoints.windows(2) {
            if w[0] == w[1] {
                return Err(FrenetError::DegenerateInput("duplicate consecutive waypoints"));
            }
        }
        // Cumulative arc length along the polyline.
        let mut cum = Vec::with_capacity(waypoints.len());
        cum.push(0.0);
        for w in waypoints.windows(2) {
            let seg = ((w[1].0 - w[0].0).powi(2) + (w[1].1 - w[0].1).powi(2)).sqrt();
            cum.push(cum.last().unwrap() + seg);
        }
        let total = *cum.last().unwrap();
        let n = (total / ds + 1e-9).floor() as usize + 1;
        if n < 2 {
            return Err(FrenetError::DegenerateInput("polyline shorter than one step"));
        }

        // Walk the polyline once, emitting points at multiples of ds.
        let mut pts = Vec::with_capacity(n);
        let mut seg = 0usize;
        for i in 0..n {
            let s = i as f64 * ds;
            while seg + 2 < cum.len() && cum[seg + 1] < s {
                seg += 1;
            }
            let seg_len = cum[seg + 1] - cum[seg];
            let u = ((s - cum[seg]) / seg_len).clamp(0.0, 1.0);
            let (x0, y0) = waypoints[seg];
            let (x1, y1) = waypoints[seg + 1];
            pts.push((x0 + u * (x1 - x0), y0 + u * (y1 - y0)));
        }

        // Headings by central differences, one-sided at the ends.
        let mut headings = vec![0.0; n];
        for i in 0..n {
            let (a, b) = if i == 0 {
                (pts[0], pts[1])
            } else if i == n - 1 {
                (pts[n - 2], pts[n - 1])
            } else {
                (pts[i - 1], pts[i + 1])
            };
            headings[i] = (b.1 - a.1).atan2(b.0 - a.0);
        }
        // Curvature as the arc-length derivative of heading.
        let mut curvatures = vec![0.0; n];
        for i in 0..n {
            curvatures[i] = if i == 0 {
                wrap_angle(headings[1] - headings[0]) / ds
            } else if i == n - 1 {
                wrap_angle(headings[n - 1] - headings[n - 2]) / ds
            } else {
                wrap_angle(headings[i + 1] - headings[i - 1]) / (2.0 * ds)
            };
        }

        let samples = (0..n)
            .map(|i| LineSample {
                x: pts[i].0,
                y: pts[i].1,
                heading: headings[i],
                curvature: curvatures[i],
                s: i as f64 * ds,
            })
            .collect();
        Ok(ReferenceLine { samples, ds })
    }

    pub fn samples(&self) -> &[LineSample] {
        &self.samples
    }

    pub fn ds(&self) -> f64 {
        self.ds
    }

    /// Total arc length covered by the samples.
    pub fn length(&self) -> f64 {
        self.samples.last().unwrap().s
    }

    /// Interpolated (x, y, heading, curvature, d_curvature/ds) at arc length `s`.
    fn eval(&self, s: f64) -> Result<(f64, f64, f64, f64, f64), FrenetError> {
        if !s.is_finite() || s < -1e-9 || s > self.length() + 1e-9 {
            return Err(FrenetError::OutOfRange { s });
        }
        let n = self.samples.len();
        let i = ((s / self.ds).floor() as usize).min(n - 2);
        let u = (s - self.samples[i].s) / self.ds;
        let a = &self.samples[i];
        let b = &self.samples[i + 1];
        let x = a.x + u * (b.x - a.x);
        let y = a.y + u * (b.y - a.y);
        let heading = a.heading + u * wrap_angle(b.heading - a.heading);
        let kappa = a.curvature + u * (b.curvature - a.curvature);
        let dkappa = (b.curvature - a.curvature) / self.ds;
        Ok((x, y, heading, kappa, dkappa))
    }

    /// Index of the sample nearest to (x, y). With a hint, walks downhill
    /// from the hinted index and falls back to a full scan if the walk does
    /// not reach a local minimum that beats its neighborhood.
    fn nearest_index(&self, x: f64, y: f64, hint: Option<usize>) -> usize {
        let d2 = |i: usize| {
            let s = &self.samples[i];
            (s.x - x).powi(2) + (s.y - y).powi(2)
        };
        let n = self.samples.len();
        if let Some(h) = hint {
            let mut i = h.min(n - 1);
            loop {
                let here = d2(i);
                if i > 0 && d2(i - 1) < here {
                    i -= 1;
                } else if i + 1 < n && d2(i + 1) < here {
                    i += 1;
                } else {
                    break;
                }
            }
            // A local walk can stall on lines that bend back on themselves;
            // trust it only when the immediate neighborhood confirms it.
            let ok = (i.saturating_sub(2)..(i + 3).min(n)).all(|j| d2(j) >= d2(i));
            if ok {
                return i;
            }
        }
        (0..n)
            .min_by(|&a, &b| d2(a).partial_cmp(&d2(b)).unwrap())
            .unwrap()
    }

    /// Continuous arc length of the foot of the perpendicular from (x, y).
    fn project(&self, x: f64, y: f64, hint: Option<usize>) -> Result<f64, FrenetError> {
        let i = self.nearest_index(x, y, hint);
        // g(s) = (q - p(s)) . t(s); zero where q projects perpendicularly.
        let g = |s: f64| -> f64 {
            let (px, py, h, _, _) = self.eval(s).unwrap();
            (x - px) * h.cos() + (y - py) * h.sin()
        };
        let lo = (self.samples[i].s - self.ds).max(0.0);
        let hi = (self.samples[i].s + self.ds).min(self.length());
        let (mut lo, mut hi) = (lo, hi);
        let (glo, ghi) = (g(lo), g(hi));
        if glo < 0.0 && lo > 1e-12 || ghi > 0.0 && hi < self.length() - 1e-12 {
            // Nearest sample disagrees with the perpendicularity bracket;
            // widen once before giving up (can happen right at a sample).
            lo = (lo - self.ds).max(0.0);
            hi = (hi + self.ds).min(self.length());
        }
        let (glo, ghi) = (g(lo), g(hi));
        if glo < 0.0 || ghi > 0.0 {
            return Err(FrenetError::ProjectsOutside);
        }
        for _ in 0..70 {
            let mid = 0.5 * (lo + hi);
            if g(mid) >= 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// Convert a pose to a Frenet state. The pose's acceleration is taken to
    /// act purely along the velocity direction (no lateral slip), which makes
    /// this the exact inverse of [`ReferenceLine::frenet_to_cartesian`].
    pub fn cartesian_to_frenet(
        &self,
        pose: &CartesianPose,
        corridor: f64,
    ) -> Result<FrenetState, FrenetError> {
        self.cartesian_to_frenet_hinted(pose, corridor, None)
    }

    pub(crate) fn cartesian_to_frenet_hinted(
        &self,
        pose: &CartesianPose,
        corridor: f64,
        hint: Option<usize>,
    ) -> Result<FrenetState, FrenetError> {
        let s = self.project(pose.x, pose.y, hint)?;
        let (px, py, heading_r, kappa, dkappa) = self.eval(s)?;
        let (sin_r, cos_r) = heading_r.sin_cos();
        let d = -(pose.x - px) * sin_r + (pose.y - py) * cos_r;
        if d.abs() > corridor {
            return Err(FrenetError::OutOfCorridor { d, corridor });
        }
        let one_minus_dk = 1.0 - d * kappa;
        if one_minus_dk <= 0.0 {
            return Err(FrenetError::SingularProjection { one_minus_dk });
        }
        let dtheta = wrap_angle(pose.heading - heading_r);
        let (sin_t, cos_t) = dtheta.sin_cos();
        let s_dot = pose.speed * cos_t / one_minus_dk;
        let d_dot = pose.speed * sin_t;
        // Acceleration decomposition with the along-velocity convention:
        // tangential a_t = a cos(dtheta), normal a_n = a sin(dtheta).
        let a_t = pose.accel * cos_t;
        let a_n = pose.accel * sin_t;
        let s_ddot = (a_t + dkappa * s_dot * s_dot * d + 2.0 * kappa * s_dot * d_dot) / one_minus_dk;
        let d_ddot = a_n - kappa * s_dot * s_dot * one_minus_dk;
        Ok(FrenetState { s, s_dot, s_ddot, d, d_dot, d_ddot })
    }

    /// Convert a Frenet state back to a pose. The heading is the direction of
    /// the velocity vector, so it is only meaningful for nonzero speed.
    pub fn frenet_to_cartesian(&self, fs: &FrenetState) -> Result<CartesianPose, FrenetError> {
        let (px, py, heading_r, kappa, dkappa) = self.eval(fs.s)?;
        let one_minus_dk = 1.0 - fs.d * kappa;
        if one_minus_dk <= 0.0 {
            return Err(FrenetError::SingularProjection { one_minus_dk });
        }
        let (sin_r, cos_r) = heading_r.sin_cos();
        let x = px - fs.d * sin_r;
        let y = py + fs.d * cos_r;
        let vt = fs.s_dot * one_minus_dk;
        let vn = fs.d_dot;
        let speed = vt.hypot(vn);
        let heading = wrap_angle(heading_r + vn.atan2(vt));
        // Acceleration in the line frame, then projected on the velocity.
        let a_t = fs.s_ddot * one_minus_dk
            - dkappa * fs.s_dot * fs.s_dot * fs.d
            - 2.0 * kappa * fs.s_dot * fs.d_dot;
        let a_n = fs.d_ddot + kappa * fs.s_dot * fs.s_dot * one_minus_dk;
        let accel = if speed > 0.0 { (a_t * vt + a_n * vn) / speed } else { a_t };
        Ok(CartesianPose { x, y, heading, speed, accel })
    }

    /// Position and tangent heading of the point at arc length `s` offset by
    /// `d` to the left.
    pub fn point_at(&self, s: f64, d: f64) -> Result<(f64, f64, f64), FrenetError> {
        let (px, py, heading_r, _, _) = self.eval(s)?;
        let (sin_r, cos_r) = heading_r.sin_cos();
        Ok((px - d * sin_r, py + d * cos_r, heading_r))
    }

    /// Interpolated curvature at arc length `s`.
    pub fn curvature_at(&self, s: f64) -> Result<f64, FrenetError> {
        Ok(self.eval(s)?.3)
    }
}

/// Parse waypoints from text: one `x y` pair per line, `#` starts a comment,
/// blank lines ignored.
pub fn parse_waypoints(text: &str) -> Result<Vec<(f64, f64)>, FrenetError> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let body = raw.split('#').next().unwrap().trim();
        if body.is_empty() {
            continue;
        }
        let mut it = body.split_whitespace();
        let x = it
            .next()
            .and_then(|t| t.parse::<f64>().ok())
            .ok_or(FrenetError::WaypointParse { line, reason: "expected two numbers" })?;
        let y = it
            .next()
            .and_then(|t| t.parse::<f64>().ok())
            .ok_or(FrenetError::WaypointParse { line, reason: "expected two numbers" })?;
        if it.next().is_some() {
            return Err(FrenetError::WaypointParse { line, reason: "trailing tokens" });
        }
        if !x.is_finite() || !y.is_finite() {
            return Err(FrenetError::WaypointParse { line, reason: "non-finite coordinate" });
        }
        out.push((x, y));
    }
    Ok(out)
}

/// Degree-5 polynomial interpolating position, velocity and acceleration at
/// both ends of a time interval.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuinticCoeffs {
    pub c: [f64; 6],
    pub duration: f64,
}

impl QuinticCoeffs {
    pub fn value(&self, t: f64) -> f64 {
        let c = &self.c;
        ((((c[5] * t + c[4]) * t + c[3]) * t + c[2]) * t + c[1]) * t + c[0]
    }

    pub fn d1(&self, t: f64) -> f64 {
        let c = &self.c;
        (((5.0 * c[5] * t + 4.0 * c[4]) * t + 3.0 * c[3]) * t + 2.0 * c[2]) * t + c[1]
    }

    pub fn d2(&self, t: f64) -> f64 {
        let c = &self.c;
        ((20.0 * c[5] * t + 12.0 * c[4]) * t + 6.0 * c[3]) * t + 2.0 * c[2]
    }

    pub fn d3(&self, t: f64) -> f64 {
        let c = &self.c;
        (60.0 * c[5] * t + 24.0 * c[4]) * t + 6.0 * c[3]
    }
}

/// Coefficients of the quintic joining (p0, v0, a0) at t=0 to (p1, v1, a1)
/// at t=duration.
pub fn quintic_coeffs(
    p0: f64,
    v0: f64,
    a0: f64,
    p1: f64,
    v1: f64,
    a1: f64,
    duration: f64,
) -> Result<QuinticCoeffs, FrenetError> {
    if !(duration > 0.0) || !duration.is_finite() {
        return Err(FrenetError::InvalidDuration { t: duration, min: 0.0, max: f64::INFINITY });
    }
    let c0 = p0;
    let c1 = v0;
    let c2 = 0.5 * a0;
    let t = duration;
    let (t2, t3, t4, t5) = (t * t, t * t * t, t * t * t * t, t * t * t * t * t);
    let m = nalgebra::Matrix3::new(
        t3,
        t4,
        t5,
        3.0 * t2,
        4.0 * t3,
        5.0 * t4,
        6.0 * t,
        12.0 * t2,
        20.0 * t3,
    );
    let rhs = nalgebra::Vector3::new(
        p1 - (c0 + c1 * t + c2 * t2),
        v1 - (c1 + 2.0 * c2 * t),
        a1 - 2.0 * c2,
    );
    let sol = m
        .lu()
        .solve(&rhs)
        .ok_or(FrenetError::InvalidDuration { t: duration, min: 0.0, max: f64::INFINITY })?;
    Ok(QuinticCoeffs { c: [c0, c1, c2, sol[0], sol[1], sol[2]], duration })
}

/// Planning goal: reach lateral position `d_target` with zero lateral motion
/// and longitudinal speed `s_dot_target` after advancing `sigma_advance`
/// meters, all at `t_target` seconds from now.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GoalAction {
    pub t_target: f64,
    pub d_target: f64,
    pub sigma_advance: f64,
    pub s_dot_target: f64,
}

impl GoalAction {
    /// Longest allowed maneuver duration.
    pub const MAX_DURATION: f64 = 4.0;
}

/// A planned trajectory sampled every `delta` seconds from `delta` out to
/// the rollout horizon (the starting state is not included).
#[derive(Clone, Debug, PartialEq)]
pub struct PlannedTrajectory {
    pub states: Vec<FrenetState>,
    pub delta: f64,
    pub source_action: GoalAction,
}

/// Plan quintic lateral and longitudinal profiles over the action's duration
/// and sample them every `delta` up to `horizon`. Past the action duration
/// the vehicle is extrapolated at constant `d_target` and constant speed.
pub fn plan_trajectory(
    from: &FrenetState,
    action: &GoalAction,
    delta: f64,
    horizon: f64,
) -> Result<PlannedTrajectory, FrenetError> {
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(FrenetError::InvalidStep);
    }
    let steps_f = horizon / delta;
    let steps = steps_f.round();
    if steps < 1.0 || (steps_f - steps).abs() > 1e-9 {
        return Err(FrenetError::NonDivisibleHorizon { horizon, delta });
    }
    let steps = steps as usize;
    if !(action.t_target >= delta - 1e-12 && action.t_target <= GoalAction::MAX_DURATION + 1e-12) {
        return Err(FrenetError::InvalidDuration {
            t: action.t_target,
            min: delta,
            max: GoalAction::MAX_DURATION,
        });
    }
    let lat = quintic_coeffs(
        from.d,
        from.d_dot,
        from.d_ddot,
        action.d_target,
        0.0,
        0.0,
        action.t_target,
    )?;
    let s_end = from.s + action.sigma_advance;
    let lon = quintic_coeffs(
        from.s,
        from.s_dot,
        from.s_ddot,
        s_end,
        action.s_dot_target,
        0.0,
        action.t_target,
    )?;
    let mut states = Vec::with_capacity(steps);
    for k in 1..=steps {
        let tau = k as f64 * delta;
        let fs = if tau <= action.t_target + 1e-12 {
            FrenetState {
                s: lon.value(tau),
                s_dot: lon.d1(tau),
                s_ddot: lon.d2(tau),
                d: lat.value(tau),
                d_dot: lat.d1(tau),
                d_ddot: lat.d2(tau),
            }
        } else {
            FrenetState {
                s: s_end + action.s_dot_target * (tau - action.t_target),
                s_dot: action.s_dot_target,
                s_ddot: 0.0,
                d: action.d_target,
                d_dot: 0.0,
                d_ddot: 0.0,
            }
        };
        states.push(fs);
    }
    Ok(PlannedTrajectory { states, delta, source_action: *action })
}
