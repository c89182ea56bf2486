//! Road world: scenario spawning, traffic behavior, observations, rewards,
//! collision checks and episode bookkeeping.
//!
//! All stochasticity flows through [`WorldRng`], split into a behavior
//! stream (traffic decisions) and a tracking stream (noise applied when the
//! controlled vehicle executes a plan), so the two can be toggled
//! independently without perturbing each other.

mod collision;
mod observe;
mod reward;
mod scenario;
mod traffic;

pub use collision::{check_collision, check_collision_frame, vehicle_rect};
pub use observe::{
    observe, observe_frame, observation_len, FootprintInfo, Observation, AV_FEATURES,
    PARTICIPANT_FEATURES,
};
pub use reward::{compute_reward, compute_reward_frames, RewardBreakdown, RewardWeights};
pub use scenario::{spawn_scenario, spawn_scenario_on, ScenarioSpec, AV_LENGTH, AV_WIDTH};
pub use traffic::{predict_participants, predict_tracks, step_participants, IdmParams, ParticipantTrack};

use std::sync::Arc;

use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::frenet::{FrenetError, FrenetState, PlannedTrajectory, ReferenceLine};

#[derive(Debug, Error)]
pub enum WorldError {
    #[error(transparent)]
    Frenet(#[from] FrenetError),
    #[error("frame times {dt} apart, expected one step of {delta}")]
    TimeMismatch { dt: f64, delta: f64 },
    #[error("bad scenario: {0}")]
    BadScenario(&'static str),
    #[error("vehicle left the drivable corridor")]
    LeftCorridor,
}

/// A vehicle somewhere on the road. `heading_dev` is the heading relative
/// to the road tangent at the vehicle's arc length.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VehicleState {
    pub id: u32,
    pub frenet: FrenetState,
    pub heading_dev: f64,
    pub length: f64,
    pub width: f64,
    pub lane: usize,
    pub is_static: bool,
}

/// Lane the route asks the vehicle to be in, as a function of arc length.
/// Between `switch_start_s` and `switch_end_s` both the initial and the
/// final lane are acceptable (the lane-change window).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TargetLaneProfile {
    pub initial_lane: usize,
    pub final_lane: usize,
    pub switch_start_s: f64,
    pub switch_end_s: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Road {
    pub line: Arc<ReferenceLine>,
    pub lane_count: usize,
    pub lane_width: f64,
    pub speed_limit: f64,
    pub profile: TargetLaneProfile,
}

impl Road {
    /// Lateral offset of the center of lane `i`. Lanes are symmetric about
    /// the reference line, ordered rightmost first.
    pub fn lane_center(&self, lane: usize) -> f64 {
        (lane as f64 - 0.5 * (self.lane_count - 1) as f64) * self.lane_width
    }

    /// Interval of acceptable lane-center offsets at arc length `s`.
    pub fn target_span(&self, s: f64) -> (f64, f64) {
        let p = &self.profile;
        let (a, b) = (self.lane_center(p.initial_lane), self.lane_center(p.final_lane));
        if p.initial_lane == p.final_lane || s < p.switch_start_s {
            (a, a)
        } else if s >= p.switch_end_s {
            (b, b)
        } else {
            (a.min(b), a.max(b))
        }
    }

    /// Midpoint of the acceptable span; the route datum for observations.
    pub fn route_center(&self, s: f64) -> f64 {
        let (lo, hi) = self.target_span(s);
        0.5 * (lo + hi)
    }

    /// Distance of lateral offset `d` outside the acceptable span.
    pub fn lateral_deviation(&self, s: f64, d: f64) -> f64 {
        let (lo, hi) = self.target_span(s);
        (lo - d).max(d - hi).max(0.0)
    }
}

/// One traffic participant plus its behavior state.
#[derive(Clone, Debug, PartialEq)]
pub struct Participant {
    pub vehicle: VehicleState,
    pub desired_speed: f64,
    pub lane_change: Option<LaneChangeState>,
}

/// An in-progress lateral maneuver; the target lane is already stored in
/// the vehicle's `lane` field.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LaneChangeState {
    pub lateral: crate::frenet::QuinticCoeffs,
    pub elapsed: f64,
}

/// Behavior and tracking noise streams of one world.
#[derive(Clone, Debug)]
pub struct WorldRng {
    pub behavior: ChaCha8Rng,
    pub tracking: ChaCha8Rng,
}

impl PartialEq for WorldRng {
    fn eq(&self, other: &Self) -> bool {
        let key = |r: &ChaCha8Rng| (r.get_seed(), r.get_stream(), r.get_word_pos());
        key(&self.behavior) == key(&other.behavior)
            && key(&self.tracking) == key(&other.tracking)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct WorldState {
    pub time: f64,
    pub av: VehicleState,
    pub participants: Vec<Participant>,
    pub road: Road,
    pub goal_s: f64,
    /// Latched at the first step in which the controlled vehicle overlaps
    /// any participant.
    pub collided: bool,
    pub rng: WorldRng,
}

/// Snapshot of the physical state of one instant, detached from RNG and
/// bookkeeping; rewards and observations work on these.
#[derive(Clone, Debug, PartialEq)]
pub struct Frame {
    pub time: f64,
    pub av: VehicleState,
    pub participants: Vec<VehicleState>,
}

impl WorldState {
    pub fn frame(&self) -> Frame {
        Frame {
            time: self.time,
            av: self.av,
            participants: self.participants.iter().map(|p| p.vehicle).collect(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EpisodeStatus {
    Running,
    Success,
    Collision,
    OffCourse,
    Timeout,
}

/// Direct steering/throttle command for the planner-free baseline.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ControlAction {
    pub steer: f64,
    pub accel: f64,
}

/// Everything about world evolution that is not scenario-specific.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SimParams {
    /// Simulation step in seconds.
    pub delta: f64,
    /// Planning/prediction horizon in seconds.
    pub horizon: f64,
    /// Maximum number of participants in an observation.
    pub n_max_obs: usize,
    /// Participants farther than this along the line are not observed.
    pub obs_range: f64,
    /// Lateral corridor for Cartesian-to-Frenet projection.
    pub corridor: f64,
    pub reward: RewardWeights,
    /// Tracking noise: position std per step when following a trajectory.
    pub sigma_pos: f64,
    /// Tracking noise: speed std per step.
    pub sigma_speed: f64,
    /// Lane-change triggers per second for each moving participant.
    pub lane_change_rate: f64,
    /// Duration of one lane-change maneuver in seconds.
    pub lane_change_duration: f64,
    pub idm: IdmParams,
    /// Wheelbase used by direct-control stepping.
    pub wheelbase: f64,
}

impl Default for SimParams {
    fn default() -> Self {
        SimParams {
            delta: 0.1,
            horizon: 3.0,
            n_max_obs: 5,
            obs_range: 100.0,
            corridor: crate::frenet::DEFAULT_CORRIDOR,
            reward: RewardWeights::default(),
            sigma_pos: 0.05,
            sigma_speed: 0.1,
            lane_change_rate: 0.03,
            lane_change_duration: 4.0,
            idm: IdmParams::default(),
            wheelbase: 2.7,
        }
    }
}

pub(crate) fn refresh_heading_dev(
    line: &ReferenceLine,
    v: &mut VehicleState,
) -> Result<(), WorldError> {
    let kappa = line.curvature_at(v.frenet.s)?;
    let vt = v.frenet.s_dot * (1.0 - v.frenet.d * kappa);
    v.heading_dev = if vt == 0.0 && v.frenet.d_dot == 0.0 {
        0.0
    } else {
        v.frenet.d_dot.atan2(vt)
    };
    Ok(())
}

/// Move the controlled vehicle to the first sample of `traj`, perturbed by
/// tracking noise, advance time by one step and update the collision latch.
pub fn step_av(
    world: &mut WorldState,
    traj: &PlannedTrajectory,
    params: &SimParams,
) -> Result<(), WorldError> {
    let mut next = traj.states[0];
    if params.sigma_pos > 0.0 {
        let n = Normal::new(0.0, params.sigma_pos).unwrap();
        next.s += n.sample(&mut world.rng.tracking);
        next.d += n.sample(&mut world.rng.tracking);
    }
    if params.sigma_speed > 0.0 {
        let n = Normal::new(0.0, params.sigma_speed).unwrap();
        next.s_dot += n.sample(&mut world.rng.tracking);
        next.d_dot += n.sample(&mut world.rng.tracking);
    }
    world.av.frenet = next;
    refresh_heading_dev(&world.road.line, &mut world.av)?;
    world.time += params.delta;
    settle_collision_latch(world)?;
    Ok(())
}

/// Advance the controlled vehicle with a kinematic bicycle step driven by a
/// direct control action (no planner involved). Forward Euler in Cartesian
/// coordinates, then projected back onto the line.
pub fn step_av_control(
    world: &mut WorldState,
    ctrl: &ControlAction,
    params: &SimParams,
) -> Result<(), WorldError> {
    let line = Arc::clone(&world.road.line);
    let pose = line.frenet_to_cartesian(&world.av.frenet)?;
    let delta = params.delta;
    let mut x = pose.x + pose.speed * pose.heading.cos() * delta;
    let mut y = pose.y + pose.speed * pose.heading.sin() * delta;
    let heading = crate::frenet::wrap_angle(
        pose.heading + pose.speed * ctrl.steer.tan() / params.wheelbase * delta,
    );
    let mut speed = (pose.speed + ctrl.accel * delta).max(0.0);
    if params.sigma_pos > 0.0 {
        let n = Normal::new(0.0, params.sigma_pos).unwrap();
        x += n.sample(&mut world.rng.tracking);
        y += n.sample(&mut world.rng.tracking);
    }
    if params.sigma_speed > 0.0 {
        let n = Normal::new(0.0, params.sigma_speed).unwrap();
        speed = (speed + n.sample(&mut world.rng.tracking)).max(0.0);
    }
    let accel = (speed - pose.speed) / delta;
    let new_pose = crate::frenet::CartesianPose { x, y, heading, speed, accel };
    let hint = (world.av.frenet.s / line.ds()) as usize;
    let fs = match line.cartesian_to_frenet_hinted(&new_pose, params.corridor, Some(hint)) {
        Ok(fs) => fs,
        Err(FrenetError::OutOfCorridor { .. }) | Err(FrenetError::ProjectsOutside) => {
            return Err(WorldError::LeftCorridor)
        }
        Err(e) => return Err(e.into()),
    };
    world.av.frenet = fs;
    world.av.heading_dev =
        crate::frenet::wrap_angle(heading - line_heading_at(&line, fs.s)?);
    world.time += delta;
    settle_collision_latch(world)?;
    Ok(())
}

fn line_heading_at(line: &ReferenceLine, s: f64) -> Result<f64, WorldError> {
    Ok(line.point_at(s, 0.0)?.2)
}

fn settle_collision_latch(world: &mut WorldState) -> Result<(), WorldError> {
    if !world.collided {
        for p in &world.participants {
            if check_collision(&world.road.line, &world.av, &p.vehicle)? {
                world.collided = true;
                break;
            }
        }
    }
    Ok(())
}

/// Terminal conditions, checked in order: a latched collision, reaching the
/// goal arc length, leaving the target-lane envelope, running out of time.
pub fn episode_status(
    world: &WorldState,
    time_limit: f64,
    max_lateral_dev: f64,
) -> EpisodeStatus {
    if world.collided {
        EpisodeStatus::Collision
    } else if world.av.frenet.s >= world.goal_s {
        EpisodeStatus::Success
    } else if world.road.lateral_deviation(world.av.frenet.s, world.av.frenet.d) > max_lateral_dev
    {
        EpisodeStatus::OffCourse
    } else if world.time >= time_limit - 1e-9 {
        EpisodeStatus::Timeout
    } else {
        EpisodeStatus::Running
    }
}
