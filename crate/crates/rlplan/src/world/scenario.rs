//! Scenario presets and randomized episode spawning.
//!
//! Four situations of increasing difficulty on a straight multi-lane road:
//! parked vehicles crowding the target lane's inner edge, moving traffic, a
//! required lane change, and a mix of parked and moving traffic across
//! three lanes. The
//! controlled vehicle always starts with a randomized lateral offset,
//! heading and speed, and must cover a fixed arc length without incident.

use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::frenet::{FrenetState, ReferenceLine};
use crate::rngs::{stream_rng, Stream};

use super::{
    Participant, Road, TargetLaneProfile, VehicleState, WorldError, WorldRng, WorldState,
};

pub const AV_LENGTH: f64 = 4.5;
pub const AV_WIDTH: f64 = 1.8;
const PARTICIPANT_LENGTH: f64 = 4.5;
const PARTICIPANT_WIDTH: f64 = 1.8;

const KMH: f64 = 1.0 / 3.6;

#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioSpec {
    pub id: u8,
    pub lane_count: usize,
    pub lane_width: f64,
    pub speed_limit: f64,
    pub spawn_lane: usize,
    pub target_lane: usize,
    /// Arc-length window, relative to the spawn point, inside which both
    /// the spawn lane and the target lane are acceptable.
    pub lane_change_window: (f64, f64),
    /// Upper bounds on the randomized participant counts.
    pub max_static: usize,
    pub max_dynamic: usize,
    /// Arc length from spawn to goal.
    pub goal_offset: f64,
    pub time_limit: f64,
    /// Termination threshold on distance outside the acceptable lane span.
    pub max_lateral_dev: f64,
    pub line_length: f64,
    pub line_ds: f64,
    pub spawn_s: f64,
}

impl ScenarioSpec {
    /// `1`: parked vehicles ahead on the target lane's inner edge.
    /// `2`: moving two-lane traffic.
    /// `3`: a mandatory lane change between two marks.
    /// `4`: three lanes mixing parked and moving vehicles.
    pub fn preset(id: u8) -> Result<Self, WorldError> {
        let base = ScenarioSpec {
            id,
            lane_count: 2,
            lane_width: 3.5,
            speed_limit: 50.0 * KMH,
            spawn_lane: 0,
            target_lane: 0,
            lane_change_window: (0.0, 0.0),
            max_static: 0,
            max_dynamic: 0,
            goal_offset: 130.0,
            time_limit: 60.0,
            max_lateral_dev: 1.5,
            line_length: 1200.0,
            line_ds: 0.5,
            spawn_s: 30.0,
        };
        Ok(match id {
            1 => ScenarioSpec { max_static: 2, ..base },
            2 => ScenarioSpec { max_dynamic: 5, ..base },
            3 => ScenarioSpec {
                lane_count: 3,
                target_lane: 1,
                lane_change_window: (40.0, 80.0),
                ..base
            },
            4 => ScenarioSpec {
                lane_count: 3,
                max_static: 2,
                max_dynamic: 3,
                ..base
            },
            _ => return Err(WorldError::BadScenario("preset ids are 1 through 4")),
        })
    }

    pub fn straight_line(&self) -> Arc<ReferenceLine> {
        let line = ReferenceLine::build(&[(0.0, 0.0), (self.line_length, 0.0)], self.line_ds)
            .expect("straight segment is well formed");
        Arc::new(line)
    }
}

fn draw_range(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.random_range(lo..hi)
    }
}

/// Spawn an episode on an explicit reference line. All randomness comes
/// from substreams of `seed`: spawn geometry first, then per-world
/// behavior and tracking streams, so episodes with equal seeds are
/// identical and distinct seeds are independent.
pub fn spawn_scenario_on(
    line: Arc<ReferenceLine>,
    spec: &ScenarioSpec,
    seed: u64,
) -> Result<WorldState, WorldError> {
    if spec.spawn_lane >= spec.lane_count || spec.target_lane >= spec.lane_count {
        return Err(WorldError::BadScenario("lane index outside the road"));
    }
    if spec.spawn_s + spec.goal_offset >= line.length() {
        return Err(WorldError::BadScenario("goal lies beyond the reference line"));
    }
    if spec.max_static > 0 && spec.goal_offset <= 60.0 {
        return Err(WorldError::BadScenario("parked vehicles need goal_offset above 60"));
    }
    if spec.max_dynamic > 0 && spec.spawn_s + 120.0 >= line.length() {
        return Err(WorldError::BadScenario("moving traffic needs 120 of line past the spawn"));
    }
    let mut rng = stream_rng(seed, Stream::Spawn);

    let road = Road {
        line,
        lane_count: spec.lane_count,
        lane_width: spec.lane_width,
        speed_limit: spec.speed_limit,
        profile: TargetLaneProfile {
            initial_lane: spec.spawn_lane,
            final_lane: spec.target_lane,
            switch_start_s: spec.spawn_s + spec.lane_change_window.0,
            switch_end_s: spec.spawn_s + spec.lane_change_window.1,
        },
    };

    let heading_dev = draw_range(&mut rng, -20f64.to_radians(), 20f64.to_radians());
    let speed = draw_range(&mut rng, 5.0 * KMH, 15.0 * KMH);
    let d = road.lane_center(spec.spawn_lane) + draw_range(&mut rng, -1.5, 1.5);
    let s = spec.spawn_s;
    let kappa = road.line.curvature_at(s)?;
    let av = VehicleState {
        id: 0,
        frenet: FrenetState {
            s,
            s_dot: speed * heading_dev.cos() / (1.0 - d * kappa),
            s_ddot: 0.0,
            d,
            d_dot: speed * heading_dev.sin(),
            d_ddot: 0.0,
        },
        heading_dev,
        length: AV_LENGTH,
        width: AV_WIDTH,
        lane: spec.spawn_lane,
        is_static: false,
    };

    let mut participants = Vec::new();
    let mut next_id = 1u32;

    if spec.max_static > 0 {
        let count = rng.random_range(1..=spec.max_static);
        let mut placed: Vec<f64> = Vec::with_capacity(count);
        for _ in 0..count {
            let lane = spec.target_lane;
            let mut s_p = 0.0;
            for attempt in 0.. {
                s_p = draw_range(
                    &mut rng,
                    spec.spawn_s + 35.0,
                    spec.spawn_s + spec.goal_offset - 25.0,
                );
                if placed.iter().all(|&q| (q - s_p).abs() >= 25.0) {
                    break;
                }
                if attempt >= 200 {
                    return Err(WorldError::BadScenario("could not separate parked vehicles"));
                }
            }
            placed.push(s_p);
            // Parked vehicles straddle the route lane's boundary toward the
            // road center. They intrude far enough to force a swerve but the
            // corridor around them stays inside the deviation envelope; cars
            // centered in the lane itself would leave no legal way past.
            let toward_center = if road.lane_center(lane) <= 0.0 { 0.5 } else { -0.5 };
            let d_p = road.lane_center(lane)
                + toward_center * road.lane_width
                + draw_range(&mut rng, -0.5, 0.5);
            let h_p = draw_range(&mut rng, -20f64.to_radians(), 20f64.to_radians());
            participants.push(Participant {
                vehicle: VehicleState {
                    id: next_id,
                    frenet: FrenetState { s: s_p, d: d_p, ..FrenetState::default() },
                    heading_dev: h_p,
                    length: PARTICIPANT_LENGTH,
                    width: PARTICIPANT_WIDTH,
                    lane,
                    is_static: true,
                },
                desired_speed: 0.0,
                lane_change: None,
            });
            next_id += 1;
        }
    }

    if spec.max_dynamic > 0 {
        let count = rng.random_range(1..=spec.max_dynamic);
        for _ in 0..count {
            let mut lane = 0;
            let mut s_p = 0.0;
            // Redraw lane and position together: a congested lane must not
            // pin the retry loop.
            for attempt in 0.. {
                lane = rng.random_range(0..spec.lane_count);
                s_p = draw_range(&mut rng, spec.spawn_s + 15.0, spec.spawn_s + 120.0);
                let clear = participants.iter().all(|p| {
                    p.vehicle.lane != lane || (p.vehicle.frenet.s - s_p).abs() >= 20.0
                });
                if clear {
                    break;
                }
                if attempt >= 200 {
                    return Err(WorldError::BadScenario("could not separate moving vehicles"));
                }
            }
            let d_p = road.lane_center(lane) + draw_range(&mut rng, -0.3, 0.3);
            let v_p = draw_range(&mut rng, 20.0 * KMH, 40.0 * KMH);
            let desired = draw_range(&mut rng, 30.0 * KMH, 50.0 * KMH).min(spec.speed_limit);
            participants.push(Participant {
                vehicle: VehicleState {
                    id: next_id,
                    frenet: FrenetState {
                        s: s_p,
                        s_dot: v_p,
                        d: d_p,
                        ..FrenetState::default()
                    },
                    heading_dev: 0.0,
                    length: PARTICIPANT_LENGTH,
                    width: PARTICIPANT_WIDTH,
                    lane,
                    is_static: false,
                },
                desired_speed: desired,
                lane_change: None,
            });
            next_id += 1;
        }
    }

    let behavior_seed: u64 = rng.random();
    let tracking_seed: u64 = rng.random();
    let world = WorldState {
        time: 0.0,
        av,
        participants,
        road,
        goal_s: spec.spawn_s + spec.goal_offset,
        collided: false,
        rng: WorldRng {
            behavior: stream_rng(behavior_seed, Stream::Behavior),
            tracking: stream_rng(tracking_seed, Stream::Tracking),
        },
    };
    debug_assert!(
        !world
            .participants
            .iter()
            .any(|p| super::check_collision(&world.road.line, &world.av, &p.vehicle).unwrap()),
        "spawn windows keep participants clear of the start pose"
    );
    Ok(world)
}

/// Spawn on the scenario's own straight reference line.
pub fn spawn_scenario(spec: &ScenarioSpec, seed: u64) -> Result<WorldState, WorldError> {
    spawn_scenario_on(spec.straight_line(), spec, seed)
}
