//! Traffic participant behavior: intelligent-driver-model car following
//! plus Poisson-triggered quintic lane changes.
//!
//! Participants react to each other but not to the controlled vehicle, so
//! rolling the same participant set forward without an RNG reproduces the
//! stepped evolution exactly whenever no lane change fires. Real steps and
//! predictions share one advance routine; the only difference is whether a
//! behavior RNG is supplied.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::frenet::quintic_coeffs;

use super::{LaneChangeState, Participant, Road, SimParams, VehicleState, WorldState};

/// Intelligent-driver-model parameters shared by all moving participants.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IdmParams {
    /// Maximum comfortable acceleration.
    pub accel_max: f64,
    /// Comfortable braking deceleration (positive).
    pub brake_comfort: f64,
    /// Desired time headway in seconds.
    pub headway: f64,
    /// Standstill bumper-to-bumper gap.
    pub min_gap: f64,
    /// Free-road exponent.
    pub exponent: f64,
    /// Hard deceleration floor applied when the model demands more.
    pub brake_limit: f64,
}

impl Default for IdmParams {
    fn default() -> Self {
        IdmParams {
            accel_max: 1.5,
            brake_comfort: 2.0,
            headway: 1.5,
            min_gap: 2.0,
            exponent: 4.0,
            brake_limit: 8.0,
        }
    }
}

/// Acceleration of a follower at speed `v` chasing `leader`, when present,
/// as bumper gap and leader speed.
pub(crate) fn idm_accel(
    v: f64,
    desired: f64,
    leader: Option<(f64, f64)>,
    p: &IdmParams,
) -> f64 {
    let free = if desired > 0.0 { (v / desired).powf(p.exponent) } else { 1.0 };
    let mut a = p.accel_max * (1.0 - free);
    if let Some((gap, leader_v)) = leader {
        let approach = v - leader_v;
        let s_star = p.min_gap
            + (v * p.headway + v * approach / (2.0 * (p.accel_max * p.brake_comfort).sqrt()))
                .max(0.0);
        let gap = gap.max(1e-3);
        a -= p.accel_max * (s_star / gap).powi(2);
    }
    a.max(-p.brake_limit)
}

/// Bumper-to-bumper gap to the nearest vehicle ahead in the same lane.
fn leader_of(idx: usize, snapshot: &[(f64, f64, f64, usize)]) -> Option<(f64, f64)> {
    let (s, _, len, lane) = snapshot[idx];
    let mut best: Option<(f64, f64)> = None;
    for (j, &(sj, vj, lj, lanej)) in snapshot.iter().enumerate() {
        if j == idx || lanej != lane || sj <= s {
            continue;
        }
        let gap = sj - s - 0.5 * (len + lj);
        if best.map_or(true, |(g, _)| gap < g) {
            best = Some((gap, vj));
        }
    }
    best
}

/// Advance every participant by one step. With `rng` present, moving
/// participants may begin lane changes; without it the evolution is the
/// deterministic prediction of the same dynamics.
pub(crate) fn advance_participants(
    road: &Road,
    participants: &mut [Participant],
    params: &SimParams,
    mut rng: Option<&mut ChaCha8Rng>,
) {
    let delta = params.delta;
    let snapshot: Vec<(f64, f64, f64, usize)> = participants
        .iter()
        .map(|p| {
            let v = &p.vehicle;
            (v.frenet.s, v.frenet.s_dot, v.length, v.lane)
        })
        .collect();
    let trigger_prob = 1.0 - (-params.lane_change_rate * delta).exp();

    for (i, p) in participants.iter_mut().enumerate() {
        if p.vehicle.is_static {
            continue;
        }

        if p.lane_change.is_none() {
            if let Some(r) = rng.as_deref_mut() {
                let u: f64 = r.random();
                if u < trigger_prob {
                    let lane = p.vehicle.lane;
                    let mut options: Vec<usize> = Vec::with_capacity(2);
                    if lane > 0 {
                        options.push(lane - 1);
                    }
                    if lane + 1 < road.lane_count {
                        options.push(lane + 1);
                    }
                    if !options.is_empty() {
                        let pick = if options.len() == 1 {
                            options[0]
                        } else {
                            options[r.random_range(0..options.len())]
                        };
                        let f = &p.vehicle.frenet;
                        let lateral = quintic_coeffs(
                            f.d,
                            f.d_dot,
                            f.d_ddot,
                            road.lane_center(pick),
                            0.0,
                            0.0,
                            params.lane_change_duration,
                        )
                        .expect("maneuver duration is positive");
                        p.vehicle.lane = pick;
                        p.lane_change = Some(LaneChangeState { lateral, elapsed: 0.0 });
                    }
                }
            }
        }

        let f = &mut p.vehicle.frenet;
        let v = f.s_dot;
        let a = idm_accel(v, p.desired_speed, leader_of(i, &snapshot), &params.idm);
        let mut v_next = v + a * delta;
        if v_next < 0.0 {
            v_next = 0.0;
        }
        f.s += 0.5 * (v + v_next) * delta;
        f.s_ddot = (v_next - v) / delta;
        f.s_dot = v_next;

        match &mut p.lane_change {
            Some(lc) => {
                lc.elapsed += delta;
                if lc.elapsed >= params.lane_change_duration - 1e-9 {
                    f.d = road.lane_center(p.vehicle.lane);
                    f.d_dot = 0.0;
                    f.d_ddot = 0.0;
                    p.lane_change = None;
                } else {
                    f.d = lc.lateral.value(lc.elapsed);
                    f.d_dot = lc.lateral.d1(lc.elapsed);
                    f.d_ddot = lc.lateral.d2(lc.elapsed);
                }
            }
            None => {
                f.d_dot = 0.0;
                f.d_ddot = 0.0;
            }
        }

        let kappa = road.line.curvature_at(f.s).unwrap_or(0.0);
        let vt = f.s_dot * (1.0 - f.d * kappa);
        p.vehicle.heading_dev =
            if vt == 0.0 && f.d_dot == 0.0 { 0.0 } else { f.d_dot.atan2(vt) };
    }
}

/// Step all traffic in a live world, consuming behavior randomness.
pub fn step_participants(world: &mut WorldState, params: &SimParams) {
    let road = world.road.clone();
    advance_participants(&road, &mut world.participants, params, Some(&mut world.rng.behavior));
}

/// Predicted states of one participant at 1..=n steps ahead.
#[derive(Clone, Debug, PartialEq)]
pub struct ParticipantTrack {
    pub id: u32,
    pub states: Vec<VehicleState>,
}

/// Deterministic forward rollout of a participant set: no lane changes can
/// begin, active maneuvers run to completion. Returns one track per
/// participant with `steps` entries covering times delta..=steps*delta.
pub fn predict_tracks(
    road: &Road,
    participants: &[Participant],
    steps: usize,
    params: &SimParams,
) -> Vec<ParticipantTrack> {
    let mut sim: Vec<Participant> = participants.to_vec();
    let mut tracks: Vec<ParticipantTrack> = participants
        .iter()
        .map(|p| ParticipantTrack { id: p.vehicle.id, states: Vec::with_capacity(steps) })
        .collect();
    for _ in 0..steps {
        advance_participants(road, &mut sim, params, None);
        for (t, p) in tracks.iter_mut().zip(&sim) {
            t.states.push(p.vehicle);
        }
    }
    tracks
}

/// Predict traffic over the planning horizon of a live world.
pub fn predict_participants(world: &WorldState, params: &SimParams) -> Vec<ParticipantTrack> {
    let steps = (params.horizon / params.delta).round() as usize;
    predict_tracks(&world.road, &world.participants, steps, params)
}
