//! Per-step reward: weighted comfort penalties from finite-difference
//! accelerations and jerks across the transition, deviation penalties on
//! the arrival state, and a collision term that dominates everything else.

use super::{check_collision_frame, Frame, Road, SimParams, WorldError};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RewardWeights {
    pub lat_acc: f64,
    pub long_acc: f64,
    pub lat_jerk: f64,
    pub long_jerk: f64,
    pub lateral_dev: f64,
    pub speed_dev: f64,
    pub collision_hit: f64,
    pub collision_free: f64,
}

impl Default for RewardWeights {
    fn default() -> Self {
        // Balance: the per-step no-collision term must beat the speed
        // penalty once the vehicle moves faster than roughly its spawn
        // speed, so holding position or bailing out of the corridor is
        // never worth more than driving on. Stopped flow is still negative
        // and a collision outweighs any comfort saving across an episode.
        RewardWeights {
            lat_acc: -0.05,
            long_acc: -0.05,
            lat_jerk: -0.01,
            long_jerk: -0.01,
            lateral_dev: -0.1,
            speed_dev: -0.04,
            collision_hit: -10.0,
            collision_free: 0.4,
        }
    }
}

/// Signed contribution of each term; `total` is their exact sum in field
/// order, so decompositions can be checked bit for bit.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RewardBreakdown {
    pub lat_acc: f64,
    pub long_acc: f64,
    pub lat_jerk: f64,
    pub long_jerk: f64,
    pub lateral_dev: f64,
    pub speed_dev: f64,
    pub collision: f64,
    pub total: f64,
}

/// Reward for the transition `prev` to `next`, which must be one
/// simulation step apart. `collision` overrides the geometric check when
/// the caller has already decided the outcome (for example against
/// inflated footprints).
pub fn compute_reward_frames(
    prev: &Frame,
    next: &Frame,
    road: &Road,
    params: &SimParams,
    collision: Option<bool>,
) -> Result<RewardBreakdown, WorldError> {
    let dt = next.time - prev.time;
    if (dt - params.delta).abs() > 1e-9 {
        return Err(WorldError::TimeMismatch { dt, delta: params.delta });
    }
    let delta = params.delta;
    let (a, b) = (&prev.av.frenet, &next.av.frenet);
    let w = &params.reward;

    let lat_acc = w.lat_acc * ((b.d_dot - a.d_dot) / delta).abs();
    let long_acc = w.long_acc * ((b.s_dot - a.s_dot) / delta).abs();
    let lat_jerk = w.lat_jerk * ((b.d_ddot - a.d_ddot) / delta).abs();
    let long_jerk = w.long_jerk * ((b.s_ddot - a.s_ddot) / delta).abs();
    let lateral_dev = w.lateral_dev * road.lateral_deviation(b.s, b.d);
    let speed_dev = w.speed_dev * (b.s_dot - road.speed_limit).abs();
    let hit = match collision {
        Some(hit) => hit,
        None => check_collision_frame(&road.line, next)?,
    };
    let collision = if hit { w.collision_hit } else { w.collision_free };

    let total = lat_acc + long_acc + lat_jerk + long_jerk + lateral_dev + speed_dev + collision;
    Ok(RewardBreakdown {
        lat_acc,
        long_acc,
        lat_jerk,
        long_jerk,
        lateral_dev,
        speed_dev,
        collision,
        total,
    })
}

pub fn compute_reward(
    prev: &Frame,
    next: &Frame,
    road: &Road,
    params: &SimParams,
) -> Result<RewardBreakdown, WorldError> {
    compute_reward_frames(prev, next, road, params, None)
}
