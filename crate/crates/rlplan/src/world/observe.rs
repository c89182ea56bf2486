//! Observation vectors fed to the policy and value networks.
//!
//! Layout: 9 ego features followed by 8 features for each of up to
//! `n_max_obs` participants, nearest first by absolute longitudinal gap,
//! zero-padded with a validity flag when fewer are in range. All features
//! are divided by fixed scales chosen so typical magnitudes land near one;
//! none are clipped.

use super::{Frame, Road, SimParams, WorldState};

pub const AV_FEATURES: usize = 9;
pub const PARTICIPANT_FEATURES: usize = 8;

/// Divisors applied per feature. Position-like features use the
/// observation range, lateral offsets use one lane width, speeds use a
/// highway-scale 20 m/s, accelerations 5 m/s^2, headings one radian.
const SCALE_DIST: f64 = 100.0;
const SCALE_LAT: f64 = 3.5;
const SCALE_SPEED: f64 = 20.0;
const SCALE_ACCEL: f64 = 5.0;
const SCALE_SIZE: f64 = 5.0;

/// Optional footprint overrides: when planning under uncertainty the
/// observed extents are those of covariance-inflated footprints rather
/// than the raw bodies. Participant entries align with frame order.
#[derive(Clone, Debug)]
pub struct FootprintInfo {
    pub av: (f64, f64),
    pub participants: Vec<(f64, f64)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Observation {
    pub features: Vec<f64>,
}

impl Observation {
    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }
}

pub fn observation_len(params: &SimParams) -> usize {
    AV_FEATURES + PARTICIPANT_FEATURES * params.n_max_obs
}

/// Build the observation for a frame. Lateral offsets are measured from
/// the route datum (midpoint of the acceptable lane span) at each
/// vehicle's own arc length, so the same controller generalizes across
/// target lanes.
pub fn observe_frame(
    frame: &Frame,
    road: &Road,
    params: &SimParams,
    footprints: Option<&FootprintInfo>,
) -> Observation {
    let av = &frame.av;
    let datum = road.route_center(av.frenet.s);
    let (av_len, av_wid) = footprints.map_or((av.length, av.width), |f| f.av);
    let remaining = (road.profile.switch_end_s.max(av.frenet.s) - av.frenet.s).min(SCALE_DIST);

    let mut features = Vec::with_capacity(observation_len(params));
    features.push((av.frenet.d - datum) / SCALE_LAT);
    features.push(av.frenet.d_dot / SCALE_SPEED);
    features.push(av.frenet.s_dot / SCALE_SPEED);
    features.push(av.frenet.s_ddot / SCALE_ACCEL);
    features.push(av.heading_dev);
    features.push((road.speed_limit - av.frenet.s_dot) / SCALE_SPEED);
    features.push(remaining / SCALE_DIST);
    features.push(av_len / SCALE_SIZE);
    features.push(av_wid / SCALE_SIZE);

    // Participants within range, nearest first by |longitudinal gap|.
    let mut order: Vec<(f64, usize)> = frame
        .participants
        .iter()
        .enumerate()
        .filter_map(|(i, p)| {
            let rel = p.frenet.s - av.frenet.s;
            (rel.abs() <= params.obs_range).then_some((rel.abs(), i))
        })
        .collect();
    order.sort_by(|a, b| a.partial_cmp(b).expect("finite gaps"));
    order.truncate(params.n_max_obs);

    for &(_, i) in &order {
        let p = &frame.participants[i];
        let (p_len, p_wid) = footprints
            .and_then(|f| f.participants.get(i).copied())
            .unwrap_or((p.length, p.width));
        features.push((p.frenet.s - av.frenet.s) / SCALE_DIST);
        features.push((p.frenet.d - road.route_center(p.frenet.s)) / SCALE_LAT);
        features.push(p.frenet.s_dot / SCALE_SPEED);
        features.push(p.frenet.d_dot / SCALE_SPEED);
        features.push(p.heading_dev);
        features.push(p_len / SCALE_SIZE);
        features.push(p_wid / SCALE_SIZE);
        features.push(1.0);
    }
    for _ in order.len()..params.n_max_obs {
        features.extend_from_slice(&[0.0; PARTICIPANT_FEATURES]);
    }

    Observation { features }
}

pub fn observe(world: &WorldState, params: &SimParams) -> Observation {
    observe_frame(&world.frame(), &world.road, params, None)
}
