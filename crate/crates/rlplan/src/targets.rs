//! Critic regression targets. Four interchangeable constructions:
//!
//! * `td1`: the received reward plus one bootstrapped value.
//! * `rp`: rewards predicted along the trajectory planned when the
//!   transition was recorded, then a bootstrapped value at the horizon.
//! * `irp`: as `rp`, but the ego trajectory is re-planned with the target
//!   policy at every predicted step, matching how receding-horizon
//!   execution actually unfolds.
//! * `irp_up`: as `irp`, with ego and participant state covariances
//!   propagated along the horizon; confidence-ellipse-inflated footprints
//!   drive predicted collisions and the observed vehicle extents.
//!
//! Every construction treats the resulting target as a constant; no
//! gradient flows through the predicted rollout.

use thiserror::Error;

use crate::agent::{ActionBounds, ReplayTransition};
use crate::frenet::{plan_trajectory, FrenetError, FrenetState, PlannedTrajectory};
use crate::neural::Mlp;
use crate::uncertainty::{
    confidence_ellipse, inflated_extents, minkowski_inflate, polygons_collide,
    propagate_covariance, Ellipse, NoiseModel, StateCovariance, UncertaintyError, VehicleKind,
    DEFAULT_ARC_SAMPLES,
};
use crate::world::{
    compute_reward_frames, observe_frame, predict_tracks, vehicle_rect, FootprintInfo, Frame,
    Road, SimParams, VehicleState, WorldError,
};

#[derive(Debug, Error)]
pub enum TargetError {
    #[error("transition lacks the prediction context this strategy replays")]
    MissingContext,
    #[error("horizon {horizon} is not a positive whole number of steps of {delta}")]
    BadHorizon { horizon: f64, delta: f64 },
    #[error(transparent)]
    World(#[from] WorldError),
    #[error(transparent)]
    Frenet(#[from] FrenetError),
    #[error(transparent)]
    Uncertainty(#[from] UncertaintyError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Strategy {
    Td1,
    Rp,
    Irp,
    IrpUp,
}

/// Everything a target construction needs beyond the transition itself.
#[derive(Clone, Debug)]
pub struct TargetSpec {
    pub strategy: Strategy,
    pub delta: f64,
    pub horizon: f64,
    pub gamma: f64,
    /// Confidence mass for footprint inflation.
    pub conf: f64,
    pub noise: NoiseModel,
    /// Ego and participant covariances at the moment a transition is
    /// recorded; propagation starts from these.
    pub sigma0_av: StateCovariance,
    pub sigma0_participant: StateCovariance,
}

impl TargetSpec {
    pub fn new(strategy: Strategy, delta: f64, horizon: f64, gamma: f64) -> Self {
        TargetSpec {
            strategy,
            delta,
            horizon,
            gamma,
            conf: 0.95,
            noise: NoiseModel::default_for(delta),
            sigma0_av: StateCovariance::zero(),
            sigma0_participant: StateCovariance::zero(),
        }
    }

    /// Number of prediction steps in the horizon.
    pub fn steps(&self) -> Result<usize, TargetError> {
        let ratio = self.horizon / self.delta;
        let n = ratio.round();
        if !(n >= 1.0) || (ratio - n).abs() > 1e-9 {
            return Err(TargetError::BadHorizon { horizon: self.horizon, delta: self.delta });
        }
        Ok(n as usize)
    }
}

/// Read-only network pair used inside target constructions.
#[derive(Clone, Copy)]
pub struct TargetNets<'a> {
    pub actor: &'a Mlp,
    pub critic: &'a Mlp,
}

/// Environment plumbing shared by all transitions of a run.
pub struct TargetEnv<'a> {
    pub road: &'a Road,
    pub params: &'a SimParams,
    pub bounds: &'a ActionBounds,
}

fn q_of(nets: &TargetNets, obs: &[f64], u: &[f64]) -> f64 {
    let mut x = Vec::with_capacity(obs.len() + u.len());
    x.extend_from_slice(obs);
    x.extend_from_slice(u);
    nets.critic.forward(&x)[0]
}

/// The reduction every target bottoms out in: the environment reward, plus
/// each predicted reward discounted by its step, plus the bootstrap value
/// discounted one step further. Accumulates left to right.
pub fn discounted_target(env_reward: f64, predicted: &[f64], gamma: f64, bootstrap: f64) -> f64 {
    let mut y = env_reward;
    let mut discount = 1.0;
    for r in predicted {
        discount *= gamma;
        y += discount * r;
    }
    y + discount * gamma * bootstrap
}

/// One-step bootstrapped target on the stored next observation.
pub fn td1_target(tr: &ReplayTransition, nets: TargetNets, spec: &TargetSpec) -> f64 {
    if tr.done {
        return tr.reward;
    }
    let u = nets.actor.forward(&tr.next_obs);
    discounted_target(tr.reward, &[], spec.gamma, q_of(&nets, &tr.next_obs, &u))
}

/// Record of one predicted step, exposed for inspection and tests.
#[derive(Clone, Debug)]
pub struct RolloutStep {
    pub time: f64,
    pub av: VehicleState,
    pub participants: Vec<VehicleState>,
    pub reward: f64,
    pub collision: bool,
    /// Footprint polygons used for the collision decision at this step.
    pub av_footprint: Vec<[f64; 2]>,
    pub participant_footprints: Vec<Vec<[f64; 2]>>,
    pub sigma_av: Option<StateCovariance>,
    pub sigma_participant: Option<StateCovariance>,
}

/// Full trace of a predicted rollout, including the target value.
#[derive(Clone, Debug)]
pub struct PredictedRollout {
    pub steps: Vec<RolloutStep>,
    pub bootstrap_obs: Option<Vec<f64>>,
    pub bootstrap_u: Option<Vec<f64>>,
    pub y: f64,
}

struct UpTrack {
    sigma_av: StateCovariance,
    sigma_participant: StateCovariance,
    ell_av: Ellipse,
    ell_participant: Ellipse,
    conf: f64,
    noise: NoiseModel,
}

impl UpTrack {
    fn advance(&mut self) -> Result<(), TargetError> {
        self.sigma_av = propagate_covariance(&self.sigma_av, &self.noise, VehicleKind::Av)?;
        self.sigma_participant =
            propagate_covariance(&self.sigma_participant, &self.noise, VehicleKind::Participant)?;
        self.ell_av = confidence_ellipse(&self.sigma_av, self.conf)?;
        self.ell_participant = confidence_ellipse(&self.sigma_participant, self.conf)?;
        Ok(())
    }
}

struct RolloutScratch<'a> {
    env: &'a TargetEnv<'a>,
    up: Option<UpTrack>,
}

impl RolloutScratch<'_> {
    /// Observed vehicle extents for a frame: raw body sizes, or the
    /// extents of covariance-inflated footprints when tracking
    /// uncertainty.
    fn footprints(&self, frame: &Frame) -> Result<Option<FootprintInfo>, TargetError> {
        let Some(up) = &self.up else { return Ok(None) };
        let line = &self.env.road.line;
        let av = inflated_extents(&vehicle_rect(line, &frame.av)?, &up.ell_av);
        let participants = frame
            .participants
            .iter()
            .map(|p| Ok(inflated_extents(&vehicle_rect(line, p)?, &up.ell_participant)))
            .collect::<Result<Vec<_>, TargetError>>()?;
        Ok(Some(FootprintInfo { av, participants }))
    }

    /// Collision decision for a frame, recording the polygons used.
    fn collision(
        &self,
        frame: &Frame,
        record: Option<(&mut Vec<[f64; 2]>, &mut Vec<Vec<[f64; 2]>>)>,
    ) -> Result<bool, TargetError> {
        let line = &self.env.road.line;
        let av_rect = vehicle_rect(line, &frame.av)?;
        let av_poly: Vec<[f64; 2]> = match &self.up {
            Some(up) => minkowski_inflate(&av_rect, &up.ell_av, DEFAULT_ARC_SAMPLES).vertices,
            None => av_rect.corners().to_vec(),
        };
        let mut hit = false;
        let mut polys = Vec::new();
        for p in &frame.participants {
            let rect = vehicle_rect(line, p)?;
            let poly: Vec<[f64; 2]> = match &self.up {
                Some(up) => {
                    minkowski_inflate(&rect, &up.ell_participant, DEFAULT_ARC_SAMPLES).vertices
                }
                None => rect.corners().to_vec(),
            };
            if !hit && polygons_collide(&av_poly, &poly) {
                hit = true;
            }
            if record.is_some() {
                polys.push(poly);
            } else if hit {
                break;
            }
        }
        if let Some((av_out, parts_out)) = record {
            *av_out = av_poly;
            *parts_out = polys;
        }
        Ok(hit)
    }
}

fn av_state_from(
    template: &VehicleState,
    fs: FrenetState,
    env: &TargetEnv,
) -> Result<VehicleState, TargetError> {
    let mut v = VehicleState { frenet: fs, ..*template };
    crate::world::refresh_heading_dev(&env.road.line, &mut v)?;
    Ok(v)
}

/// Shared core of the prediction-based targets. `replan` selects between
/// following the stored plan and re-planning with the target actor;
/// `inflate` turns on uncertainty propagation.
fn rollout_target(
    tr: &ReplayTransition,
    nets: TargetNets,
    spec: &TargetSpec,
    env: &TargetEnv,
    replan: bool,
    inflate: bool,
    mut trace: Option<&mut PredictedRollout>,
) -> Result<f64, TargetError> {
    if tr.done {
        return Ok(tr.reward);
    }
    let n = spec.steps()?;
    if n == 1 {
        return Ok(td1_target(tr, nets, spec));
    }
    let ctx = tr.ctx.as_ref().ok_or(TargetError::MissingContext)?;
    // Replanning consumes only the first sample of each plan, and that sample
    // does not depend on how far past delta the plan is sampled, so a
    // one-step horizon buys the same numbers at a fraction of the work.
    let sample_horizon = if replan { spec.delta } else { spec.horizon };
    let plan: PlannedTrajectory = plan_trajectory(
        &ctx.av.frenet,
        &env.bounds.goal_action_on(&tr.action, env.road.route_center(ctx.av.frenet.s)),
        spec.delta,
        sample_horizon,
    )?;
    let tracks = predict_tracks(env.road, &ctx.participants, n, env.params);
    let frame_at = |k: usize, av_fs: FrenetState| -> Result<Frame, TargetError> {
        Ok(Frame {
            time: ctx.time + (k + 1) as f64 * spec.delta,
            av: av_state_from(&ctx.av, av_fs, env)?,
            participants: tracks.iter().map(|t| t.states[k]).collect(),
        })
    };

    let mut scratch = RolloutScratch {
        env,
        up: inflate.then(|| UpTrack {
            sigma_av: spec.sigma0_av,
            sigma_participant: spec.sigma0_participant,
            ell_av: Ellipse::zero(),
            ell_participant: Ellipse::zero(),
            conf: spec.conf,
            noise: spec.noise,
        }),
    };

    let mut prev = frame_at(0, plan.states[0])?;
    let mut rewards = Vec::with_capacity(n - 1);

    for k in 1..n {
        if let Some(up) = &mut scratch.up {
            up.advance()?;
        }
        let next_fs = if replan {
            let fp = scratch.footprints(&prev)?;
            let obs = observe_frame(&prev, env.road, env.params, fp.as_ref());
            let u = nets.actor.forward(&obs.features);
            plan_trajectory(
                &prev.av.frenet,
                &env.bounds.goal_action_on(&u, env.road.route_center(prev.av.frenet.s)),
                spec.delta,
                spec.delta,
            )?
            .states[0]
        } else {
            plan.states[k]
        };
        let next = frame_at(k, next_fs)?;

        let mut av_poly = Vec::new();
        let mut part_polys = Vec::new();
        let record = trace.is_some();
        let hit = scratch.collision(
            &next,
            record.then_some((&mut av_poly, &mut part_polys)),
        )?;
        let reward =
            compute_reward_frames(&prev, &next, env.road, env.params, Some(hit))?.total;
        rewards.push(reward);

        if let Some(out) = trace.as_deref_mut() {
            let up = scratch.up.as_ref();
            out.steps.push(RolloutStep {
                time: next.time,
                av: next.av,
                participants: next.participants.clone(),
                reward,
                collision: hit,
                av_footprint: av_poly,
                participant_footprints: part_polys,
                sigma_av: up.map(|u| u.sigma_av),
                sigma_participant: up.map(|u| u.sigma_participant),
            });
        }

        if hit {
            // A predicted collision ends the rollout; nothing past it is
            // worth bootstrapping.
            let y = discounted_target(tr.reward, &rewards, spec.gamma, 0.0);
            if let Some(out) = trace {
                out.y = y;
            }
            return Ok(y);
        }
        prev = next;
    }

    if let Some(up) = &mut scratch.up {
        up.advance()?;
    }
    let fp = scratch.footprints(&prev)?;
    let obs = observe_frame(&prev, env.road, env.params, fp.as_ref());
    let u = nets.actor.forward(&obs.features);
    let y = discounted_target(tr.reward, &rewards, spec.gamma, q_of(&nets, &obs.features, &u));
    if let Some(out) = trace {
        out.bootstrap_obs = Some(obs.features);
        out.bootstrap_u = Some(u);
        out.y = y;
    }
    Ok(y)
}

pub fn rp_target(
    tr: &ReplayTransition,
    nets: TargetNets,
    spec: &TargetSpec,
    env: &TargetEnv,
) -> Result<f64, TargetError> {
    rollout_target(tr, nets, spec, env, false, false, None)
}

pub fn irp_target(
    tr: &ReplayTransition,
    nets: TargetNets,
    spec: &TargetSpec,
    env: &TargetEnv,
) -> Result<f64, TargetError> {
    rollout_target(tr, nets, spec, env, true, false, None)
}

pub fn irp_up_target(
    tr: &ReplayTransition,
    nets: TargetNets,
    spec: &TargetSpec,
    env: &TargetEnv,
) -> Result<f64, TargetError> {
    rollout_target(tr, nets, spec, env, true, true, None)
}

/// Dispatch on the configured strategy.
pub fn critic_target(
    tr: &ReplayTransition,
    nets: TargetNets,
    spec: &TargetSpec,
    env: &TargetEnv,
) -> Result<f64, TargetError> {
    match spec.strategy {
        Strategy::Td1 => Ok(td1_target(tr, nets, spec)),
        Strategy::Rp => rp_target(tr, nets, spec, env),
        Strategy::Irp => irp_target(tr, nets, spec, env),
        Strategy::IrpUp => irp_up_target(tr, nets, spec, env),
    }
}

/// Re-run the configured strategy with full per-step recording.
pub fn predict_rollout(
    tr: &ReplayTransition,
    nets: TargetNets,
    spec: &TargetSpec,
    env: &TargetEnv,
) -> Result<PredictedRollout, TargetError> {
    let mut out =
        PredictedRollout { steps: Vec::new(), bootstrap_obs: None, bootstrap_u: None, y: 0.0 };
    let (replan, inflate) = match spec.strategy {
        Strategy::Td1 => {
            out.y = td1_target(tr, nets, spec);
            return Ok(out);
        }
        Strategy::Rp => (false, false),
        Strategy::Irp => (true, false),
        Strategy::IrpUp => (true, true),
    };
    let y = rollout_target(tr, nets, spec, env, replan, inflate, Some(&mut out))?;
    out.y = y;
    Ok(out)
}

#[cfg(test)]
mod tests;
