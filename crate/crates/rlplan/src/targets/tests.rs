use std::sync::Arc;

use rand::Rng;

use super::*;
use crate::agent::PredictionContext;
use crate::frenet::ReferenceLine;
use crate::neural::Activation;
use crate::rngs::{stream_rng, Stream};
use crate::world::{
    check_collision_frame, observation_len, observe, refresh_heading_dev, step_av,
    step_participants, Participant, Road, RewardWeights, TargetLaneProfile, WorldRng, WorldState,
};

fn straight_road(lane_count: usize) -> Road {
    let pts: Vec<(f64, f64)> = (0..=24).map(|i| (i as f64 * 50.0, 0.0)).collect();
    Road {
        line: Arc::new(ReferenceLine::build(&pts, 0.5).unwrap()),
        lane_count,
        lane_width: 3.5,
        speed_limit: 50.0 / 3.6,
        profile: TargetLaneProfile {
            initial_lane: 0,
            final_lane: 0,
            switch_start_s: 0.0,
            switch_end_s: 0.0,
        },
    }
}

fn av_at(road: &Road, s: f64, d: f64, v: f64) -> VehicleState {
    let mut av = VehicleState {
        id: 0,
        frenet: FrenetState { s, s_dot: v, d, ..FrenetState::default() },
        heading_dev: 0.0,
        length: 4.5,
        width: 1.8,
        lane: 0,
        is_static: false,
    };
    refresh_heading_dev(&road.line, &mut av).unwrap();
    av
}

fn car(road: &Road, id: u32, s: f64, d: f64, v: f64, desired: f64) -> Participant {
    let mut vehicle = VehicleState {
        id,
        frenet: FrenetState { s, s_dot: v, d, ..FrenetState::default() },
        heading_dev: 0.0,
        length: 4.5,
        width: 1.8,
        lane: 0,
        is_static: v == 0.0 && desired == 0.0,
    };
    refresh_heading_dev(&road.line, &mut vehicle).unwrap();
    Participant { vehicle, desired_speed: desired, lane_change: None }
}

/// Tracking noise and lane changes off so rollouts are exactly replayable.
fn quiet_params() -> SimParams {
    SimParams {
        sigma_pos: 0.0,
        sigma_speed: 0.0,
        lane_change_rate: 0.0,
        ..SimParams::default()
    }
}

fn world_from(road: &Road, av: VehicleState, participants: Vec<Participant>, seed: u64) -> WorldState {
    WorldState {
        time: 0.0,
        av,
        participants,
        road: road.clone(),
        goal_s: av.frenet.s + 130.0,
        collided: false,
        rng: WorldRng {
            behavior: stream_rng(seed, Stream::Behavior),
            tracking: stream_rng(seed, Stream::Tracking),
        },
    }
}

/// Take one environment step with action `u` and package the transition the
/// way the training loop would.
fn record_transition(
    world: &mut WorldState,
    u: &[f64],
    params: &SimParams,
    bounds: &ActionBounds,
) -> ReplayTransition {
    let ctx = PredictionContext {
        time: world.time,
        av: world.av,
        participants: world.participants.clone(),
    };
    let obs = observe(world, params).features;
    let traj =
        plan_trajectory(&world.av.frenet, &bounds.goal_action(u), params.delta, params.horizon)
            .unwrap();
    let prev = world.frame();
    step_participants(world, params);
    step_av(world, &traj, params).unwrap();
    let next = world.frame();
    let reward = compute_reward_frames(&prev, &next, &world.road, params, None).unwrap().total;
    let next_obs = observe(world, params).features;
    ReplayTransition { obs, action: u.to_vec(), reward, next_obs, done: false, ctx: Some(ctx) }
}

struct Nets {
    actor: Mlp,
    critic: Mlp,
}

impl Nets {
    fn random(obs_len: usize, act_dim: usize, seed: u64) -> Self {
        let mut rng = stream_rng(seed, Stream::Init);
        Nets {
            actor: Mlp::new(&[obs_len, 16, 16, act_dim], Activation::Tanh, &mut rng).unwrap(),
            critic: Mlp::new(&[obs_len + act_dim, 16, 16, 1], Activation::Identity, &mut rng)
                .unwrap(),
        }
    }

    fn view(&self) -> TargetNets<'_> {
        TargetNets { actor: &self.actor, critic: &self.critic }
    }
}

/// Actor that outputs `u` regardless of the observation.
fn const_actor(obs_len: usize, u: &[f64]) -> Mlp {
    let mut rng = stream_rng(7, Stream::Init);
    let mut m = Mlp::new(&[obs_len, 4, u.len()], Activation::Tanh, &mut rng).unwrap();
    for layer in &mut m.weights {
        layer.iter_mut().for_each(|w| *w = 0.0);
    }
    for layer in &mut m.biases {
        layer.iter_mut().for_each(|b| *b = 0.0);
    }
    let last = m.biases.len() - 1;
    for (b, ui) in m.biases[last].iter_mut().zip(u) {
        *b = ui.atanh();
    }
    m
}

fn zeroed(mut m: Mlp) -> Mlp {
    for layer in &mut m.weights {
        layer.iter_mut().for_each(|w| *w = 0.0);
    }
    for layer in &mut m.biases {
        layer.iter_mut().for_each(|b| *b = 0.0);
    }
    m
}

fn random_u(rng: &mut rand_chacha::ChaCha8Rng) -> Vec<f64> {
    (0..4).map(|_| rng.random_range(-1.0..1.0)).collect()
}

fn point_in_convex(poly: &[[f64; 2]], p: [f64; 2], tol: f64) -> bool {
    let n = poly.len();
    (0..n).all(|i| {
        let a = poly[i];
        let b = poly[(i + 1) % n];
        (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]) >= -tol
    })
}

#[test]
fn done_transitions_use_only_the_received_reward() {
    let road = straight_road(2);
    let params = quiet_params();
    let bounds = ActionBounds::goal();
    let env = TargetEnv { road: &road, params: &params, bounds: &bounds };
    let mut world = world_from(&road, av_at(&road, 30.0, 0.0, 9.0), vec![], 11);
    let mut tr = record_transition(&mut world, &[0.2, -0.1, 0.3, 0.4], &params, &bounds);
    tr.done = true;

    let nets = Nets::random(tr.obs.len(), 4, 3);
    for strategy in [Strategy::Td1, Strategy::Rp, Strategy::Irp, Strategy::IrpUp] {
        let spec = TargetSpec::new(strategy, params.delta, params.horizon, 0.99);
        let y = critic_target(&tr, nets.view(), &spec, &env).unwrap();
        assert_eq!(y, tr.reward);
    }
}

#[test]
fn horizon_must_be_a_whole_number_of_steps() {
    let spec = TargetSpec::new(Strategy::Rp, 0.1, 0.25, 0.99);
    assert!(matches!(spec.steps(), Err(TargetError::BadHorizon { .. })));
    let spec = TargetSpec::new(Strategy::Rp, 0.1, 0.0, 0.99);
    assert!(matches!(spec.steps(), Err(TargetError::BadHorizon { .. })));
    let spec = TargetSpec::new(Strategy::Rp, 0.1, 3.0, 0.99);
    assert_eq!(spec.steps().unwrap(), 30);
}

#[test]
fn missing_context_is_an_error() {
    let road = straight_road(2);
    let params = quiet_params();
    let bounds = ActionBounds::goal();
    let env = TargetEnv { road: &road, params: &params, bounds: &bounds };
    let mut world = world_from(&road, av_at(&road, 30.0, 0.0, 9.0), vec![], 12);
    let mut tr = record_transition(&mut world, &[0.0, 0.0, 0.0, 0.0], &params, &bounds);
    tr.ctx = None;

    let nets = Nets::random(tr.obs.len(), 4, 3);
    for strategy in [Strategy::Rp, Strategy::Irp, Strategy::IrpUp] {
        let spec = TargetSpec::new(strategy, params.delta, params.horizon, 0.99);
        let err = critic_target(&tr, nets.view(), &spec, &env).unwrap_err();
        assert!(matches!(err, TargetError::MissingContext));
    }
}

#[test]
fn one_step_horizons_reduce_to_the_bootstrapped_target() {
    let road = straight_road(2);
    let mut params = quiet_params();
    params.horizon = 0.1;
    let bounds = ActionBounds::goal();
    let env = TargetEnv { road: &road, params: &params, bounds: &bounds };
    let mut world =
        world_from(&road, av_at(&road, 30.0, 0.2, 9.0), vec![car(&road, 1, 55.0, 0.0, 8.0, 10.0)], 13);
    let tr = record_transition(&mut world, &[0.3, 0.1, -0.2, 0.5], &params, &bounds);

    let nets = Nets::random(tr.obs.len(), 4, 4);
    for strategy in [Strategy::Rp, Strategy::Irp, Strategy::IrpUp] {
        let spec = TargetSpec::new(strategy, params.delta, params.horizon, 0.99);
        let want = td1_target(&tr, nets.view(), &spec);
        let got = critic_target(&tr, nets.view(), &spec, &env).unwrap();
        assert_eq!(got, want);
    }
}

#[test]
fn predicted_rewards_form_a_discounted_geometric_sum() {
    let road = straight_road(2);
    let mut params = quiet_params();
    params.reward = RewardWeights {
        lat_acc: 0.0,
        long_acc: 0.0,
        lat_jerk: 0.0,
        long_jerk: 0.0,
        lateral_dev: 0.0,
        speed_dev: 0.0,
        collision_hit: -10.0,
        collision_free: 1.0,
    };
    let bounds = ActionBounds::goal();
    let env = TargetEnv { road: &road, params: &params, bounds: &bounds };
    let mut world = world_from(&road, av_at(&road, 30.0, 0.0, 9.0), vec![], 14);
    let tr = record_transition(&mut world, &[0.1, 0.0, 0.2, 0.1], &params, &bounds);
    assert_eq!(tr.reward, 1.0);

    let mut nets = Nets::random(tr.obs.len(), 4, 5);
    nets.critic = zeroed(nets.critic);
    let gamma = 0.99;
    let n = (params.horizon / params.delta).round() as usize;
    let mut expect = 1.0;
    let mut discount = 1.0;
    for _ in 1..n {
        discount *= gamma;
        expect += discount * 1.0;
    }
    for strategy in [Strategy::Rp, Strategy::Irp, Strategy::IrpUp] {
        let spec = TargetSpec::new(strategy, params.delta, params.horizon, gamma);
        let y = critic_target(&tr, nets.view(), &spec, &env).unwrap();
        assert_eq!(y, expect, "{strategy:?}");
    }
}

#[test]
fn two_step_target_matches_a_manual_expansion() {
    let road = straight_road(2);
    let mut params = quiet_params();
    params.horizon = 0.2;
    let bounds = ActionBounds::goal();
    let env = TargetEnv { road: &road, params: &params, bounds: &bounds };
    let mut world = world_from(
        &road,
        av_at(&road, 30.0, -0.4, 9.0),
        vec![car(&road, 1, 50.0, 0.0, 7.0, 9.0), car(&road, 2, 70.0, 3.5, 11.0, 12.0)],
        15,
    );
    let mut rng = stream_rng(21, Stream::Exploration);
    let u = random_u(&mut rng);
    let tr = record_transition(&mut world, &u, &params, &bounds);
    let nets = Nets::random(tr.obs.len(), 4, 6);
    let gamma = 0.97;
    let spec = TargetSpec::new(Strategy::Rp, params.delta, params.horizon, gamma);
    let y = rp_target(&tr, nets.view(), &spec, &env).unwrap();

    let ctx = tr.ctx.as_ref().unwrap();
    let plan =
        plan_trajectory(&ctx.av.frenet, &bounds.goal_action(&tr.action), params.delta, params.horizon)
            .unwrap();
    let tracks = predict_tracks(&road, &ctx.participants, 2, &params);
    let frame = |k: usize| -> Frame {
        let mut av = VehicleState { frenet: plan.states[k], ..ctx.av };
        refresh_heading_dev(&road.line, &mut av).unwrap();
        Frame {
            time: ctx.time + (k + 1) as f64 * params.delta,
            av,
            participants: tracks.iter().map(|t| t.states[k]).collect(),
        }
    };
    let (f0, f1) = (frame(0), frame(1));
    let av_poly = vehicle_rect(&road.line, &f1.av).unwrap().corners();
    let hit = f1.participants.iter().any(|p| {
        polygons_collide(&av_poly, &vehicle_rect(&road.line, p).unwrap().corners())
    });
    let r1 = compute_reward_frames(&f0, &f1, &road, &params, Some(hit)).unwrap().total;
    let obs1 = observe_frame(&f1, &road, &params, None);
    let u1 = nets.actor.forward(&obs1.features);
    let mut x = obs1.features.clone();
    x.extend_from_slice(&u1);
    let q = nets.critic.forward(&x)[0];
    let manual = tr.reward + gamma * r1 + gamma * gamma * q;
    assert_eq!(y, manual);
}

#[test]
fn stored_plan_and_replanning_diverge_only_for_the_iterative_target() {
    let road = straight_road(2);
    let params = quiet_params();
    let bounds = ActionBounds::goal();
    let env = TargetEnv { road: &road, params: &params, bounds: &bounds };
    let mut world =
        world_from(&road, av_at(&road, 30.0, 0.5, 9.0), vec![car(&road, 1, 60.0, 0.0, 8.0, 10.0)], 16);
    let tr = record_transition(&mut world, &[0.4, -0.3, 0.1, 0.2], &params, &bounds);

    let a = Nets::random(tr.obs.len(), 4, 30);
    let b = Nets { actor: Nets::random(tr.obs.len(), 4, 31).actor, critic: a.critic.clone() };

    let rp_spec = TargetSpec::new(Strategy::Rp, params.delta, params.horizon, 0.99);
    let ra = predict_rollout(&tr, a.view(), &rp_spec, &env).unwrap();
    let rb = predict_rollout(&tr, b.view(), &rp_spec, &env).unwrap();
    for (sa, sb) in ra.steps.iter().zip(&rb.steps) {
        assert_eq!(sa.av.frenet, sb.av.frenet);
        assert_eq!(sa.reward, sb.reward);
    }

    let irp_spec = TargetSpec::new(Strategy::Irp, params.delta, params.horizon, 0.99);
    let ia = predict_rollout(&tr, a.view(), &irp_spec, &env).unwrap();
    let ib = predict_rollout(&tr, b.view(), &irp_spec, &env).unwrap();
    assert!(
        ia.steps.iter().zip(&ib.steps).any(|(sa, sb)| sa.av.frenet != sb.av.frenet),
        "different actors should steer the replayed rollout differently"
    );
}

/// Drive the simulator with the target policy from the recorded context and
/// accumulate the same discounted rewards the prediction claims. Returns the
/// closed-loop value and whether a collision cut the horizon short.
fn closed_loop_value(
    world0: &WorldState,
    tr: &ReplayTransition,
    nets: &Nets,
    gamma: f64,
    params: &SimParams,
    bounds: &ActionBounds,
) -> (f64, bool) {
    let mut sim = world0.clone();
    let road = sim.road.clone();
    let n = (params.horizon / params.delta).round() as usize;
    let plan0 =
        plan_trajectory(&sim.av.frenet, &bounds.goal_action(&tr.action), params.delta, params.horizon)
            .unwrap();
    step_participants(&mut sim, params);
    step_av(&mut sim, &plan0, params).unwrap();

    let mut value = tr.reward;
    let mut discount = 1.0;
    for _ in 1..n {
        let prev = sim.frame();
        let u = nets.actor.forward(&observe(&sim, params).features);
        let plan =
            plan_trajectory(&sim.av.frenet, &bounds.goal_action(&u), params.delta, params.horizon)
                .unwrap();
        step_participants(&mut sim, params);
        step_av(&mut sim, &plan, params).unwrap();
        let next = sim.frame();
        let hit = check_collision_frame(&road.line, &next).unwrap();
        let r = compute_reward_frames(&prev, &next, &road, params, Some(hit)).unwrap().total;
        discount *= gamma;
        value += discount * r;
        if hit {
            return (value, true);
        }
    }
    let obs = observe(&sim, params).features;
    let u = nets.actor.forward(&obs);
    let mut x = obs.clone();
    x.extend_from_slice(&u);
    value += discount * gamma * nets.critic.forward(&x)[0];
    (value, false)
}

#[test]
fn iterative_target_matches_closed_loop_execution() {
    let road = straight_road(2);
    let params = quiet_params();
    let bounds = ActionBounds::goal();
    let env = TargetEnv { road: &road, params: &params, bounds: &bounds };
    let gamma = 0.99;
    let spec = TargetSpec::new(Strategy::Irp, params.delta, params.horizon, gamma);

    // Open road: the full horizon plays out and the bootstrap is used.
    let mut world = world_from(
        &road,
        av_at(&road, 30.0, 0.3, 9.0),
        vec![car(&road, 1, 95.0, -1.75, 10.0, 12.0)],
        17,
    );
    let world0 = world.clone();
    let tr = record_transition(&mut world, &[0.2, 0.15, 0.0, 0.3], &params, &bounds);
    let nets = Nets::random(tr.obs.len(), 4, 8);
    let y = irp_target(&tr, nets.view(), &spec, &env).unwrap();
    let (oracle, truncated) = closed_loop_value(&world0, &tr, &nets, gamma, &params, &bounds);
    assert!(!truncated, "open road should stay collision free");
    assert!((y - oracle).abs() < 1e-9, "prediction {y} vs closed-loop execution {oracle}");

    // Slow traffic straight ahead: this policy crashes into it, and the
    // prediction must price in exactly the rewards up to the impact.
    let mut world = world_from(
        &road,
        av_at(&road, 30.0, 0.3, 9.0),
        vec![car(&road, 1, 52.0, 0.0, 7.0, 8.0), car(&road, 2, 66.0, 0.0, 9.0, 9.5)],
        17,
    );
    let world0 = world.clone();
    let tr = record_transition(&mut world, &[0.2, 0.15, 0.0, 0.3], &params, &bounds);
    let y = irp_target(&tr, nets.view(), &spec, &env).unwrap();
    let trace = predict_rollout(&tr, nets.view(), &spec, &env).unwrap();
    let (oracle, truncated) = closed_loop_value(&world0, &tr, &nets, gamma, &params, &bounds);
    assert!(truncated, "tailgating traffic should produce a predicted collision");
    assert!(trace.steps.last().unwrap().collision);
    assert!((y - oracle).abs() < 1e-9, "prediction {y} vs closed-loop execution {oracle}");
}

#[test]
fn replanning_a_settled_plan_is_a_fixed_point() {
    let road = straight_road(2);
    let params = quiet_params();
    let bounds = ActionBounds::goal();
    let env = TargetEnv { road: &road, params: &params, bounds: &bounds };

    // An action whose plan is constant speed straight ahead, started from a
    // state already settled on it: re-planning reproduces the same motion,
    // so the stored-plan and iterative targets coincide.
    let t_target = 2.0;
    let v = 10.0;
    let u_star = bounds.normalize(&[t_target, 0.0, t_target * v, v]);

    let av = av_at(&road, 30.0, 0.0, v);
    let mut world = world_from(&road, av, vec![], 18);
    let obs_len = observation_len(&params);
    let actor = const_actor(obs_len, &u_star);
    let u0 = actor.forward(&vec![0.0; obs_len]);
    let tr = record_transition(&mut world, &u0, &params, &bounds);

    let critic = Nets::random(obs_len, 4, 9).critic;
    let nets = TargetNets { actor: &actor, critic: &critic };
    let rp_spec = TargetSpec::new(Strategy::Rp, params.delta, params.horizon, 0.99);
    let irp_spec = TargetSpec::new(Strategy::Irp, params.delta, params.horizon, 0.99);
    let y_rp = rp_target(&tr, nets, &rp_spec, &env).unwrap();
    let y_irp = irp_target(&tr, nets, &irp_spec, &env).unwrap();
    assert!((y_rp - y_irp).abs() < 1e-9, "rp {y_rp} vs irp {y_irp}");
}

#[test]
fn zero_uncertainty_reduces_to_plain_replanning() {
    let road = straight_road(2);
    let params = quiet_params();
    let bounds = ActionBounds::goal();
    let env = TargetEnv { road: &road, params: &params, bounds: &bounds };
    let mut rng = stream_rng(40, Stream::Exploration);
    let nets_holder = Nets::random(observation_len(&params), 4, 10);
    let nets = nets_holder.view();

    for seed in 0..20u64 {
        let mut world = world_from(
            &road,
            av_at(&road, 30.0, 0.1, 9.0),
            vec![
                car(&road, 1, 42.0 + seed as f64, 0.0, 6.5, 7.0),
                car(&road, 2, 62.0, 3.5, 10.0, 11.0),
            ],
            100 + seed,
        );
        let u = random_u(&mut rng);
        let tr = record_transition(&mut world, &u, &params, &bounds);

        let irp_spec = TargetSpec::new(Strategy::Irp, params.delta, params.horizon, 0.99);
        let mut up_spec = TargetSpec::new(Strategy::IrpUp, params.delta, params.horizon, 0.99);
        up_spec.noise = NoiseModel::new(params.delta, [0.0; 4], [0.0; 4]);

        let y_irp = irp_target(&tr, nets, &irp_spec, &env).unwrap();
        let y_up = irp_up_target(&tr, nets, &up_spec, &env).unwrap();
        assert_eq!(y_up, y_irp, "seed {seed}");
    }
}

#[test]
fn rollout_trace_reproduces_the_target_value() {
    let road = straight_road(2);
    let params = quiet_params();
    let bounds = ActionBounds::goal();
    let env = TargetEnv { road: &road, params: &params, bounds: &bounds };
    let mut world = world_from(
        &road,
        av_at(&road, 30.0, -0.2, 9.0),
        vec![car(&road, 1, 48.0, 0.2, 6.0, 7.0)],
        19,
    );
    let tr = record_transition(&mut world, &[0.1, 0.2, 0.3, -0.1], &params, &bounds);
    let nets = Nets::random(tr.obs.len(), 4, 11);

    for strategy in [Strategy::Rp, Strategy::Irp, Strategy::IrpUp] {
        let spec = TargetSpec::new(strategy, params.delta, params.horizon, 0.99);
        let y = critic_target(&tr, nets.view(), &spec, &env).unwrap();
        let trace = predict_rollout(&tr, nets.view(), &spec, &env).unwrap();
        assert_eq!(trace.y, y, "{strategy:?}");
        let n = spec.steps().unwrap();
        if !trace.steps.iter().any(|s| s.collision) {
            assert_eq!(trace.steps.len(), n - 1);
            assert!(trace.bootstrap_obs.is_some());
        }
    }
}

#[test]
fn inflated_footprints_contain_the_raw_rectangles() {
    let road = straight_road(2);
    let params = quiet_params();
    let bounds = ActionBounds::goal();
    let env = TargetEnv { road: &road, params: &params, bounds: &bounds };
    let mut world = world_from(
        &road,
        av_at(&road, 30.0, 0.0, 9.0),
        vec![car(&road, 1, 55.0, 0.0, 8.0, 9.0), car(&road, 2, 70.0, 3.5, 10.0, 11.0)],
        20,
    );
    let tr = record_transition(&mut world, &[0.2, 0.0, 0.1, 0.2], &params, &bounds);
    let nets = Nets::random(tr.obs.len(), 4, 12);
    let mut spec = TargetSpec::new(Strategy::IrpUp, params.delta, params.horizon, 0.99);
    spec.noise = NoiseModel::new(params.delta, [4e-4, 4e-4, 1e-3, 1e-3], [2.5e-3, 2.5e-3, 4e-3, 4e-3]);

    let trace = predict_rollout(&tr, nets.view(), &spec, &env).unwrap();
    assert!(!trace.steps.is_empty());
    for step in &trace.steps {
        assert!(step.av_footprint.len() > 4, "inflation should add arc vertices");
        for corner in vehicle_rect(&road.line, &step.av).unwrap().corners() {
            assert!(point_in_convex(&step.av_footprint, corner, 1e-9));
        }
        for (p, poly) in step.participants.iter().zip(&step.participant_footprints) {
            for corner in vehicle_rect(&road.line, p).unwrap().corners() {
                assert!(point_in_convex(poly, corner, 1e-9));
            }
        }
        let sa = step.sigma_av.unwrap();
        sa.validate().unwrap();
    }
}

#[test]
fn wider_uncertainty_never_unflags_a_collision() {
    let road = straight_road(2);
    let params = quiet_params();
    let bounds = ActionBounds::goal();
    let env = TargetEnv { road: &road, params: &params, bounds: &bounds };
    let obs_len = observation_len(&params);

    // A constant actor keeps the predicted motion identical across noise
    // scales, isolating the effect of footprint growth.
    let v = 9.0;
    let t_target = 2.0;
    let u_star = bounds.normalize(&[t_target, 0.0, t_target * v, v]);
    let actor = const_actor(obs_len, &u_star);
    let critic = Nets::random(obs_len, 4, 13).critic;
    let nets = TargetNets { actor: &actor, critic: &critic };

    let q = [1e-3, 1e-3, 0.0, 0.0];
    let q4 = [4e-3, 4e-3, 0.0, 0.0];
    let mut flagged = 0;
    for i in 0..12 {
        // Lateral gaps from brushing distance to comfortably clear.
        let gap = 0.05 + 0.1 * i as f64;
        let mut world = world_from(
            &road,
            av_at(&road, 30.0, 0.0, v),
            vec![car(&road, 1, 45.0, 1.8 + gap, 0.0, 0.0)],
            200 + i,
        );
        let u0 = actor.forward(&vec![0.0; obs_len]);
        let tr = record_transition(&mut world, &u0, &params, &bounds);

        let mut narrow = TargetSpec::new(Strategy::IrpUp, params.delta, params.horizon, 0.99);
        narrow.noise = NoiseModel::new(params.delta, q, q);
        let mut wide = narrow.clone();
        wide.noise = NoiseModel::new(params.delta, q4, q4);

        let tn = predict_rollout(&tr, nets, &narrow, &env).unwrap();
        let tw = predict_rollout(&tr, nets, &wide, &env).unwrap();
        let first_hit = |t: &PredictedRollout| t.steps.iter().position(|s| s.collision);
        if let Some(k_narrow) = first_hit(&tn) {
            flagged += 1;
            let k_wide = first_hit(&tw).expect("wider noise must also flag the collision");
            assert!(k_wide <= k_narrow, "wide {k_wide} vs narrow {k_narrow}");
        }
    }
    assert!(flagged >= 2, "expected several near misses to be flagged, got {flagged}");
}

#[test]
fn growing_uncertainty_flags_a_near_miss_the_raw_footprints_pass() {
    let road = straight_road(2);
    let params = quiet_params();
    let bounds = ActionBounds::goal();
    let env = TargetEnv { road: &road, params: &params, bounds: &bounds };
    let obs_len = observation_len(&params);

    let v = 9.0;
    let t_target = 2.0;
    let u_star = bounds.normalize(&[t_target, 0.0, t_target * v, v]);
    let actor = const_actor(obs_len, &u_star);
    let critic = Nets::random(obs_len, 4, 14).critic;
    let nets = TargetNets { actor: &actor, critic: &critic };

    // A parked car the plan passes with 0.3 m of lateral clearance.
    let mut world = world_from(
        &road,
        av_at(&road, 30.0, 0.0, v),
        vec![car(&road, 1, 45.0, 2.1, 0.0, 0.0)],
        21,
    );
    let u0 = actor.forward(&vec![0.0; obs_len]);
    let tr = record_transition(&mut world, &u0, &params, &bounds);

    let irp_spec = TargetSpec::new(Strategy::Irp, params.delta, params.horizon, 0.99);
    let mut up_spec = TargetSpec::new(Strategy::IrpUp, params.delta, params.horizon, 0.99);
    up_spec.noise = NoiseModel::new(params.delta, [1e-3, 1e-3, 0.0, 0.0], [1e-3, 1e-3, 0.0, 0.0]);

    let raw = predict_rollout(&tr, nets, &irp_spec, &env).unwrap();
    assert!(raw.steps.iter().all(|s| !s.collision), "raw footprints should clear the gap");

    let up = predict_rollout(&tr, nets, &up_spec, &env).unwrap();
    assert!(up.steps.iter().any(|s| s.collision), "inflated footprints should close the gap");
    assert!(up.steps.len() < raw.steps.len(), "predicted collision should truncate the rollout");
    assert!(up.bootstrap_obs.is_none());
    assert!(up.y < raw.y, "collision penalty should lower the target");
}

#[test]
fn targets_are_deterministic() {
    let road = straight_road(2);
    let params = quiet_params();
    let bounds = ActionBounds::goal();
    let env = TargetEnv { road: &road, params: &params, bounds: &bounds };
    let mut world = world_from(
        &road,
        av_at(&road, 30.0, 0.4, 9.0),
        vec![car(&road, 1, 50.0, 0.0, 7.0, 8.0)],
        22,
    );
    let tr = record_transition(&mut world, &[0.3, -0.2, 0.2, 0.1], &params, &bounds);
    let nets = Nets::random(tr.obs.len(), 4, 15);
    for strategy in [Strategy::Td1, Strategy::Rp, Strategy::Irp, Strategy::IrpUp] {
        let spec = TargetSpec::new(strategy, params.delta, params.horizon, 0.99);
        let a = critic_target(&tr, nets.view(), &spec, &env).unwrap();
        let b = critic_target(&tr, nets.view(), &spec, &env).unwrap();
        assert_eq!(a, b, "{strategy:?}");
    }
}
