//! Seeded training and evaluation loops.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::sync::Arc;

use rand::Rng;

use crate::agent::{ActionBounds, DdpgAgent, PredictionContext, ReplayTransition};
use crate::frenet::{plan_trajectory, wrap_angle, ReferenceLine};
use crate::neural::{load_checkpoint, save_checkpoint, Mlp};
use crate::rngs::{stream_rng, Stream};
use crate::targets::{critic_target, TargetEnv, TargetNets};
use crate::world::{
    compute_reward_frames, episode_status, observation_len, observe, spawn_scenario_on,
    step_av, step_av_control, step_participants, EpisodeStatus, Frame, RewardBreakdown,
    ScenarioSpec, SimParams, WorldError, WorldState,
};

use super::config::{RunConfig, Settings};
use super::metrics::{MetricsRow, RollingWindow, METRICS_HEADER, ROLLING_EPISODES};
use super::HarnessError;

pub const EVAL_HEADER: &str = "env_step,avg_reward_per_step,collision_rate,success_rate";

/// Episodes that must complete before a best checkpoint can be declared,
/// so one lucky spawn cannot pin the slot.
const MIN_EPISODES_FOR_BEST: u64 = 10;

#[derive(Clone, Debug)]
pub struct TrainingSummary {
    pub episodes: u64,
    pub env_steps: u64,
    pub final_roll_success: f64,
    pub final_roll_collision: f64,
    pub best_roll_success: Option<f64>,
    pub metrics_path: PathBuf,
    pub eval_log_path: PathBuf,
    pub best_actor_path: Option<PathBuf>,
    pub final_actor_path: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvalAggregate {
    pub episodes: usize,
    pub avg_reward_per_step: f64,
    pub collision_rate: f64,
    pub success_rate: f64,
}

/// Outcome of stepping the controlled vehicle once.
enum StepOutcome {
    Stepped,
    /// The vehicle left the projectable corridor; the world was not
    /// advanced and the episode is over. Unreachable with sane lateral
    /// termination thresholds, kept as a defensive path.
    Aborted,
}

fn act(
    world: &mut WorldState,
    method_plans: bool,
    bounds: &ActionBounds,
    u: &[f64],
    params: &SimParams,
) -> Result<StepOutcome, HarnessError> {
    step_participants(world, params);
    if method_plans {
        let datum = world.road.route_center(world.av.frenet.s);
        let traj = plan_trajectory(
            &world.av.frenet,
            &bounds.goal_action_on(u, datum),
            params.delta,
            params.horizon,
        )
        .expect("goal bounds keep planned durations feasible");
        step_av(world, &traj, params)?;
        return Ok(StepOutcome::Stepped);
    }
    match step_av_control(world, &bounds.control_action(u), params) {
        Ok(()) => Ok(StepOutcome::Stepped),
        Err(WorldError::LeftCorridor) => Ok(StepOutcome::Aborted),
        Err(e) => Err(e.into()),
    }
}

pub fn run_training(cfg: &RunConfig) -> Result<TrainingSummary, HarnessError> {
    cfg.validate()?;
    let s = &cfg.settings;
    let params = s.sim_params();
    let spec = cfg.scenario_spec()?;
    let line = spec.straight_line();
    let bounds = cfg.method.bounds();
    let tspec = s.target_spec(cfg.method.strategy());
    let obs_len = observation_len(&params);

    std::fs::create_dir_all(&cfg.out_dir)?;
    let metrics_path = cfg.out_dir.join("metrics.csv");
    let eval_log_path = cfg.out_dir.join("eval_log.csv");
    let best_actor_path = cfg.out_dir.join("best_actor.ckpt");
    let final_actor_path = cfg.out_dir.join("final_actor.ckpt");
    let final_critic_path = cfg.out_dir.join("final_critic.ckpt");
    let mut metrics_file = BufWriter::new(File::create(&metrics_path)?);
    writeln!(metrics_file, "{METRICS_HEADER}")?;
    let mut eval_file = BufWriter::new(File::create(&eval_log_path)?);
    writeln!(eval_file, "{EVAL_HEADER}")?;

    let mut init_rng = stream_rng(cfg.seed, Stream::Init);
    let mut agent = DdpgAgent::new(s.agent.ddpg_config(obs_len, bounds.dim()), &mut init_rng)?;
    let mut spawn_rng = stream_rng(cfg.seed, Stream::Spawn);
    let mut explore_rng = stream_rng(cfg.seed, Stream::Exploration);
    let mut replay_rng = stream_rng(cfg.seed, Stream::Replay);

    let total = s.run.total_env_steps;
    let mut env_step: u64 = 0;
    let mut episode: u64 = 0;
    let mut roll = RollingWindow::new(ROLLING_EPISODES);
    let mut best: Option<f64> = None;
    let mut next_eval = s.run.eval_every;
    let mut last_rates = (0.0, 0.0);

    while env_step < total {
        let ep_seed = spawn_rng.random::<u64>();
        let mut world = spawn_scenario_on(Arc::clone(&line), &spec, ep_seed)?;
        let mut ep_reward = 0.0;
        let mut ep_steps: u64 = 0;
        let mut status = EpisodeStatus::Running;

        while status == EpisodeStatus::Running && env_step < total {
            let obs = observe(&world, &params);
            let sigma = agent.noise_sigma(env_step);
            let u = agent.select_u(&obs.features, sigma, &mut explore_rng);
            let ctx = cfg.method.needs_context().then(|| PredictionContext {
                time: world.time,
                av: world.av,
                participants: world.participants.clone(),
            });
            let prev = world.frame();
            env_step += 1;
            ep_steps += 1;
            match act(&mut world, cfg.method.plans(), &bounds, &u, &params)? {
                StepOutcome::Aborted => {
                    status = EpisodeStatus::OffCourse;
                    break;
                }
                StepOutcome::Stepped => {}
            }
            let next = world.frame();
            let reward = compute_reward_frames(&prev, &next, &world.road, &params, Some(world.collided))?
                .total;
            ep_reward += reward;
            status = episode_status(&world, spec.time_limit, spec.max_lateral_dev);
            let done = status != EpisodeStatus::Running;
            let next_obs = observe(&world, &params);
            agent.replay.push(ReplayTransition {
                obs: obs.features,
                action: u,
                reward,
                next_obs: next_obs.features,
                done,
                ctx,
            });

            if env_step >= s.agent.warmup
                && env_step % s.agent.update_every == 0
                && agent.replay.len() >= s.agent.batch
            {
                let idx = agent.replay.sample_indices(&mut replay_rng, s.agent.batch)?;
                let mut ys = Vec::with_capacity(idx.len());
                {
                    let nets = TargetNets { actor: &agent.actor_tgt, critic: &agent.critic_tgt };
                    let env = TargetEnv { road: &world.road, params: &params, bounds: &bounds };
                    for &i in &idx {
                        ys.push(critic_target(agent.replay.get(i), nets, &tspec, &env)?);
                    }
                }
                agent.critic_update(&idx, &ys);
                agent.actor_update(&idx);
                agent.soft_update();
            }
        }

        if status != EpisodeStatus::Running {
            episode += 1;
            let collision = status == EpisodeStatus::Collision;
            let success = status == EpisodeStatus::Success;
            last_rates = roll.push(collision, success);
            let row = MetricsRow {
                episode,
                env_step,
                avg_reward_per_step: ep_reward / ep_steps as f64,
                collision,
                success,
                ep_len: ep_steps,
                roll_collision_rate: last_rates.0,
                roll_success_rate: last_rates.1,
            };
            writeln!(metrics_file, "{}", row.to_csv())?;

            if episode >= MIN_EPISODES_FOR_BEST && best.is_none_or(|b| last_rates.1 >= b) {
                best = Some(last_rates.1);
                save_checkpoint(&best_actor_path, &agent.actor)?;
            }
        }

        if env_step >= next_eval {
            let agg = eval_policy(
                &agent.actor,
                &bounds,
                cfg.method.plans(),
                &line,
                &spec,
                &params,
                cfg.seed,
                s.run.eval_episodes,
                None,
            )?;
            writeln!(
                eval_file,
                "{},{},{},{}",
                env_step, agg.avg_reward_per_step, agg.collision_rate, agg.success_rate
            )?;
            next_eval = (env_step / s.run.eval_every + 1) * s.run.eval_every;
        }
    }

    save_checkpoint(&final_actor_path, &agent.actor)?;
    save_checkpoint(&final_critic_path, &agent.critic)?;
    metrics_file.flush()?;
    eval_file.flush()?;

    Ok(TrainingSummary {
        episodes: episode,
        env_steps: env_step,
        final_roll_success: last_rates.1,
        final_roll_collision: last_rates.0,
        best_roll_success: best,
        metrics_path,
        eval_log_path,
        best_actor_path: best.map(|_| best_actor_path),
        final_actor_path,
    })
}

/// Cartesian pose columns for one vehicle: x, y, heading, speed.
fn pose_columns(line: &ReferenceLine, v: &crate::world::VehicleState) -> Result<[f64; 4], HarnessError> {
    let (x, y, road_heading) = line.point_at(v.frenet.s, v.frenet.d)?;
    let kappa = line.curvature_at(v.frenet.s)?;
    let vt = v.frenet.s_dot * (1.0 - v.frenet.d * kappa);
    let speed = (vt * vt + v.frenet.d_dot * v.frenet.d_dot).sqrt();
    Ok([x, y, wrap_angle(road_heading + v.heading_dev), speed])
}

/// CSV trace of one episode: time, poses, and the reward breakdown of the
/// step that produced each row.
struct TraceLog {
    lines: Vec<String>,
}

impl TraceLog {
    fn header(participants: usize) -> String {
        let mut h = String::from("t,av_x,av_y,av_heading,av_speed");
        for i in 1..=participants {
            write!(h, ",p{i}_x,p{i}_y,p{i}_heading,p{i}_speed").unwrap();
        }
        h.push_str(
            ",r_lat_acc,r_long_acc,r_lat_jerk,r_long_jerk,r_lateral_dev,r_speed_dev,r_collision,r_total",
        );
        h
    }

    fn push_row(
        &mut self,
        line: &ReferenceLine,
        frame: &Frame,
        reward: Option<&RewardBreakdown>,
    ) -> Result<(), HarnessError> {
        let mut row = format!("{}", frame.time);
        for cols in std::iter::once(pose_columns(line, &frame.av))
            .chain(frame.participants.iter().map(|p| pose_columns(line, p)))
        {
            let [x, y, heading, speed] = cols?;
            write!(row, ",{x},{y},{heading},{speed}").unwrap();
        }
        match reward {
            Some(r) => write!(
                row,
                ",{},{},{},{},{},{},{},{}",
                r.lat_acc, r.long_acc, r.lat_jerk, r.long_jerk, r.lateral_dev, r.speed_dev,
                r.collision, r.total
            )
            .unwrap(),
            None => row.push_str(",0,0,0,0,0,0,0,0"),
        }
        self.lines.push(row);
        Ok(())
    }
}

/// Run the policy without exploration noise over freshly seeded episodes.
/// The seed substream is re-derived per call, so repeated evaluations see
/// the same episode set.
#[allow(clippy::too_many_arguments)]
fn eval_policy(
    actor: &Mlp,
    bounds: &ActionBounds,
    plans: bool,
    line: &Arc<ReferenceLine>,
    spec: &ScenarioSpec,
    params: &SimParams,
    seed: u64,
    episodes: usize,
    mut trace: Option<&mut TraceLog>,
) -> Result<EvalAggregate, HarnessError> {
    let mut eval_rng = stream_rng(seed, Stream::Eval);
    let mut reward_sum = 0.0;
    let mut collisions = 0usize;
    let mut successes = 0usize;

    for ep in 0..episodes {
        let ep_seed = eval_rng.random::<u64>();
        let mut world = spawn_scenario_on(Arc::clone(&line), spec, ep_seed)?;
        let mut ep_reward = 0.0;
        let mut ep_steps: u64 = 0;
        let mut status = EpisodeStatus::Running;
        let mut log = trace.as_deref_mut().filter(|_| ep == 0);
        if let Some(log) = log.as_deref_mut() {
            log.lines.push(TraceLog::header(world.participants.len()));
            log.push_row(&world.road.line, &world.frame(), None)?;
        }

        while status == EpisodeStatus::Running {
            let u = actor.forward(&observe(&world, params).features);
            let prev = world.frame();
            ep_steps += 1;
            match act(&mut world, plans, bounds, &u, params)? {
                StepOutcome::Aborted => {
                    status = EpisodeStatus::OffCourse;
                    break;
                }
                StepOutcome::Stepped => {}
            }
            let next = world.frame();
            let breakdown =
                compute_reward_frames(&prev, &next, &world.road, params, Some(world.collided))?;
            ep_reward += breakdown.total;
            status = episode_status(&world, spec.time_limit, spec.max_lateral_dev);
            if let Some(log) = log.as_deref_mut() {
                log.push_row(&world.road.line, &next, Some(&breakdown))?;
            }
        }

        reward_sum += ep_reward / ep_steps as f64;
        collisions += (status == EpisodeStatus::Collision) as usize;
        successes += (status == EpisodeStatus::Success) as usize;
    }

    Ok(EvalAggregate {
        episodes,
        avg_reward_per_step: reward_sum / episodes as f64,
        collision_rate: collisions as f64 / episodes as f64,
        success_rate: successes as f64 / episodes as f64,
    })
}

#[derive(Clone, Debug)]
pub struct EvalOptions {
    pub checkpoint: PathBuf,
    pub scenario_id: u8,
    pub seed: u64,
    pub episodes: usize,
    pub settings: Settings,
    /// Dump the first episode as a CSV trace here.
    pub trace_path: Option<PathBuf>,
}

pub fn run_eval(opts: &EvalOptions) -> Result<EvalAggregate, HarnessError> {
    if opts.episodes == 0 {
        return Err(HarnessError::BadRun("eval episodes must be positive".into()));
    }
    let s = &opts.settings;
    let params = s.sim_params();
    let preset = ScenarioSpec::preset(opts.scenario_id)?;
    let spec = s.scenario.apply(preset);
    let line = spec.straight_line();

    let actor = load_checkpoint(&opts.checkpoint)?;
    if actor.input_len() != observation_len(&params) {
        return Err(HarnessError::BadRun(format!(
            "checkpoint expects {} observation features, this configuration produces {}",
            actor.input_len(),
            observation_len(&params)
        )));
    }
    // The action width tells the two action spaces apart.
    let (plans, bounds) = match actor.output_len() {
        2 => (false, ActionBounds::control()),
        4 => (true, ActionBounds::goal()),
        n => {
            return Err(HarnessError::BadRun(format!(
                "checkpoint emits {n} action coordinates, expected 2 (control) or 4 (goal)"
            )))
        }
    };

    let mut trace = opts.trace_path.as_ref().map(|_| TraceLog { lines: Vec::new() });
    let agg = eval_policy(
        &actor,
        &bounds,
        plans,
        &line,
        &spec,
        &params,
        opts.seed,
        opts.episodes,
        trace.as_mut(),
    )?;
    if let (Some(path), Some(log)) = (&opts.trace_path, trace) {
        std::fs::write(path, log.lines.join("\n") + "\n")?;
    }
    Ok(agg)
}
