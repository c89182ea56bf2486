//! Run configuration: a dotted-key text format plus the per-run identity
//! (scenario, method, seed, output directory) that comes from the command
//! line.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use crate::agent::{ActionBounds, DdpgConfig};
use crate::targets::{Strategy, TargetSpec};
use crate::uncertainty::{NoiseModel, StateCovariance};
use crate::world::{IdmParams, RewardWeights, ScenarioSpec, SimParams};

use super::HarnessError;

/// The five compared methods. The two baselines use the one-step target;
/// the first also swaps the planner for direct steering/throttle control.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    Baseline1,
    Baseline2,
    Rp,
    Irp,
    IrpUp,
}

impl Method {
    pub const ALL: [Method; 5] =
        [Method::Baseline1, Method::Baseline2, Method::Rp, Method::Irp, Method::IrpUp];

    pub fn strategy(self) -> Strategy {
        match self {
            Method::Baseline1 | Method::Baseline2 => Strategy::Td1,
            Method::Rp => Strategy::Rp,
            Method::Irp => Strategy::Irp,
            Method::IrpUp => Strategy::IrpUp,
        }
    }

    /// Whether actions are trajectory goals (planned) or direct control.
    pub fn plans(self) -> bool {
        !matches!(self, Method::Baseline1)
    }

    /// Whether transitions must carry a prediction context.
    pub fn needs_context(self) -> bool {
        matches!(self, Method::Rp | Method::Irp | Method::IrpUp)
    }

    pub fn bounds(self) -> ActionBounds {
        if self.plans() {
            ActionBounds::goal()
        } else {
            ActionBounds::control()
        }
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "baseline1" => Ok(Method::Baseline1),
            "baseline2" => Ok(Method::Baseline2),
            "rp" => Ok(Method::Rp),
            "irp" => Ok(Method::Irp),
            "irp_up" => Ok(Method::IrpUp),
            other => Err(format!(
                "unknown method {other:?} (expected baseline1, baseline2, rp, irp, or irp_up)"
            )),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Baseline1 => "baseline1",
            Method::Baseline2 => "baseline2",
            Method::Rp => "rp",
            Method::Irp => "irp",
            Method::IrpUp => "irp_up",
        })
    }
}

/// Agent hyperparameters as they appear in the config file; observation
/// and action widths are filled in per run.
#[derive(Clone, Debug, PartialEq)]
pub struct AgentSettings {
    pub hidden: Vec<usize>,
    pub gamma: f64,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub tau: f64,
    pub replay_capacity: usize,
    pub batch: usize,
    pub warmup: u64,
    pub update_every: u64,
    pub noise_start: f64,
    pub noise_end: f64,
    pub noise_decay_steps: u64,
}

impl Default for AgentSettings {
    fn default() -> Self {
        let d = DdpgConfig::defaults(1, 1);
        AgentSettings {
            hidden: d.hidden,
            gamma: d.gamma,
            actor_lr: d.actor_lr,
            critic_lr: d.critic_lr,
            tau: d.tau,
            replay_capacity: d.replay_capacity,
            batch: d.batch,
            warmup: d.warmup,
            update_every: d.update_every,
            noise_start: d.noise_start,
            noise_end: d.noise_end,
            noise_decay_steps: d.noise_decay_steps,
        }
    }
}

impl AgentSettings {
    pub fn ddpg_config(&self, obs_len: usize, action_dim: usize) -> DdpgConfig {
        DdpgConfig {
            obs_len,
            action_dim,
            hidden: self.hidden.clone(),
            gamma: self.gamma,
            actor_lr: self.actor_lr,
            critic_lr: self.critic_lr,
            tau: self.tau,
            replay_capacity: self.replay_capacity,
            batch: self.batch,
            warmup: self.warmup,
            update_every: self.update_every,
            noise_start: self.noise_start,
            noise_end: self.noise_end,
            noise_decay_steps: self.noise_decay_steps,
        }
    }
}

/// Uncertainty propagation knobs: process noise diagonals, the confidence
/// mass for footprint inflation, and the covariances assumed at the moment
/// a transition is recorded.
#[derive(Clone, Debug, PartialEq)]
pub struct UncertaintySettings {
    pub conf: f64,
    pub q_av: [f64; 4],
    pub q_participant: [f64; 4],
    pub sigma0_av: [f64; 4],
    pub sigma0_participant: [f64; 4],
}

impl Default for UncertaintySettings {
    fn default() -> Self {
        let m = NoiseModel::default_for(0.1);
        let diag = |c: &StateCovariance| [c.0[(0, 0)], c.0[(1, 1)], c.0[(2, 2)], c.0[(3, 3)]];
        UncertaintySettings {
            conf: 0.95,
            q_av: diag(&m.q_av),
            q_participant: diag(&m.q_participant),
            sigma0_av: [0.0; 4],
            sigma0_participant: [0.0; 4],
        }
    }
}

/// Loop bookkeeping: run length and evaluation cadence.
#[derive(Clone, Debug, PartialEq)]
pub struct LoopSettings {
    pub total_env_steps: u64,
    pub eval_every: u64,
    pub eval_episodes: usize,
}

impl Default for LoopSettings {
    fn default() -> Self {
        LoopSettings { total_env_steps: 50_000, eval_every: 5_000, eval_episodes: 10 }
    }
}

/// Everything the config file can set. Scenario values are overrides on
/// top of the preset chosen on the command line.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct Settings {
    pub run: LoopSettings,
    pub agent: AgentSettings,
    pub sim: SimSettings,
    pub reward: RewardWeights,
    pub idm: IdmParams,
    pub uncertainty: UncertaintySettings,
    pub scenario: ScenarioOverrides,
}

/// Simulation constants minus the nested structs that have their own
/// config sections.
#[derive(Clone, Debug, PartialEq)]
pub struct SimSettings {
    pub delta: f64,
    pub horizon: f64,
    pub n_max_obs: usize,
    pub obs_range: f64,
    pub corridor: f64,
    pub sigma_pos: f64,
    pub sigma_speed: f64,
    pub lane_change_rate: f64,
    pub lane_change_duration: f64,
    pub wheelbase: f64,
}

impl Default for SimSettings {
    fn default() -> Self {
        let p = SimParams::default();
        SimSettings {
            delta: p.delta,
            horizon: p.horizon,
            n_max_obs: p.n_max_obs,
            obs_range: p.obs_range,
            corridor: p.corridor,
            sigma_pos: p.sigma_pos,
            sigma_speed: p.sigma_speed,
            lane_change_rate: p.lane_change_rate,
            lane_change_duration: p.lane_change_duration,
            wheelbase: p.wheelbase,
        }
    }
}

/// Optional per-field replacements of a scenario preset.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct ScenarioOverrides {
    pub lane_count: Option<usize>,
    pub lane_width: Option<f64>,
    pub speed_limit: Option<f64>,
    pub spawn_lane: Option<usize>,
    pub target_lane: Option<usize>,
    pub window_start: Option<f64>,
    pub window_end: Option<f64>,
    pub max_static: Option<usize>,
    pub max_dynamic: Option<usize>,
    pub goal_offset: Option<f64>,
    pub time_limit: Option<f64>,
    pub max_lateral_dev: Option<f64>,
    pub line_length: Option<f64>,
    pub line_ds: Option<f64>,
    pub spawn_s: Option<f64>,
}

impl ScenarioOverrides {
    pub fn apply(&self, mut spec: ScenarioSpec) -> ScenarioSpec {
        macro_rules! set {
            ($field:ident) => {
                if let Some(v) = self.$field {
                    spec.$field = v;
                }
            };
        }
        set!(lane_count);
        set!(lane_width);
        set!(speed_limit);
        set!(spawn_lane);
        set!(target_lane);
        set!(max_static);
        set!(max_dynamic);
        set!(goal_offset);
        set!(time_limit);
        set!(max_lateral_dev);
        set!(line_length);
        set!(line_ds);
        set!(spawn_s);
        if let Some(v) = self.window_start {
            spec.lane_change_window.0 = v;
        }
        if let Some(v) = self.window_end {
            spec.lane_change_window.1 = v;
        }
        spec
    }
}

impl Settings {
    pub fn sim_params(&self) -> SimParams {
        SimParams {
            delta: self.sim.delta,
            horizon: self.sim.horizon,
            n_max_obs: self.sim.n_max_obs,
            obs_range: self.sim.obs_range,
            corridor: self.sim.corridor,
            reward: self.reward,
            sigma_pos: self.sim.sigma_pos,
            sigma_speed: self.sim.sigma_speed,
            lane_change_rate: self.sim.lane_change_rate,
            lane_change_duration: self.sim.lane_change_duration,
            idm: self.idm,
            wheelbase: self.sim.wheelbase,
        }
    }

    pub fn target_spec(&self, strategy: Strategy) -> TargetSpec {
        let u = &self.uncertainty;
        TargetSpec {
            strategy,
            delta: self.sim.delta,
            horizon: self.sim.horizon,
            gamma: self.agent.gamma,
            conf: u.conf,
            noise: NoiseModel::new(self.sim.delta, u.q_av, u.q_participant),
            sigma0_av: StateCovariance::diagonal(u.sigma0_av),
            sigma0_participant: StateCovariance::diagonal(u.sigma0_participant),
        }
    }

    /// The default configuration as a commented config file. Values are
    /// printed from `Settings::default()`, so this text never drifts from
    /// the code; parsing it back yields the defaults exactly.
    pub fn documented_defaults() -> String {
        use std::fmt::Write;
        let d = Settings::default();
        let mut s = String::new();
        let list = |v: &[f64]| {
            v.iter().map(f64::to_string).collect::<Vec<_>>().join(", ")
        };
        writeln!(s, "# Training run configuration.").unwrap();
        writeln!(s, "#").unwrap();
        writeln!(s, "# One `section.key = value` per line; `#` starts a comment. Keys").unwrap();
        writeln!(s, "# left out keep the defaults shown here. The scenario.* keys are").unwrap();
        writeln!(s, "# overrides applied on top of the preset named on the command line;").unwrap();
        writeln!(s, "# they are commented out so the preset values apply unless set.").unwrap();
        writeln!(s).unwrap();
        writeln!(s, "# Run length and evaluation cadence.").unwrap();
        writeln!(s, "run.total_env_steps = {}   # environment steps per training run", d.run.total_env_steps).unwrap();
        writeln!(s, "run.eval_every = {}         # noise-free evaluation cadence, in env steps", d.run.eval_every).unwrap();
        writeln!(s, "run.eval_episodes = {}        # episodes per evaluation", d.run.eval_episodes).unwrap();
        writeln!(s).unwrap();
        writeln!(s, "# Learner.").unwrap();
        writeln!(s, "agent.hidden = {}      # hidden layer widths", d.agent.hidden.iter().map(usize::to_string).collect::<Vec<_>>().join(", ")).unwrap();
        writeln!(s, "agent.gamma = {}          # discount per simulation step", d.agent.gamma).unwrap();
        writeln!(s, "agent.actor_lr = {}      # actor Adam learning rate", d.agent.actor_lr).unwrap();
        writeln!(s, "agent.critic_lr = {}      # critic Adam learning rate", d.agent.critic_lr).unwrap();
        writeln!(s, "agent.tau = {}           # soft target update factor", d.agent.tau).unwrap();
        writeln!(s, "agent.replay_capacity = {}", d.agent.replay_capacity).unwrap();
        writeln!(s, "agent.batch = {}            # transitions per gradient step", d.agent.batch).unwrap();
        writeln!(s, "agent.warmup = {}          # env steps before updates start", d.agent.warmup).unwrap();
        writeln!(s, "agent.update_every = {}      # env steps between gradient steps", d.agent.update_every).unwrap();
        writeln!(s, "agent.noise_start = {}      # exploration noise std at step 0", d.agent.noise_start).unwrap();
        writeln!(s, "agent.noise_end = {}        # exploration noise std after decay", d.agent.noise_end).unwrap();
        writeln!(s, "agent.noise_decay_steps = {}", d.agent.noise_decay_steps).unwrap();
        writeln!(s).unwrap();
        writeln!(s, "# Simulation.").unwrap();
        writeln!(s, "sim.delta = {}             # step length, s", d.sim.delta).unwrap();
        writeln!(s, "sim.horizon = {}             # planning and prediction horizon, s", d.sim.horizon).unwrap();
        writeln!(s, "sim.n_max_obs = {}           # participant slots in the observation", d.sim.n_max_obs).unwrap();
        writeln!(s, "sim.obs_range = {}          # observation range along the line, m", d.sim.obs_range).unwrap();
        writeln!(s, "sim.corridor = {}           # projection corridor half-width, m", d.sim.corridor).unwrap();
        writeln!(s, "sim.sigma_pos = {}        # tracking noise std on position, m per step", d.sim.sigma_pos).unwrap();
        writeln!(s, "sim.sigma_speed = {}       # tracking noise std on speed, m/s per step", d.sim.sigma_speed).unwrap();
        writeln!(s, "sim.lane_change_rate = {} # participant lane changes per second", d.sim.lane_change_rate).unwrap();
        writeln!(s, "sim.lane_change_duration = {}", d.sim.lane_change_duration).unwrap();
        writeln!(s, "sim.wheelbase = {}          # bicycle model wheelbase, m", d.sim.wheelbase).unwrap();
        writeln!(s).unwrap();
        writeln!(s, "# Reward weights; collision_hit and collision_free are the raw terms.").unwrap();
        writeln!(s, "reward.lat_acc = {}", d.reward.lat_acc).unwrap();
        writeln!(s, "reward.long_acc = {}", d.reward.long_acc).unwrap();
        writeln!(s, "reward.lat_jerk = {}", d.reward.lat_jerk).unwrap();
        writeln!(s, "reward.long_jerk = {}", d.reward.long_jerk).unwrap();
        writeln!(s, "reward.lateral_dev = {}", d.reward.lateral_dev).unwrap();
        writeln!(s, "reward.speed_dev = {}", d.reward.speed_dev).unwrap();
        writeln!(s, "reward.collision_hit = {}", d.reward.collision_hit).unwrap();
        writeln!(s, "reward.collision_free = {}", d.reward.collision_free).unwrap();
        writeln!(s).unwrap();
        writeln!(s, "# Participant car-following model.").unwrap();
        writeln!(s, "idm.accel_max = {}", d.idm.accel_max).unwrap();
        writeln!(s, "idm.brake_comfort = {}", d.idm.brake_comfort).unwrap();
        writeln!(s, "idm.headway = {}", d.idm.headway).unwrap();
        writeln!(s, "idm.min_gap = {}", d.idm.min_gap).unwrap();
        writeln!(s, "idm.exponent = {}", d.idm.exponent).unwrap();
        writeln!(s, "idm.brake_limit = {}", d.idm.brake_limit).unwrap();
        writeln!(s).unwrap();
        writeln!(s, "# Uncertainty propagation: process noise diagonals (s, d, s_dot,").unwrap();
        writeln!(s, "# d_dot), footprint confidence mass, and the covariance assumed at").unwrap();
        writeln!(s, "# the moment a transition was recorded.").unwrap();
        writeln!(s, "uncertainty.conf = {}", d.uncertainty.conf).unwrap();
        writeln!(s, "uncertainty.q_av = {}", list(&d.uncertainty.q_av)).unwrap();
        writeln!(s, "uncertainty.q_participant = {}", list(&d.uncertainty.q_participant)).unwrap();
        writeln!(s, "uncertainty.sigma0_av = {}", list(&d.uncertainty.sigma0_av)).unwrap();
        writeln!(s, "uncertainty.sigma0_participant = {}", list(&d.uncertainty.sigma0_participant)).unwrap();
        writeln!(s).unwrap();
        writeln!(s, "# Scenario overrides; uncomment to replace preset values.").unwrap();
        writeln!(s, "# scenario.lane_count = 2").unwrap();
        writeln!(s, "# scenario.lane_width = 3.5          # m").unwrap();
        writeln!(s, "# scenario.speed_limit = 13.9        # m/s").unwrap();
        writeln!(s, "# scenario.spawn_lane = 0").unwrap();
        writeln!(s, "# scenario.target_lane = 0").unwrap();
        writeln!(s, "# scenario.window_start = 40         # m past the spawn point").unwrap();
        writeln!(s, "# scenario.window_end = 80           # m past the spawn point").unwrap();
        writeln!(s, "# scenario.max_static = 2            # parked vehicles, upper bound").unwrap();
        writeln!(s, "# scenario.max_dynamic = 5           # moving vehicles, upper bound").unwrap();
        writeln!(s, "# scenario.goal_offset = 130         # spawn-to-goal arc length, m").unwrap();
        writeln!(s, "# scenario.time_limit = 60           # s").unwrap();
        writeln!(s, "# scenario.max_lateral_dev = 1.5     # m outside the lane span").unwrap();
        writeln!(s, "# scenario.line_length = 1200        # m").unwrap();
        writeln!(s, "# scenario.line_ds = 0.5             # m").unwrap();
        writeln!(s, "# scenario.spawn_s = 30              # m").unwrap();
        s
    }

    /// Parse the dotted-key format: one `section.key = value` per line,
    /// `#` comments, unknown or repeated keys rejected with the line
    /// number.
    pub fn parse(text: &str, path: &str) -> Result<Settings, HarnessError> {
        let mut s = Settings::default();
        let mut seen: Vec<String> = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let lineno = idx + 1;
            let err = |msg: String| HarnessError::Config {
                path: path.to_string(),
                line: lineno,
                msg,
            };
            let line = match raw.find('#') {
                Some(cut) => &raw[..cut],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(err(format!("expected `key = value`, got {line:?}")));
            };
            let key = key.trim();
            let value = value.trim();
            if seen.iter().any(|k| k == key) {
                return Err(err(format!("key {key} set twice")));
            }
            seen.push(key.to_string());
            s.set(key, value).map_err(err)?;
        }
        Ok(s)
    }

    pub fn parse_file(path: &std::path::Path) -> Result<Settings, HarnessError> {
        let text = std::fs::read_to_string(path)?;
        Settings::parse(&text, &path.display().to_string())
    }

    fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        fn num<T: FromStr>(value: &str) -> Result<T, String>
        where
            T::Err: fmt::Display,
        {
            value.parse::<T>().map_err(|e| format!("bad value {value:?}: {e}"))
        }
        fn list4(value: &str) -> Result<[f64; 4], String> {
            let parts: Vec<f64> = value
                .split(',')
                .map(|p| num::<f64>(p.trim()))
                .collect::<Result<_, _>>()?;
            parts.try_into().map_err(|v: Vec<f64>| {
                format!("expected 4 comma-separated numbers, got {}", v.len())
            })
        }

        match key {
            "run.total_env_steps" => self.run.total_env_steps = num(value)?,
            "run.eval_every" => self.run.eval_every = num(value)?,
            "run.eval_episodes" => self.run.eval_episodes = num(value)?,

            "agent.hidden" => {
                self.agent.hidden = value
                    .split(',')
                    .map(|p| num::<usize>(p.trim()))
                    .collect::<Result<_, _>>()?;
            }
            "agent.gamma" => self.agent.gamma = num(value)?,
            "agent.actor_lr" => self.agent.actor_lr = num(value)?,
            "agent.critic_lr" => self.agent.critic_lr = num(value)?,
            "agent.tau" => self.agent.tau = num(value)?,
            "agent.replay_capacity" => self.agent.replay_capacity = num(value)?,
            "agent.batch" => self.agent.batch = num(value)?,
            "agent.warmup" => self.agent.warmup = num(value)?,
            "agent.update_every" => self.agent.update_every = num(value)?,
            "agent.noise_start" => self.agent.noise_start = num(value)?,
            "agent.noise_end" => self.agent.noise_end = num(value)?,
            "agent.noise_decay_steps" => self.agent.noise_decay_steps = num(value)?,

            "sim.delta" => self.sim.delta = num(value)?,
            "sim.horizon" => self.sim.horizon = num(value)?,
            "sim.n_max_obs" => self.sim.n_max_obs = num(value)?,
            "sim.obs_range" => self.sim.obs_range = num(value)?,
            "sim.corridor" => self.sim.corridor = num(value)?,
            "sim.sigma_pos" => self.sim.sigma_pos = num(value)?,
            "sim.sigma_speed" => self.sim.sigma_speed = num(value)?,
            "sim.lane_change_rate" => self.sim.lane_change_rate = num(value)?,
            "sim.lane_change_duration" => self.sim.lane_change_duration = num(value)?,
            "sim.wheelbase" => self.sim.wheelbase = num(value)?,

            "reward.lat_acc" => self.reward.lat_acc = num(value)?,
            "reward.long_acc" => self.reward.long_acc = num(value)?,
            "reward.lat_jerk" => self.reward.lat_jerk = num(value)?,
            "reward.long_jerk" => self.reward.long_jerk = num(value)?,
            "reward.lateral_dev" => self.reward.lateral_dev = num(value)?,
            "reward.speed_dev" => self.reward.speed_dev = num(value)?,
            "reward.collision_hit" => self.reward.collision_hit = num(value)?,
            "reward.collision_free" => self.reward.collision_free = num(value)?,

            "idm.accel_max" => self.idm.accel_max = num(value)?,
            "idm.brake_comfort" => self.idm.brake_comfort = num(value)?,
            "idm.headway" => self.idm.headway = num(value)?,
            "idm.min_gap" => self.idm.min_gap = num(value)?,
            "idm.exponent" => self.idm.exponent = num(value)?,
            "idm.brake_limit" => self.idm.brake_limit = num(value)?,

            "uncertainty.conf" => self.uncertainty.conf = num(value)?,
            "uncertainty.q_av" => self.uncertainty.q_av = list4(value)?,
            "uncertainty.q_participant" => self.uncertainty.q_participant = list4(value)?,
            "uncertainty.sigma0_av" => self.uncertainty.sigma0_av = list4(value)?,
            "uncertainty.sigma0_participant" => {
                self.uncertainty.sigma0_participant = list4(value)?
            }

            "scenario.lane_count" => self.scenario.lane_count = Some(num(value)?),
            "scenario.lane_width" => self.scenario.lane_width = Some(num(value)?),
            "scenario.speed_limit" => self.scenario.speed_limit = Some(num(value)?),
            "scenario.spawn_lane" => self.scenario.spawn_lane = Some(num(value)?),
            "scenario.target_lane" => self.scenario.target_lane = Some(num(value)?),
            "scenario.window_start" => self.scenario.window_start = Some(num(value)?),
            "scenario.window_end" => self.scenario.window_end = Some(num(value)?),
            "scenario.max_static" => self.scenario.max_static = Some(num(value)?),
            "scenario.max_dynamic" => self.scenario.max_dynamic = Some(num(value)?),
            "scenario.goal_offset" => self.scenario.goal_offset = Some(num(value)?),
            "scenario.time_limit" => self.scenario.time_limit = Some(num(value)?),
            "scenario.max_lateral_dev" => self.scenario.max_lateral_dev = Some(num(value)?),
            "scenario.line_length" => self.scenario.line_length = Some(num(value)?),
            "scenario.line_ds" => self.scenario.line_ds = Some(num(value)?),
            "scenario.spawn_s" => self.scenario.spawn_s = Some(num(value)?),

            other => return Err(format!("unknown key {other:?}")),
        }
        Ok(())
    }
}

/// One training or evaluation run, fully specified.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub scenario_id: u8,
    pub method: Method,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub settings: Settings,
}

impl RunConfig {
    pub fn scenario_spec(&self) -> Result<ScenarioSpec, HarnessError> {
        let preset = ScenarioSpec::preset(self.scenario_id)?;
        Ok(self.settings.scenario.apply(preset))
    }

    /// Reject impossible combinations before any work is done.
    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |msg: String| Err(HarnessError::BadRun(msg));
        let s = &self.settings;
        let spec = self.scenario_spec()?;
        if spec.lane_count == 0 || spec.spawn_lane >= spec.lane_count
            || spec.target_lane >= spec.lane_count
        {
            return bad(format!(
                "scenario lanes inconsistent: {} lanes, spawn {}, target {}",
                spec.lane_count, spec.spawn_lane, spec.target_lane
            ));
        }
        if s.run.total_env_steps == 0 {
            return bad("run.total_env_steps must be positive".into());
        }
        if s.run.eval_episodes == 0 {
            return bad("run.eval_episodes must be positive".into());
        }
        if s.run.eval_every == 0 {
            return bad("run.eval_every must be positive".into());
        }
        if !(s.sim.delta > 0.0) {
            return bad("sim.delta must be positive".into());
        }
        let ratio = s.sim.horizon / s.sim.delta;
        if !(ratio >= 1.0) || (ratio - ratio.round()).abs() > 1e-9 {
            return bad(format!(
                "sim.horizon ({}) must be a positive whole multiple of sim.delta ({})",
                s.sim.horizon, s.sim.delta
            ));
        }
        if s.agent.batch == 0 || s.agent.replay_capacity < s.agent.batch {
            return bad(format!(
                "agent.batch ({}) must be positive and fit in agent.replay_capacity ({})",
                s.agent.batch, s.agent.replay_capacity
            ));
        }
        if s.agent.update_every == 0 {
            return bad("agent.update_every must be positive".into());
        }
        if s.agent.hidden.is_empty() || s.agent.hidden.iter().any(|&h| h == 0) {
            return bad("agent.hidden must list positive layer widths".into());
        }
        if !(s.agent.gamma > 0.0 && s.agent.gamma <= 1.0) {
            return bad(format!("agent.gamma ({}) must be in (0, 1]", s.agent.gamma));
        }
        if !(s.uncertainty.conf > 0.0 && s.uncertainty.conf < 1.0) {
            return bad(format!(
                "uncertainty.conf ({}) must be in (0, 1)",
                s.uncertainty.conf
            ));
        }
        Ok(())
    }
}
