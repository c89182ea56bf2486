//! Deterministic-policy actor-critic learner with replay. The critic's
//! regression target is supplied by the caller, which keeps this module
//! independent of how targets are built.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::frenet::GoalAction;
use crate::neural::{Activation, AdamConfig, AdamState, Gradients, Mlp};
use crate::world::{ControlAction, Participant, VehicleState};

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("replay holds {len} transitions, batch needs {batch}")]
    UndersizedBuffer { len: usize, batch: usize },
    #[error(transparent)]
    Neural(#[from] crate::neural::NeuralError),
}

/// Per-dimension affine map between the network's normalized output cube
/// [-1, 1]^dim and physical action ranges.
#[derive(Clone, Debug, PartialEq)]
pub struct ActionBounds {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl ActionBounds {
    /// Trajectory-goal bounds: duration s, lateral offset m, longitudinal
    /// advance m, arrival speed m/s.
    pub fn goal() -> Self {
        ActionBounds {
            lo: vec![1.0, -5.25, 1.0, 0.0],
            hi: vec![4.0, 5.25, 50.0, 16.7],
        }
    }

    /// Direct-control bounds: steering rad, acceleration m/s^2.
    pub fn control() -> Self {
        ActionBounds { lo: vec![-0.5, -6.0], hi: vec![0.5, 3.0] }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    /// Normalized [-1, 1] coordinates to physical values, clamping first
    /// so out-of-cube inputs cannot escape the bounds.
    pub fn map(&self, u: &[f64]) -> Vec<f64> {
        assert_eq!(u.len(), self.dim(), "action width mismatch");
        u.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .map(|(&v, (&lo, &hi))| lo + 0.5 * (v.clamp(-1.0, 1.0) + 1.0) * (hi - lo))
            .collect()
    }

    pub fn normalize(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.dim(), "action width mismatch");
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .map(|(&v, (&lo, &hi))| (2.0 * (v - lo) / (hi - lo) - 1.0).clamp(-1.0, 1.0))
            .collect()
    }

    pub fn goal_action(&self, u: &[f64]) -> GoalAction {
        let x = self.map(u);
        assert_eq!(x.len(), 4, "goal actions have four coordinates");
        GoalAction { t_target: x[0], d_target: x[1], sigma_advance: x[2], s_dot_target: x[3] }
    }

    /// Goal action with the lateral target anchored to a route datum. The
    /// policy's lateral output means "offset from where the route says to
    /// be", so the zero action holds the route rather than chasing the
    /// road's absolute centerline.
    pub fn goal_action_on(&self, u: &[f64], datum: f64) -> GoalAction {
        let mut g = self.goal_action(u);
        g.d_target += datum;
        g
    }

    pub fn control_action(&self, u: &[f64]) -> ControlAction {
        let x = self.map(u);
        assert_eq!(x.len(), 2, "control actions have two coordinates");
        ControlAction { steer: x[0], accel: x[1] }
    }
}

/// What the learner knew about the world when a transition was recorded:
/// the pre-step ego state and full participant snapshots. Participant
/// forecasts are recomputed from these on demand; forward rollout of the
/// traffic model is deterministic, so the recomputation reproduces the
/// prediction available at decision time exactly.
#[derive(Clone, Debug, PartialEq)]
pub struct PredictionContext {
    pub time: f64,
    pub av: VehicleState,
    pub participants: Vec<Participant>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReplayTransition {
    pub obs: Vec<f64>,
    /// Executed action in normalized [-1, 1] coordinates.
    pub action: Vec<f64>,
    pub reward: f64,
    pub next_obs: Vec<f64>,
    pub done: bool,
    /// Present when the training method replays predictions.
    pub ctx: Option<PredictionContext>,
}

/// Fixed-capacity ring buffer with uniform without-replacement sampling.
#[derive(Clone, Debug)]
pub struct ReplayBuffer {
    data: Vec<ReplayTransition>,
    capacity: usize,
    head: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        ReplayBuffer { data: Vec::new(), capacity, head: 0 }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn get(&self, idx: usize) -> &ReplayTransition {
        &self.data[idx]
    }

    pub fn push(&mut self, tr: ReplayTransition) {
        if self.data.len() < self.capacity {
            self.data.push(tr);
        } else {
            self.data[self.head] = tr;
            self.head = (self.head + 1) % self.capacity;
        }
    }

    /// Floyd's sampling: `batch` distinct indices, uniform over the buffer.
    pub fn sample_indices(
        &self,
        rng: &mut ChaCha8Rng,
        batch: usize,
    ) -> Result<Vec<usize>, AgentError> {
        let len = self.data.len();
        if len < batch {
            return Err(AgentError::UndersizedBuffer { len, batch });
        }
        let mut chosen: Vec<usize> = Vec::with_capacity(batch);
        for i in len - batch..len {
            let j = rng.random_range(0..=i);
            if chosen.contains(&j) {
                chosen.push(i);
            } else {
                chosen.push(j);
            }
        }
        Ok(chosen)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DdpgConfig {
    pub obs_len: usize,
    pub action_dim: usize,
    pub hidden: Vec<usize>,
    pub gamma: f64,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub tau: f64,
    pub replay_capacity: usize,
    pub batch: usize,
    /// Environment steps before updates begin.
    pub warmup: u64,
    /// Update once per this many environment steps.
    pub update_every: u64,
    /// Exploration noise std in normalized action units, decaying linearly
    /// from start to end over `noise_decay_steps`.
    pub noise_start: f64,
    pub noise_end: f64,
    pub noise_decay_steps: u64,
}

impl DdpgConfig {
    pub fn defaults(obs_len: usize, action_dim: usize) -> Self {
        DdpgConfig {
            obs_len,
            action_dim,
            hidden: vec![128, 128],
            gamma: 0.99,
            actor_lr: 1e-4,
            critic_lr: 1e-3,
            tau: 0.005,
            replay_capacity: 200_000,
            batch: 128,
            warmup: 2_000,
            update_every: 1,
            noise_start: 0.4,
            // The settled noise floor must stay well under the lateral
            // margin left while passing traffic, otherwise exploration
            // alone tips converged policies out of the corridor.
            noise_end: 0.03,
            noise_decay_steps: 2_000,
        }
    }
}

pub struct DdpgAgent {
    pub cfg: DdpgConfig,
    pub actor: Mlp,
    pub critic: Mlp,
    pub actor_tgt: Mlp,
    pub critic_tgt: Mlp,
    pub replay: ReplayBuffer,
    actor_opt: AdamState,
    critic_opt: AdamState,
}

impl DdpgAgent {
    pub fn new(cfg: DdpgConfig, rng: &mut ChaCha8Rng) -> Result<Self, AgentError> {
        let mut actor_sizes = vec![cfg.obs_len];
        actor_sizes.extend_from_slice(&cfg.hidden);
        actor_sizes.push(cfg.action_dim);
        let mut critic_sizes = vec![cfg.obs_len + cfg.action_dim];
        critic_sizes.extend_from_slice(&cfg.hidden);
        critic_sizes.push(1);

        let mut actor = Mlp::new(&actor_sizes, Activation::Tanh, rng)?;
        let mut critic = Mlp::new(&critic_sizes, Activation::Identity, rng)?;
        // Small output layers start the policy near the mid-range action
        // and the value estimate near zero.
        actor.scale_last_layer(0.01);
        critic.scale_last_layer(0.01);
        let actor_tgt = actor.clone();
        let critic_tgt = critic.clone();
        let actor_opt = AdamState::new(&actor, AdamConfig::with_lr(cfg.actor_lr));
        let critic_opt = AdamState::new(&critic, AdamConfig::with_lr(cfg.critic_lr));
        let replay = ReplayBuffer::new(cfg.replay_capacity);
        Ok(DdpgAgent { cfg, actor, critic, actor_tgt, critic_tgt, replay, actor_opt, critic_opt })
    }

    /// Exploration noise std at a given environment step.
    pub fn noise_sigma(&self, env_step: u64) -> f64 {
        let c = &self.cfg;
        if c.noise_decay_steps == 0 || env_step >= c.noise_decay_steps {
            return c.noise_end;
        }
        let frac = env_step as f64 / c.noise_decay_steps as f64;
        c.noise_start + frac * (c.noise_end - c.noise_start)
    }

    /// Normalized action for `obs`: actor output plus Gaussian noise,
    /// clipped back into the cube. `sigma == 0` draws nothing.
    pub fn select_u(&self, obs: &[f64], sigma: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let mut u = self.actor.forward(obs);
        if sigma > 0.0 {
            let n = Normal::new(0.0, sigma).unwrap();
            for v in &mut u {
                *v += n.sample(rng);
            }
        }
        for v in &mut u {
            *v = v.clamp(-1.0, 1.0);
        }
        u
    }

    fn critic_input(obs: &[f64], u: &[f64]) -> Vec<f64> {
        let mut x = Vec::with_capacity(obs.len() + u.len());
        x.extend_from_slice(obs);
        x.extend_from_slice(u);
        x
    }

    pub fn q_value(critic: &Mlp, obs: &[f64], u: &[f64]) -> f64 {
        critic.forward(&Self::critic_input(obs, u))[0]
    }

    /// One squared-error regression step of the critic toward `ys`.
    /// Returns the pre-step mean squared error.
    pub fn critic_update(&mut self, indices: &[usize], ys: &[f64]) -> f64 {
        assert_eq!(indices.len(), ys.len(), "one target per sampled transition");
        let b = indices.len() as f64;
        let mut grads = Gradients::zeros_like(&self.critic);
        let mut loss = 0.0;
        for (&i, &y) in indices.iter().zip(ys) {
            let tr = &self.replay.data[i];
            let x = Self::critic_input(&tr.obs, &tr.action);
            let (out, cache) = self.critic.forward_cached(&x);
            let err = out[0] - y;
            loss += err * err;
            self.critic.backward_into(&cache, &[2.0 * err / b], &mut grads);
        }
        self.critic_opt.step(&mut self.critic, &grads);
        loss / b
    }

    /// Ascend the critic's value of the actor's own actions. Returns the
    /// pre-step mean value (the negated actor objective).
    pub fn actor_update(&mut self, indices: &[usize]) -> f64 {
        let b = indices.len() as f64;
        let mut grads = Gradients::zeros_like(&self.actor);
        let mut sink = Gradients::zeros_like(&self.critic);
        let mut mean_q = 0.0;
        for &i in indices {
            let tr = &self.replay.data[i];
            let (u, actor_cache) = self.actor.forward_cached(&tr.obs);
            let x = Self::critic_input(&tr.obs, &u);
            let (q, critic_cache) = self.critic.forward_cached(&x);
            mean_q += q[0];
            // Minimize -Q: push du = -dQ/du through the actor. The critic
            // gradient accumulator is discarded; only its input gradient
            // matters here.
            let dx = self.critic.backward_into(&critic_cache, &[-1.0 / b], &mut sink);
            let du = &dx[tr.obs.len()..];
            self.actor.backward_into(&actor_cache, du, &mut grads);
        }
        self.actor_opt.step(&mut self.actor, &grads);
        mean_q / b
    }

    pub fn soft_update(&mut self) {
        crate::neural::polyak_update(&mut self.actor_tgt, &self.actor, self.cfg.tau);
        crate::neural::polyak_update(&mut self.critic_tgt, &self.critic, self.cfg.tau);
    }
}
