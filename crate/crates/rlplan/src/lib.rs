//! Desk-scale testbed for reinforcement-learned trajectory planning on 2D roads.
//!
//! The crate simulates an automated vehicle that plans short-horizon
//! trajectories in a Frenet frame along a reference line, surrounded by
//! scripted traffic. A deterministic-policy-gradient agent picks planning
//! goals; several critic-target strategies are provided that roll the
//! planner and the traffic prediction forward over the planning horizon,
//! optionally inflating vehicle footprints by propagated state uncertainty.
//!
//! Modules, bottom up:
//! * [`frenet`]: reference lines, Frenet conversions, quintic trajectories
//! * [`uncertainty`]: covariance propagation, confidence ellipses, footprint
//!   inflation and convex-polygon collision tests
//! * [`neural`]: plain multilayer perceptrons with analytic gradients,
//!   adaptive-moment optimizer, binary checkpoints
//! * [`world`]: road, scenario spawning, traffic behavior, observations,
//!   rewards, collision checks
//! * [`agent`]: replay buffer, action bounds, actor/critic updates
//! * [`targets`]: critic target strategies (one-step, reward prediction,
//!   iterated reward prediction, with and without uncertainty inflation)
//! * [`harness`]: run configs, training/evaluation loops, metrics files,
//!   plot emission

pub mod agent;
pub mod frenet;
pub mod harness;
pub mod neural;
pub mod rngs;
pub mod targets;
pub mod uncertainty;
pub mod world;
