//! Experiment harness: config parsing, seeded training and evaluation
//! loops, per-episode metrics, and SVG plots.

pub mod config;
pub mod metrics;
pub mod plots;
pub mod trainer;

use thiserror::Error;

use crate::agent::AgentError;
use crate::frenet::FrenetError;
use crate::neural::NeuralError;
use crate::targets::TargetError;
use crate::world::WorldError;

pub use config::{Method, RunConfig, Settings};
pub use metrics::{load_metrics, MetricsRow, RollingWindow, METRICS_HEADER};
pub use plots::emit_plots;
pub use trainer::{run_eval, run_training, EvalAggregate, EvalOptions, TrainingSummary};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{path}:{line}: {msg}")]
    Config { path: String, line: usize, msg: String },
    #[error("{path}:{line}: {msg}")]
    Csv { path: String, line: usize, msg: String },
    #[error("invalid run: {0}")]
    BadRun(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    World(#[from] WorldError),
    #[error(transparent)]
    Target(#[from] TargetError),
    #[error(transparent)]
    Neural(#[from] NeuralError),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Frenet(#[from] FrenetError),
}
