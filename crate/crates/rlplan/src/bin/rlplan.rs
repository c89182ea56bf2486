use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use rlplan::harness::{
    emit_plots, run_eval, run_training, EvalOptions, HarnessError, Method, RunConfig, Settings,
};

#[derive(Parser)]
#[command(name = "rlplan", version, about = "Trajectory-planning RL testbed")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Train a policy and write metrics, checkpoints and evaluation logs.
    Train {
        /// Scenario preset, 1 through 4.
        #[arg(long)]
        scenario: u8,
        /// baseline1, baseline2, rp, irp, or irp_up.
        #[arg(long)]
        method: Method,
        #[arg(long)]
        seed: u64,
        /// Override run.total_env_steps from the config.
        #[arg(long)]
        steps: Option<u64>,
        /// Config file; defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory for metrics.csv, eval_log.csv and checkpoints.
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate a saved actor without exploration noise.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        scenario: u8,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 10)]
        episodes: usize,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Dump the first episode as a CSV trace to this file.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Render metric curves from one or more metrics.csv files as SVGs.
    Plot {
        /// Output directory for the charts.
        #[arg(long)]
        out: PathBuf,
        /// metrics.csv files; each becomes one curve per chart.
        #[arg(required = true)]
        files: Vec<PathBuf>,
    },
    /// Print the default configuration as a commented config file.
    Defaults,
}

fn load_settings(config: Option<&PathBuf>) -> Result<Settings, HarnessError> {
    match config {
        Some(path) => Settings::parse_file(path),
        None => Ok(Settings::default()),
    }
}

fn run() -> Result<(), HarnessError> {
    match Cli::parse().cmd {
        Cmd::Train { scenario, method, seed, steps, config, out } => {
            let mut settings = load_settings(config.as_ref())?;
            if let Some(n) = steps {
                settings.run.total_env_steps = n;
            }
            let cfg = RunConfig { scenario_id: scenario, method, seed, out_dir: out, settings };
            let summary = run_training(&cfg)?;
            println!(
                "trained {} episodes over {} env steps",
                summary.episodes, summary.env_steps
            );
            println!(
                "rolling success {:.3}, rolling collision {:.3}",
                summary.final_roll_success, summary.final_roll_collision
            );
            println!("metrics  {}", summary.metrics_path.display());
            println!("eval log {}", summary.eval_log_path.display());
            if let Some(p) = &summary.best_actor_path {
                println!("best     {}", p.display());
            }
            println!("final    {}", summary.final_actor_path.display());
        }
        Cmd::Eval { checkpoint, scenario, seed, episodes, config, trace } => {
            let settings = load_settings(config.as_ref())?;
            let agg = run_eval(&EvalOptions {
                checkpoint,
                scenario_id: scenario,
                seed,
                episodes,
                settings,
                trace_path: trace.clone(),
            })?;
            println!("episodes            {}", agg.episodes);
            println!("avg reward per step {}", agg.avg_reward_per_step);
            println!("collision rate      {}", agg.collision_rate);
            println!("success rate        {}", agg.success_rate);
            if let Some(p) = trace {
                println!("trace               {}", p.display());
            }
        }
        Cmd::Plot { out, files } => {
            for path in emit_plots(&files, &out)? {
                println!("{}", path.display());
            }
        }
        Cmd::Defaults => print!("{}", Settings::documented_defaults()),
    }
    Ok(())
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
