//! Per-episode training metrics and their CSV form.

use std::collections::VecDeque;
use std::fmt::Write as _;
use std::path::Path;

use super::HarnessError;

pub const METRICS_HEADER: &str =
    "episode,env_step,avg_reward_per_step,collision,success,ep_len,roll_collision_rate,roll_success_rate";

#[derive(Clone, Debug, PartialEq)]
pub struct MetricsRow {
    pub episode: u64,
    pub env_step: u64,
    pub avg_reward_per_step: f64,
    pub collision: bool,
    pub success: bool,
    pub ep_len: u64,
    pub roll_collision_rate: f64,
    pub roll_success_rate: f64,
}

impl MetricsRow {
    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        write!(
            s,
            "{},{},{},{},{},{},{},{}",
            self.episode,
            self.env_step,
            self.avg_reward_per_step,
            self.collision as u8,
            self.success as u8,
            self.ep_len,
            self.roll_collision_rate,
            self.roll_success_rate
        )
        .expect("writing to a string cannot fail");
        s
    }

    pub fn parse(line: &str) -> Result<MetricsRow, String> {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 8 {
            return Err(format!("expected 8 fields, got {}", fields.len()));
        }
        fn f<T: std::str::FromStr>(s: &str, name: &str) -> Result<T, String>
        where
            T::Err: std::fmt::Display,
        {
            s.parse().map_err(|e| format!("bad {name} {s:?}: {e}"))
        }
        fn flag(s: &str, name: &str) -> Result<bool, String> {
            match s {
                "0" => Ok(false),
                "1" => Ok(true),
                other => Err(format!("bad {name} {other:?}: expected 0 or 1")),
            }
        }
        Ok(MetricsRow {
            episode: f(fields[0], "episode")?,
            env_step: f(fields[1], "env_step")?,
            avg_reward_per_step: f(fields[2], "avg_reward_per_step")?,
            collision: flag(fields[3], "collision")?,
            success: flag(fields[4], "success")?,
            ep_len: f(fields[5], "ep_len")?,
            roll_collision_rate: f(fields[6], "roll_collision_rate")?,
            roll_success_rate: f(fields[7], "roll_success_rate")?,
        })
    }
}

/// Trailing-window rates over per-episode flags.
#[derive(Clone, Debug)]
pub struct RollingWindow {
    window: usize,
    flags: VecDeque<(bool, bool)>,
}

impl RollingWindow {
    pub fn new(window: usize) -> Self {
        assert!(window > 0, "rolling window must hold at least one episode");
        RollingWindow { window, flags: VecDeque::new() }
    }

    /// Record one episode and return (collision_rate, success_rate) over
    /// the trailing window including it.
    pub fn push(&mut self, collision: bool, success: bool) -> (f64, f64) {
        if self.flags.len() == self.window {
            self.flags.pop_front();
        }
        self.flags.push_back((collision, success));
        self.rates()
    }

    pub fn rates(&self) -> (f64, f64) {
        let n = self.flags.len() as f64;
        let collisions = self.flags.iter().filter(|(c, _)| *c).count() as f64;
        let successes = self.flags.iter().filter(|(_, s)| *s).count() as f64;
        (collisions / n, successes / n)
    }

    pub fn len(&self) -> usize {
        self.flags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.flags.is_empty()
    }
}

/// Number of trailing episodes in every reported rolling rate.
pub const ROLLING_EPISODES: usize = 100;

/// Load a metrics file, verifying the header, that the body is non-empty,
/// and that the stored rolling rates equal a recomputation from the
/// per-episode flags.
pub fn load_metrics(path: &Path) -> Result<Vec<MetricsRow>, HarnessError> {
    let text = std::fs::read_to_string(path)?;
    let name = path.display().to_string();
    let err = |line: usize, msg: String| HarnessError::Csv { path: name.clone(), line, msg };

    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == METRICS_HEADER => {}
        Some((_, h)) => {
            return Err(err(1, format!("bad header {h:?}, expected {METRICS_HEADER:?}")))
        }
        None => return Err(err(1, "empty file".into())),
    }

    let mut rows = Vec::new();
    let mut roll = RollingWindow::new(ROLLING_EPISODES);
    for (idx, line) in lines {
        let lineno = idx + 1;
        if line.is_empty() {
            continue;
        }
        let row = MetricsRow::parse(line).map_err(|m| err(lineno, m))?;
        if !row.avg_reward_per_step.is_finite() {
            return Err(err(lineno, "avg_reward_per_step is not finite".into()));
        }
        for (rate, name) in [
            (row.roll_collision_rate, "roll_collision_rate"),
            (row.roll_success_rate, "roll_success_rate"),
        ] {
            if !(0.0..=1.0).contains(&rate) {
                return Err(err(lineno, format!("{name} {rate} outside [0, 1]")));
            }
        }
        let (collision_rate, success_rate) = roll.push(row.collision, row.success);
        if collision_rate != row.roll_collision_rate || success_rate != row.roll_success_rate {
            return Err(err(
                lineno,
                format!(
                    "rolling rates ({}, {}) disagree with the per-episode flags ({collision_rate}, {success_rate})",
                    row.roll_collision_rate, row.roll_success_rate
                ),
            ));
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(err(2, "no data rows".into()));
    }
    Ok(rows)
}
