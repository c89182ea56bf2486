//! Training-curve SVGs rendered straight from metrics files.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::metrics::{load_metrics, MetricsRow, ROLLING_EPISODES};
use super::HarnessError;

const PALETTE: [&str; 8] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
];

const WIDTH: f64 = 860.0;
const HEIGHT: f64 = 520.0;
const MARGIN_L: f64 = 78.0;
const MARGIN_R: f64 = 24.0;
const MARGIN_T: f64 = 46.0;
const MARGIN_B: f64 = 58.0;

struct Series {
    name: String,
    points: Vec<(f64, f64)>,
}

/// Render one curve per metrics file for average reward (smoothed over the
/// rolling episode window), collision rate and success rate, against
/// environment steps. Legend entries are the input file stems.
pub fn emit_plots(csv_paths: &[PathBuf], out_dir: &Path) -> Result<Vec<PathBuf>, HarnessError> {
    if csv_paths.is_empty() {
        return Err(HarnessError::BadRun("no metrics files to plot".into()));
    }
    let mut runs: Vec<(String, Vec<MetricsRow>)> = Vec::with_capacity(csv_paths.len());
    for path in csv_paths {
        let stem = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string());
        runs.push((stem, load_metrics(path)?));
    }

    std::fs::create_dir_all(out_dir)?;
    let charts: [(&str, &str, fn(&[MetricsRow]) -> Vec<(f64, f64)>); 3] = [
        ("avg_reward.svg", "average reward per step", smoothed_reward),
        ("collision_rate.svg", "rolling collision rate", |rows| {
            rows.iter().map(|r| (r.env_step as f64, r.roll_collision_rate)).collect()
        }),
        ("success_rate.svg", "rolling success rate", |rows| {
            rows.iter().map(|r| (r.env_step as f64, r.roll_success_rate)).collect()
        }),
    ];

    let mut written = Vec::with_capacity(charts.len());
    for (file, title, extract) in charts {
        let series: Vec<Series> = runs
            .iter()
            .map(|(name, rows)| Series { name: name.clone(), points: extract(rows) })
            .collect();
        let fixed_unit = title.ends_with("rate");
        let svg = render_chart(title, "environment steps", &series, fixed_unit);
        let path = out_dir.join(file);
        std::fs::write(&path, svg)?;
        written.push(path);
    }
    Ok(written)
}

/// Per-episode average reward smoothed with the same window the rolling
/// rates use, so all three charts answer to one episode horizon.
fn smoothed_reward(rows: &[MetricsRow]) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(rows.len());
    for (i, row) in rows.iter().enumerate() {
        let start = (i + 1).saturating_sub(ROLLING_EPISODES);
        let window = &rows[start..=i];
        let mean = window.iter().map(|r| r.avg_reward_per_step).sum::<f64>() / window.len() as f64;
        out.push((row.env_step as f64, mean));
    }
    out
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn fmt_tick(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if v.abs() >= 10_000.0 && v.fract() == 0.0 {
        if v.abs() >= 1_000_000.0 && (v / 100_000.0).fract() == 0.0 {
            return format!("{}M", v / 1_000_000.0);
        }
        return format!("{}k", v / 1_000.0);
    }
    let s = format!("{v:.4}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    s.to_string()
}

fn render_chart(title: &str, x_label: &str, series: &[Series], y_is_rate: bool) -> String {
    let plot_w = WIDTH - MARGIN_L - MARGIN_R;
    let plot_h = HEIGHT - MARGIN_T - MARGIN_B;

    let xs = series.iter().flat_map(|s| s.points.iter().map(|p| p.0));
    let ys = series.iter().flat_map(|s| s.points.iter().map(|p| p.1));
    let (mut x0, mut x1) = bounds(xs);
    let (mut y0, mut y1) = if y_is_rate { (0.0, 1.0) } else { bounds(ys) };
    if x1 <= x0 {
        x0 -= 1.0;
        x1 += 1.0;
    }
    if !y_is_rate {
        let pad = 0.05 * (y1 - y0).max(1e-12);
        y0 -= pad;
        y1 += pad;
    }
    if y1 <= y0 {
        y0 -= 1.0;
        y1 += 1.0;
    }
    let px = |x: f64| MARGIN_L + (x - x0) / (x1 - x0) * plot_w;
    let py = |y: f64| MARGIN_T + plot_h - (y - y0) / (y1 - y0) * plot_h;

    let mut svg = String::new();
    write!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {WIDTH} {HEIGHT}\" \
         font-family=\"sans-serif\" font-size=\"13\">\n"
    )
    .unwrap();
    writeln!(svg, "<rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>").unwrap();
    writeln!(
        svg,
        "<text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">{}</text>",
        MARGIN_L + plot_w / 2.0,
        esc(title)
    )
    .unwrap();

    let ticks = 5usize;
    for i in 0..ticks {
        let f = i as f64 / (ticks - 1) as f64;
        let xv = x0 + f * (x1 - x0);
        let yv = y0 + f * (y1 - y0);
        let xp = px(xv);
        let yp = py(yv);
        writeln!(
            svg,
            "<line x1=\"{xp:.2}\" y1=\"{}\" x2=\"{xp:.2}\" y2=\"{}\" stroke=\"#dddddd\"/>",
            MARGIN_T,
            MARGIN_T + plot_h
        )
        .unwrap();
        writeln!(
            svg,
            "<line x1=\"{}\" y1=\"{yp:.2}\" x2=\"{}\" y2=\"{yp:.2}\" stroke=\"#dddddd\"/>",
            MARGIN_L,
            MARGIN_L + plot_w
        )
        .unwrap();
        writeln!(
            svg,
            "<text x=\"{xp:.2}\" y=\"{}\" text-anchor=\"middle\">{}</text>",
            MARGIN_T + plot_h + 20.0,
            fmt_tick(xv)
        )
        .unwrap();
        writeln!(
            svg,
            "<text x=\"{}\" y=\"{:.2}\" text-anchor=\"end\">{}</text>",
            MARGIN_L - 8.0,
            yp + 4.0,
            fmt_tick(yv)
        )
        .unwrap();
    }
    writeln!(
        svg,
        "<rect x=\"{MARGIN_L}\" y=\"{MARGIN_T}\" width=\"{plot_w}\" height=\"{plot_h}\" \
         fill=\"none\" stroke=\"#333333\"/>"
    )
    .unwrap();
    writeln!(
        svg,
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>",
        MARGIN_L + plot_w / 2.0,
        HEIGHT - 14.0,
        esc(x_label)
    )
    .unwrap();

    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        if s.points.len() == 1 {
            let (x, y) = s.points[0];
            writeln!(svg, "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"{color}\"/>", px(x), py(y))
                .unwrap();
        } else {
            let pts: Vec<String> =
                s.points.iter().map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y))).collect();
            writeln!(
                svg,
                "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.6\"/>",
                pts.join(" ")
            )
            .unwrap();
        }
    }

    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let ly = MARGIN_T + 14.0 + 18.0 * i as f64;
        let lx = MARGIN_L + plot_w - 170.0;
        writeln!(
            svg,
            "<line x1=\"{lx}\" y1=\"{ly}\" x2=\"{}\" y2=\"{ly}\" stroke=\"{color}\" stroke-width=\"2.5\"/>",
            lx + 26.0
        )
        .unwrap();
        writeln!(svg, "<text x=\"{}\" y=\"{}\">{}</text>", lx + 32.0, ly + 4.0, esc(&s.name))
            .unwrap();
    }

    svg.push_str("</svg>\n");
    svg
}

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for v in values {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if lo.is_finite() && hi.is_finite() {
        (lo, hi)
    } else {
        (0.0, 1.0)
    }
}
