//! Line plots as plain SVG. Output depends only on the data: fixed 800x600
//! viewport, fixed margins and palette, ticks from the 1-2-5 rule, and all
//! coordinates printed with two decimals.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use nlp_core::problem::Trajectory;

use crate::error::{CliError, CliResult};

pub const WIDTH: f64 = 800.0;
pub const HEIGHT: f64 = 600.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 160.0;
const TOP: f64 = 50.0;
const BOTTOM: f64 = 60.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone)]
pub struct LinePlot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
}

/// Tick step from the 1-2-5 sequence giving at most `target` intervals.
pub fn nice_step(span: f64, target: usize) -> f64 {
    let raw = span / target as f64;
    let mag = 10f64.powf(raw.log10().floor());
    [1.0, 2.0, 5.0, 10.0]
        .into_iter()
        .map(|m| m * mag)
        .find(|&s| s >= raw * (1.0 - 1e-12))
        .unwrap_or(10.0 * mag)
}

/// Axis range widened to whole steps, plus the tick values.
pub fn axis_ticks(lo: f64, hi: f64) -> (f64, f64, Vec<f64>) {
    let (lo, hi) = if hi - lo > 1e-12 * hi.abs().max(lo.abs()).max(1e-300) {
        (lo, hi)
    } else {
        let pad = if lo == 0.0 { 1.0 } else { 0.1 * lo.abs() };
        (lo - pad, hi + pad)
    };
    let step = nice_step(hi - lo, 5);
    let start = (lo / step).floor();
    let end = (hi / step).ceil();
    let ticks = (0..=(end - start) as i64).map(|k| (start + k as f64) * step).collect();
    (start * step, end * step, ticks)
}

fn tick_label(v: f64, step: f64) -> String {
    let decimals = (-step.log10().floor()).max(0.0) as usize;
    if v.abs() < step * 1e-9 {
        return "0".into();
    }
    if step < 1e-3 || v.abs() >= 1e5 {
        let mant = (-(step / 10f64.powf(v.abs().log10().floor())).log10().floor()).max(0.0) as usize;
        let text = format!("{v:.mant$e}");
        let (m, e) = text.split_once('e').expect("exponent format");
        let m = if m.contains('.') { m.trim_end_matches('0').trim_end_matches('.') } else { m };
        return format!("{m}e{e}");
    }
    format!("{v:.decimals$}")
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

impl LinePlot {
    pub fn render(&self) -> String {
        let finite = |v: f64| v.is_finite();
        let pts = self.series.iter().flat_map(|s| s.points.iter()).filter(|p| finite(p.0) && finite(p.1));
        let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for &(x, y) in pts {
            x0 = x0.min(x);
            x1 = x1.max(x);
            y0 = y0.min(y);
            y1 = y1.max(y);
        }
        if !x0.is_finite() {
            (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
        }
        let (xa, xb, xt) = axis_ticks(x0, x1);
        let (ya, yb, yt) = axis_ticks(y0, y1);
        let pw = WIDTH - LEFT - RIGHT;
        let ph = HEIGHT - TOP - BOTTOM;
        let sx = |x: f64| LEFT + (x - xa) / (xb - xa) * pw;
        let sy = |y: f64| TOP + ph - (y - ya) / (yb - ya) * ph;

        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="800" height="600" viewBox="0 0 800 600" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(s, r#"<rect x="0" y="0" width="800" height="600" fill="white"/>"#);
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="30.00" text-anchor="middle" font-size="16">{}</text>"#,
            LEFT + pw / 2.0,
            escape(&self.title)
        );
        let xstep = if xt.len() > 1 { xt[1] - xt[0] } else { 1.0 };
        let ystep = if yt.len() > 1 { yt[1] - yt[0] } else { 1.0 };
        for &x in &xt {
            let px = sx(x);
            let _ = writeln!(
                s,
                r##"<line x1="{px:.2}" y1="{:.2}" x2="{px:.2}" y2="{:.2}" stroke="#e0e0e0"/>"##,
                TOP,
                TOP + ph
            );
            let _ = writeln!(
                s,
                r#"<text x="{px:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
                TOP + ph + 18.0,
                tick_label(x, xstep)
            );
        }
        for &y in &yt {
            let py = sy(y);
            let _ = writeln!(
                s,
                r##"<line x1="{:.2}" y1="{py:.2}" x2="{:.2}" y2="{py:.2}" stroke="#e0e0e0"/>"##,
                LEFT,
                LEFT + pw
            );
            let _ = writeln!(
                s,
                r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
                LEFT - 6.0,
                py + 4.0,
                tick_label(y, ystep)
            );
        }
        let _ = writeln!(
            s,
            r#"<rect x="{LEFT:.2}" y="{TOP:.2}" width="{pw:.2}" height="{ph:.2}" fill="none" stroke="black"/>"#
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            LEFT + pw / 2.0,
            HEIGHT - 15.0,
            escape(&self.x_label)
        );
        let _ = writeln!(
            s,
            r#"<text x="20.00" y="{:.2}" text-anchor="middle" transform="rotate(-90 20.00 {:.2})">{}</text>"#,
            TOP + ph / 2.0,
            TOP + ph / 2.0,
            escape(&self.y_label)
        );
        for (k, series) in self.series.iter().enumerate() {
            let color = PALETTE[k % PALETTE.len()];
            let path = series
                .points
                .iter()
                .filter(|p| finite(p.0) && finite(p.1))
                .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
                .collect::<Vec<_>>()
                .join(" ");
            let _ = writeln!(
                s,
                r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{path}"/>"#
            );
            let ly = TOP + 10.0 + 18.0 * k as f64;
            let lx = LEFT + pw + 12.0;
            let _ = writeln!(
                s,
                r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"/>"#,
                lx + 20.0
            );
            let _ = writeln!(
                s,
                r#"<text x="{:.2}" y="{:.2}">{}</text>"#,
                lx + 26.0,
                ly + 4.0,
                escape(&series.label)
            );
        }
        s.push_str("</svg>\n");
        s
    }

    pub fn write(&self, path: &Path) -> CliResult<()> {
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        }
        fs::write(path, self.render()).map_err(|e| CliError::io(path, e))
    }
}

/// Profiles `u(., t)` at the levels nearest to `times`.
pub fn profile_plot(traj: &Trajectory<f64>, times: &[f64], title: &str) -> CliResult<LinePlot> {
    let grid = traj.grid();
    let nodes = grid.nodes();
    let mut series = Vec::new();
    for &t in times {
        if !(0.0..=grid.horizon() * (1.0 + 1e-12)).contains(&t) {
            return Err(CliError::Usage(format!(
                "plot time {t} outside [0, {}]",
                grid.horizon()
            )));
        }
        let j = grid.level_of(t);
        series.push(Series {
            label: format!("t = {}", short(grid.time(j))),
            points: nodes.iter().copied().zip(traj.level(j).iter().copied()).collect(),
        });
    }
    Ok(LinePlot {
        title: title.into(),
        x_label: "x".into(),
        y_label: "u".into(),
        series,
    })
}

/// `sup_x u(x, t)` against `t`.
pub fn sup_plot(named: &[(&str, &Trajectory<f64>)], title: &str) -> LinePlot {
    LinePlot {
        title: title.into(),
        x_label: "t".into(),
        y_label: "sup u".into(),
        series: named
            .iter()
            .map(|(label, traj)| Series {
                label: label.to_string(),
                points: traj.grid().times().into_iter().zip(traj.sup_per_level()).collect(),
            })
            .collect(),
    }
}

/// Five evenly spaced times from 0 to the horizon.
pub fn default_times(traj: &Trajectory<f64>) -> Vec<f64> {
    let t = traj.grid().horizon();
    (0..5).map(|k| t * k as f64 / 4.0).collect()
}

fn short(v: f64) -> String {
    let s = format!("{v:.6}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s.is_empty() || s == "-" {
        "0".into()
    } else {
        s.into()
    }
}

/// Writes `profiles.svg` and `sup_norm.svg` for `traj` into `dir`.
pub fn export_plots(traj: &Trajectory<f64>, times: &[f64], dir: &Path) -> CliResult<Vec<PathBuf>> {
    let profiles = dir.join("profiles.svg");
    profile_plot(traj, times, "profiles")?.write(&profiles)?;
    let sup = dir.join("sup_norm.svg");
    sup_plot(&[("u", traj)], "sup norm").write(&sup)?;
    Ok(vec![profiles, sup])
}
