//! Deterministic text outputs: trace CSV, JSON manifest and SVG line charts.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use vqoco::harness::{Manifest, RunResult};

use crate::error::CliError;

/// Header of the per-round trace.
pub fn trace_header(n: usize, m: usize) -> String {
    let mut cols = vec!["t".to_string()];
    cols.extend((1..=n).map(|i| format!("x_{i}")));
    cols.push("loss".into());
    cols.push("regret_cum".into());
    cols.extend((1..=m).map(|k| format!("g_{k}")));
    cols.extend((1..=m).map(|k| format!("viol_cum_{k}")));
    cols.extend((1..=m).map(|k| format!("Q_{k}")));
    cols.push("drift".into());
    cols.join(",")
}

/// Shortest text that parses back to the same value.
fn num(v: f64) -> String {
    format!("{v:?}")
}

/// Rows `t = 1..=T` of a run. Queue columns hold `Q(t+1)` for the
/// virtual-queue algorithm, the dual variables for the primal-dual baseline
/// and zeros for projected gradient descent.
pub fn trace_csv(result: &RunResult) -> String {
    let (n, m) = (result.manifest.n, result.manifest.m);
    let mut out = trace_header(n, m);
    out.push('\n');
    let metrics = &result.metrics;
    for r in &result.trajectory.rounds[1..] {
        let i = r.t - 1;
        let mut row: Vec<String> = vec![r.t.to_string()];
        row.extend(r.x.iter().map(|v| num(*v)));
        row.push(num(r.loss));
        row.push(num(metrics.cumulative_regret[i]));
        row.extend(r.g_vals.iter().map(|v| num(*v)));
        row.extend(metrics.cumulative_violation[i].iter().map(|v| num(*v)));
        row.extend(r.queue_after.iter().map(|v| num(*v)));
        row.push(num(r.drift));
        out += &row.join(",");
        out.push('\n');
    }
    out
}

pub fn manifest_json(manifest: &Manifest) -> String {
    let mut s = serde_json::to_string_pretty(manifest).expect("manifest serializes");
    s.push('\n');
    s
}

/// A named polyline.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 190.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const MAX_POINTS: usize = 1000;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Tick positions at a 1-2-5 step covering `[lo, hi]`.
fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let raw = (hi - lo) / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|f| f * mag)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|k| k as f64 * step).collect()
}

fn tick_label(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let a = v.abs();
    if !(1e-3..1e6).contains(&a) {
        return format!("{v:.1e}");
    }
    let s = format!("{v:.3}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

/// Keeps at most [`MAX_POINTS`] evenly spaced points, always including the last.
fn thin(points: &[(f64, f64)]) -> Vec<(f64, f64)> {
    if points.len() <= MAX_POINTS {
        return points.to_vec();
    }
    let stride = points.len().div_ceil(MAX_POINTS);
    let mut out: Vec<_> = points.iter().step_by(stride).copied().collect();
    if out.last() != points.last() {
        out.push(*points.last().expect("nonempty"));
    }
    out
}

/// An SVG line chart with axes, ticks and a legend. Identical inputs give
/// identical bytes.
pub fn line_chart(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    let all = series.iter().flat_map(|s| s.points.iter()).filter(|(x, y)| x.is_finite() && y.is_finite());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, 0.0f64, 0.0f64);
    for (x, y) in all {
        x0 = x0.min(*x);
        x1 = x1.max(*x);
        y0 = y0.min(*y);
        y1 = y1.max(*y);
    }
    if !(x0 < x1) {
        (x0, x1) = if x0.is_finite() { (x0 - 0.5, x0 + 0.5) } else { (0.0, 1.0) };
    }
    if !(y0 < y1) {
        (y0, y1) = (y0 - 0.5, y1 + 0.5);
    }
    let pad = 0.05 * (y1 - y0);
    let (y0, y1) = (y0 - pad, y1 + pad);
    let (pw, ph) = (WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM);
    let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| TOP + (y1 - y) / (y1 - y0) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
        LEFT + pw / 2.0,
        escape(title)
    );
    for t in ticks(x0, x1) {
        let x = sx(t);
        let _ = writeln!(
            s,
            r##"<line x1="{x:.2}" y1="{TOP:.2}" x2="{x:.2}" y2="{:.2}" stroke="#e0e0e0"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"##,
            TOP + ph,
            TOP + ph + 16.0,
            tick_label(t)
        );
    }
    for t in ticks(y0, y1) {
        let y = sy(t);
        let _ = writeln!(
            s,
            r##"<line x1="{LEFT:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#e0e0e0"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"##,
            LEFT + pw,
            LEFT - 6.0,
            y + 4.0,
            tick_label(t)
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
        HEIGHT - 18.0,
        escape(x_label)
    );
    let _ = writeln!(
        s,
        r#"<text x="18" y="{:.2}" text-anchor="middle" transform="rotate(-90 18 {:.2})">{}</text>"#,
        TOP + ph / 2.0,
        TOP + ph / 2.0,
        escape(y_label)
    );
    for (i, ser) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let pts: Vec<String> = thin(&ser.points)
            .iter()
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .map(|(x, y)| format!("{:.2},{:.2}", sx(*x), sy(*y)))
            .collect();
        if !pts.is_empty() {
            let _ = writeln!(
                s,
                r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
                pts.join(" ")
            );
        }
        let ly = TOP + 14.0 + 20.0 * i as f64;
        let lx = LEFT + pw + 14.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="3"/><text x="{:.2}" y="{:.2}">{}</text>"#,
            lx + 22.0,
            lx + 28.0,
            ly + 4.0,
            escape(&ser.name)
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Cumulative regret of one run.
pub fn regret_series(name: &str, result: &RunResult) -> Series {
    Series {
        name: name.into(),
        points: result
            .metrics
            .cumulative_regret
            .iter()
            .enumerate()
            .map(|(i, r)| ((i + 1) as f64, *r))
            .collect(),
    }
}

/// Cumulative violation of constraint `k`.
pub fn violation_series(name: &str, result: &RunResult, k: usize) -> Series {
    Series {
        name: name.into(),
        points: result
            .metrics
            .cumulative_violation
            .iter()
            .enumerate()
            .map(|(i, v)| ((i + 1) as f64, v[k]))
            .collect(),
    }
}

/// Largest cumulative violation over the constraints.
pub fn max_violation_series(name: &str, result: &RunResult) -> Series {
    Series {
        name: name.into(),
        points: result
            .metrics
            .cumulative_violation
            .iter()
            .enumerate()
            .map(|(i, v)| ((i + 1) as f64, v.max()))
            .collect(),
    }
}

pub fn regret_chart(series: &[Series]) -> String {
    line_chart("Cumulative regret", "round t", "regret", series)
}

pub fn violation_chart(series: &[Series]) -> String {
    line_chart("Cumulative constraint violation", "round t", "violation", series)
}

pub fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    std::fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

/// Writes `trace.csv`, `manifest.json` and, with `plots`, `regret.svg` and
/// `violation.svg` into `dir`. Returns the written paths.
pub fn emit_run(result: &RunResult, dir: &Path, plots: bool) -> Result<Vec<PathBuf>, CliError> {
    let mut files = vec![
        (dir.join("trace.csv"), trace_csv(result)),
        (dir.join("manifest.json"), manifest_json(&result.manifest)),
    ];
    if plots {
        let regret = regret_chart(&[regret_series(&result.manifest.algorithm, result)]);
        let viol: Vec<Series> = (0..result.manifest.m)
            .map(|k| violation_series(&format!("g_{}", k + 1), result, k))
            .collect();
        files.push((dir.join("regret.svg"), regret));
        files.push((dir.join("violation.svg"), violation_chart(&viol)));
    }
    for (p, c) in &files {
        write_file(p, c)?;
    }
    Ok(files.into_iter().map(|(p, _)| p).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_has_the_documented_column_count() {
        for (n, m) in [(1, 1), (2, 3), (5, 4)] {
            let h = trace_header(n, m);
            assert_eq!(h.split(',').count(), 1 + n + 1 + 1 + 3 * m + 1);
        }
        assert_eq!(
            trace_header(2, 1),
            "t,x_1,x_2,loss,regret_cum,g_1,viol_cum_1,Q_1,drift"
        );
    }

    #[test]
    fn empty_chart_still_renders() {
        let svg = line_chart("t", "x", "y", &[Series { name: "a".into(), points: vec![] }]);
        assert!(svg.starts_with("<svg") && svg.ends_with("</svg>\n"));
        assert!(!svg.contains("polyline"));
        assert!(!svg.contains("NaN"));
    }

    #[test]
    fn charts_are_deterministic_and_escaped() {
        let s = [Series {
            name: "a<b".into(),
            points: (0..5000).map(|i| (i as f64, (i as f64).sqrt())).collect(),
        }];
        let a = line_chart("T & U", "x", "y", &s);
        assert_eq!(a, line_chart("T & U", "x", "y", &s));
        assert!(a.contains("a&lt;b") && a.contains("T &amp; U"));
        // thinned to at most MAX_POINTS + 1 vertices
        let poly = a.lines().find(|l| l.starts_with("<polyline")).unwrap();
        assert!(poly.matches(',').count() <= MAX_POINTS + 1);
    }

    #[test]
    fn ticks_cover_the_range() {
        let t = ticks(0.0, 5000.0);
        assert_eq!(t, vec![0.0, 1000.0, 2000.0, 3000.0, 4000.0, 5000.0]);
        assert_eq!(tick_label(0.25), "0.25");
        assert_eq!(tick_label(1e-7), "1.0e-7");
    }
}
