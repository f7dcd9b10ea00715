//! Deterministic SVG line plots of mean cumulative regret with a ±1 standard
//! deviation band.

use std::fmt::Write;

use crate::csvio::AggregateRecord;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 440.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 170.0;
const TOP: f64 = 20.0;
const BOTTOM: f64 = 50.0;
const MAX_POINTS: usize = 1000;
const COLORS: &[&str] = &[
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
];

/// One curve of the plot.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub rows: Vec<AggregateRecord>,
}

/// Legend label for an aggregate file: its stem without the `aggregate_`
/// prefix.
pub fn label_from_path(path: &std::path::Path) -> String {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    stem.strip_prefix("aggregate_").map(str::to_string).unwrap_or(stem)
}

/// At most `MAX_POINTS` evenly strided rows, always keeping the last.
fn thin(rows: &[AggregateRecord]) -> Vec<&AggregateRecord> {
    let stride = rows.len().div_ceil(MAX_POINTS).max(1);
    let mut out: Vec<&AggregateRecord> = rows.iter().step_by(stride).collect();
    if let Some(last) = rows.last() {
        if !std::ptr::eq(*out.last().unwrap(), last) {
            out.push(last);
        }
    }
    out
}

fn nice_step(span: f64) -> f64 {
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let r = raw / mag;
    let m = if r <= 1.0 {
        1.0
    } else if r <= 2.0 {
        2.0
    } else if r <= 5.0 {
        5.0
    } else {
        10.0
    };
    m * mag
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Renders the series; every series must be nonempty.
pub fn render_svg(series: &[Series]) -> String {
    let finite = |v: f64| if v.is_finite() { v } else { 0.0 };
    let x_max = series
        .iter()
        .flat_map(|s| s.rows.iter().map(|r| r.t as f64))
        .fold(1.0, f64::max);
    let y_max = series
        .iter()
        .flat_map(|s| s.rows.iter().map(|r| finite(r.mean_cum_regret + r.std_cum_regret)))
        .fold(0.0, f64::max);
    let y_min = series
        .iter()
        .flat_map(|s| s.rows.iter().map(|r| finite(r.mean_cum_regret - r.std_cum_regret)))
        .fold(0.0, f64::min);
    let y_span = if y_max > y_min { y_max - y_min } else { 1.0 };
    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let sx = |t: f64| LEFT + t / x_max * pw;
    let sy = |v: f64| TOP + ph - (finite(v) - y_min) / y_span * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    let step = nice_step(x_max);
    let mut t = 0.0;
    while t <= x_max + 1e-9 {
        let x = sx(t);
        let _ = writeln!(
            s,
            r#"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="black"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">{t}</text>"#,
            TOP + ph,
            TOP + ph + 5.0,
            TOP + ph + 18.0
        );
        t += step;
    }
    let step = nice_step(y_span);
    let mut v = (y_min / step).ceil() * step;
    while v <= y_max + 1e-9 * y_span {
        let y = sy(v);
        let _ = writeln!(
            s,
            r#"<line x1="{:.2}" y1="{y:.2}" x2="{LEFT}" y2="{y:.2}" stroke="black"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            LEFT - 5.0,
            LEFT - 8.0,
            y + 4.0,
            v as f32
        );
        v += step;
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">round t</text>"#,
        LEFT + pw / 2.0,
        HEIGHT - 10.0
    );
    let _ = writeln!(
        s,
        r#"<text x="15" y="{:.2}" text-anchor="middle" transform="rotate(-90 15 {:.2})">cumulative regret</text>"#,
        TOP + ph / 2.0,
        TOP + ph / 2.0
    );

    for (k, series) in series.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let pts = thin(&series.rows);
        let mut band = String::new();
        for r in &pts {
            let _ = write!(band, "{:.2},{:.2} ", sx(r.t as f64), sy(r.mean_cum_regret + r.std_cum_regret));
        }
        for r in pts.iter().rev() {
            let _ = write!(band, "{:.2},{:.2} ", sx(r.t as f64), sy(r.mean_cum_regret - r.std_cum_regret));
        }
        let _ = writeln!(
            s,
            r#"<polygon points="{}" fill="{color}" fill-opacity="0.2" stroke="none"/>"#,
            band.trim_end()
        );
        let line: Vec<String> = pts
            .iter()
            .map(|r| format!("{:.2},{:.2}", sx(r.t as f64), sy(r.mean_cum_regret)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
            line.join(" ")
        );
        let ly = TOP + 10.0 + 20.0 * k as f64;
        let lx = WIDTH - RIGHT + 15.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="3"/><text x="{:.2}" y="{:.2}">{}</text>"#,
            lx + 20.0,
            lx + 25.0,
            ly + 4.0,
            escape(&series.label)
        );
    }
    s.push_str("</svg>\n");
    s
}
