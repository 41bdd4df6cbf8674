//! Minimal standalone SVG line plots.

use std::fmt::Write;

use crate::error::{Error, Result};

const PANEL_W: f64 = 720.0;
const PANEL_H: f64 = 320.0;
const MARGIN_L: f64 = 80.0;
const MARGIN_R: f64 = 20.0;
const MARGIN_T: f64 = 36.0;
const MARGIN_B: f64 = 52.0;
const PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b",
];

/// A named polyline. Non-finite points break the line.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

impl Series {
    pub fn new(label: impl Into<String>, points: Vec<(f64, f64)>) -> Self {
        Self {
            label: label.into(),
            points,
        }
    }
}

/// Titles and axis labels; labels should carry units, e.g. `"L_g [mH]"`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AxesSpec {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    pub axes: AxesSpec,
    pub series: Vec<Series>,
}

/// Single-panel plot.
pub fn render_svg_plot(series: &[Series], axes: &AxesSpec) -> Result<String> {
    render_svg_panels(
        &[Panel {
            axes: axes.clone(),
            series: series.to_vec(),
        }],
        None,
    )
}

/// Panels stacked vertically in one document. `description` is embedded as
/// `<desc>` (used to carry the resolved run configuration).
pub fn render_svg_panels(panels: &[Panel], description: Option<&str>) -> Result<String> {
    if panels.is_empty()
        || panels
            .iter()
            .any(|p| p.series.is_empty() || p.series.iter().any(|s| s.points.len() < 2))
    {
        return Err(Error::EmptySeries);
    }
    let height = PANEL_H * panels.len() as f64;
    let mut out = String::new();
    let w = &mut out;
    let _ = writeln!(
        w,
        r#"<?xml version="1.0" encoding="UTF-8" standalone="yes"?>"#
    );
    let _ = writeln!(
        w,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{PANEL_W}" height="{height}" viewBox="0 0 {PANEL_W} {height}" font-family="sans-serif" font-size="12">"#
    );
    if let Some(d) = description {
        let _ = writeln!(w, "<desc>{}</desc>", escape(d));
    }
    let _ = writeln!(w, r#"<rect width="100%" height="100%" fill="white"/>"#);
    for (i, panel) in panels.iter().enumerate() {
        render_panel(w, panel, PANEL_H * i as f64);
    }
    let _ = writeln!(w, "</svg>");
    Ok(out)
}

fn render_panel(w: &mut String, panel: &Panel, y_off: f64) {
    let finite = panel
        .series
        .iter()
        .flat_map(|s| s.points.iter())
        .filter(|(x, y)| x.is_finite() && y.is_finite());
    let (mut x0, mut x1, mut y0, mut y1) = (
        f64::INFINITY,
        f64::NEG_INFINITY,
        f64::INFINITY,
        f64::NEG_INFINITY,
    );
    for &(x, y) in finite {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    let (x0, x1) = widen(x0, x1);
    let (y0, y1) = widen(y0, y1);
    let (y0, y1) = (y0 - 0.05 * (y1 - y0), y1 + 0.05 * (y1 - y0));

    let left = MARGIN_L;
    let right = PANEL_W - MARGIN_R;
    let top = y_off + MARGIN_T;
    let bottom = y_off + PANEL_H - MARGIN_B;
    let sx = |x: f64| left + (x - x0) / (x1 - x0) * (right - left);
    let sy = |y: f64| bottom - (y - y0) / (y1 - y0) * (bottom - top);

    let _ = writeln!(w, "<g>");
    let _ = writeln!(
        w,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="14">{}</text>"#,
        (left + right) / 2.0,
        y_off + 20.0,
        escape(&panel.axes.title)
    );
    let _ = writeln!(
        w,
        r#"<rect x="{left:.1}" y="{top:.1}" width="{:.1}" height="{:.1}" fill="none" stroke="black"/>"#,
        right - left,
        bottom - top
    );
    for t in ticks(x0, x1) {
        let x = sx(t);
        let _ = writeln!(
            w,
            r##"<line x1="{x:.1}" y1="{top:.1}" x2="{x:.1}" y2="{bottom:.1}" stroke="#ddd"/><text x="{x:.1}" y="{:.1}" text-anchor="middle">{}</text>"##,
            bottom + 16.0,
            fmt_tick(t)
        );
    }
    for t in ticks(y0, y1) {
        let y = sy(t);
        let _ = writeln!(
            w,
            r##"<line x1="{left:.1}" y1="{y:.1}" x2="{right:.1}" y2="{y:.1}" stroke="#ddd"/><text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"##,
            left - 6.0,
            y + 4.0,
            fmt_tick(t)
        );
    }
    let _ = writeln!(
        w,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
        (left + right) / 2.0,
        bottom + 38.0,
        escape(&panel.axes.x_label)
    );
    let (lx, ly) = (18.0, (top + bottom) / 2.0);
    let _ = writeln!(
        w,
        r#"<text x="{lx:.1}" y="{ly:.1}" text-anchor="middle" transform="rotate(-90 {lx:.1} {ly:.1})">{}</text>"#,
        escape(&panel.axes.y_label)
    );

    for (i, s) in panel.series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        for run in s
            .points
            .split(|(x, y)| !x.is_finite() || !y.is_finite())
            .filter(|r| !r.is_empty())
        {
            let pts: Vec<String> = run
                .iter()
                .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
                .collect();
            let _ = writeln!(
                w,
                r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
                pts.join(" ")
            );
        }
        let ly = top + 14.0 + 16.0 * i as f64;
        let _ = writeln!(
            w,
            r#"<line x1="{:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{color}" stroke-width="2"/><text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#,
            right - 30.0,
            right - 10.0,
            right - 36.0,
            ly + 4.0,
            escape(&s.label)
        );
    }
    let _ = writeln!(w, "</g>");
}

fn widen(lo: f64, hi: f64) -> (f64, f64) {
    if hi > lo {
        (lo, hi)
    } else {
        let pad = if lo == 0.0 { 1.0 } else { 0.1 * lo.abs() };
        (lo - pad, hi + pad)
    }
}

/// Roughly five round-numbered ticks inside `[lo, hi]`.
fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let raw = (hi - lo) / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .into_iter()
        .map(|m| m * mag)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|k| k as f64 * step).collect()
}

fn fmt_tick(v: f64) -> String {
    let a = v.abs();
    if a == 0.0 {
        "0".into()
    } else if (1e-3..1e4).contains(&a) {
        let s = format!("{v:.4}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        format!("{v:.2e}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}
