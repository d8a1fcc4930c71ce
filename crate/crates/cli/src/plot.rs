//! Minimal static SVG line plots reproducing the four figure panels per
//! case: states, uncertainty, adaptive control effort, and parameters.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use gdrem_control::trace::Trace;

use crate::{CliError, Result};

const WIDTH: f64 = 860.0;
const HEIGHT: f64 = 480.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 20.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 50.0;
/// Per-series point budget; long traces are subsampled for plotting only.
const MAX_POINTS: usize = 2000;

const PALETTE: [&str; 10] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf",
];

/// One named line on a plot.
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

fn nice_ticks(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if !(hi > lo) {
        return vec![lo];
    }
    let span = hi - lo;
    let raw = span / count as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let norm = raw / mag;
    let step = mag * if norm < 1.5 {
        1.0
    } else if norm < 3.0 {
        2.0
    } else if norm < 7.0 {
        5.0
    } else {
        10.0
    };
    let first = (lo / step).ceil() * step;
    let mut ticks = Vec::new();
    let mut t = first;
    while t <= hi + 1e-9 * span {
        ticks.push(t);
        t += step;
    }
    ticks
}

fn fmt_tick(v: f64) -> String {
    if v == 0.0 {
        "0".to_string()
    } else if v.abs() >= 1e4 || v.abs() < 1e-3 {
        format!("{v:.2e}")
    } else {
        let s = format!("{v:.4}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

/// Render a line plot to an SVG string.
pub fn render_line_plot(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    let mut x_lo = f64::INFINITY;
    let mut x_hi = f64::NEG_INFINITY;
    let mut y_lo = f64::INFINITY;
    let mut y_hi = f64::NEG_INFINITY;
    for s in series {
        for &(x, y) in &s.points {
            x_lo = x_lo.min(x);
            x_hi = x_hi.max(x);
            y_lo = y_lo.min(y);
            y_hi = y_hi.max(y);
        }
    }
    if !x_lo.is_finite() {
        x_lo = 0.0;
        x_hi = 1.0;
        y_lo = 0.0;
        y_hi = 1.0;
    }
    if y_hi - y_lo < 1e-12 {
        // flat line: open up a symmetric band so the line sits mid-plot
        let pad = if y_lo.abs() > 1e-12 { y_lo.abs() * 0.1 } else { 1.0 };
        y_lo -= pad;
        y_hi += pad;
    }
    let plot_w = WIDTH - MARGIN_L - MARGIN_R;
    let plot_h = HEIGHT - MARGIN_T - MARGIN_B;
    let sx = |x: f64| MARGIN_L + (x - x_lo) / (x_hi - x_lo) * plot_w;
    let sy = |y: f64| MARGIN_T + (1.0 - (y - y_lo) / (y_hi - y_lo)) * plot_h;

    let mut svg = String::new();
    let _ = write!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = write!(svg, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = write!(
        svg,
        r#"<text x="{}" y="24" font-family="sans-serif" font-size="16" text-anchor="middle">{}</text>"#,
        WIDTH / 2.0,
        title
    );

    for t in nice_ticks(x_lo, x_hi, 8) {
        let x = sx(t);
        let _ = write!(
            svg,
            r##"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="#dddddd"/>"##,
            MARGIN_T,
            MARGIN_T + plot_h
        );
        let _ = write!(
            svg,
            r#"<text x="{x:.2}" y="{:.2}" font-family="sans-serif" font-size="11" text-anchor="middle">{}</text>"#,
            MARGIN_T + plot_h + 18.0,
            fmt_tick(t)
        );
    }
    for t in nice_ticks(y_lo, y_hi, 6) {
        let y = sy(t);
        let _ = write!(
            svg,
            r##"<line x1="{:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#dddddd"/>"##,
            MARGIN_L,
            MARGIN_L + plot_w
        );
        let _ = write!(
            svg,
            r#"<text x="{:.2}" y="{y:.2}" font-family="sans-serif" font-size="11" text-anchor="end" dominant-baseline="middle">{}</text>"#,
            MARGIN_L - 6.0,
            fmt_tick(t)
        );
    }
    let _ = write!(
        svg,
        r#"<rect x="{MARGIN_L}" y="{MARGIN_T}" width="{plot_w}" height="{plot_h}" fill="none" stroke="black"/>"#
    );
    let _ = write!(
        svg,
        r#"<text x="{}" y="{}" font-family="sans-serif" font-size="13" text-anchor="middle">{}</text>"#,
        MARGIN_L + plot_w / 2.0,
        HEIGHT - 12.0,
        x_label
    );
    let _ = write!(
        svg,
        r#"<text x="16" y="{}" font-family="sans-serif" font-size="13" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
        MARGIN_T + plot_h / 2.0,
        MARGIN_T + plot_h / 2.0,
        y_label
    );

    for (idx, s) in series.iter().enumerate() {
        let color = PALETTE[idx % PALETTE.len()];
        let stride = (s.points.len() / MAX_POINTS).max(1);
        let mut path = String::new();
        for (k, &(x, y)) in s.points.iter().step_by(stride).enumerate() {
            let _ = write!(path, "{}{:.2},{:.2} ", if k == 0 { "M" } else { "L" }, sx(x), sy(y));
        }
        let _ = write!(
            svg,
            r#"<path d="{}" fill="none" stroke="{color}" stroke-width="1.4"/>"#,
            path.trim_end()
        );
        let ly = MARGIN_T + 14.0 + 16.0 * idx as f64;
        let _ = write!(
            svg,
            r#"<line x1="{:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"/>"#,
            MARGIN_L + plot_w - 150.0,
            MARGIN_L + plot_w - 126.0
        );
        let _ = write!(
            svg,
            r#"<text x="{:.2}" y="{ly:.2}" font-family="sans-serif" font-size="12" dominant-baseline="middle">{}</text>"#,
            MARGIN_L + plot_w - 120.0,
            s.label
        );
    }
    svg.push_str("</svg>\n");
    svg
}

fn write_svg(path: &Path, content: &str) -> Result<()> {
    let mut f = std::fs::File::create(path).map_err(|e| CliError::io(path, e))?;
    f.write_all(content.as_bytes()).map_err(|e| CliError::io(path, e))
}

/// Emit the four figure panels for one trace; returns the written paths.
pub fn emit_plots(trace: &Trace, out_dir: &Path, label: &str) -> Result<Vec<PathBuf>> {
    if trace.samples.is_empty() {
        return Err(CliError::TraceFormat("cannot plot an empty trace".into()));
    }
    let times: Vec<f64> = trace.samples.iter().map(|s| s.t).collect();
    let mut written = Vec::new();

    let states = vec![
        Series {
            label: "x1".into(),
            points: times.iter().zip(trace.samples.iter()).map(|(&t, s)| (t, s.x[0])).collect(),
        },
        Series {
            label: "x1_ref".into(),
            points: times
                .iter()
                .zip(trace.samples.iter())
                .map(|(&t, s)| (t, s.x_ref[0]))
                .collect(),
        },
    ];
    let p1 = out_dir.join(format!("{label}_states.svg"));
    write_svg(&p1, &render_line_plot("Plant and reference states", "t [s]", "x1", &states))?;
    written.push(p1);

    // matched uncertainty theta(t)' Psi(x, t); plotted per input channel
    let m = trace.m;
    let unc: Vec<Series> = (0..m)
        .map(|j| Series {
            label: if m == 1 { "theta'Psi".into() } else { format!("theta'Psi {}", j + 1) },
            points: times
                .iter()
                .zip(trace.samples.iter())
                .map(|(&t, s)| (t, (s.theta_true.transpose() * &s.psi)[(j, 0)]))
                .collect(),
        })
        .collect();
    let p2 = out_dir.join(format!("{label}_uncertainty.svg"));
    write_svg(&p2, &render_line_plot("Matched uncertainty", "t [s]", "theta'Psi", &unc))?;
    written.push(p2);

    let ctl: Vec<Series> = (0..m)
        .map(|j| Series {
            label: if m == 1 { "u_ad + u_nd".into() } else { format!("u_ad + u_nd {}", j + 1) },
            points: times
                .iter()
                .zip(trace.samples.iter())
                .map(|(&t, s)| (t, s.u_ad[j] + s.u_nd[j]))
                .collect(),
        })
        .collect();
    let p3 = out_dir.join(format!("{label}_control.svg"));
    write_svg(&p3, &render_line_plot("Adaptive control effort", "t [s]", "u_ad + u_nd", &ctl))?;
    written.push(p3);

    let mut params = Vec::new();
    for i in 0..trace.p {
        for j in 0..trace.m {
            params.push(Series {
                label: format!("Theta_{}_{}", i + 1, j + 1),
                points: times
                    .iter()
                    .zip(trace.samples.iter())
                    .map(|(&t, s)| (t, s.theta_cap[(i, j)]))
                    .collect(),
            });
        }
    }
    for i in 0..trace.p {
        for j in 0..trace.m {
            params.push(Series {
                label: format!("thetahat_{}_{}", i + 1, j + 1),
                points: times
                    .iter()
                    .zip(trace.samples.iter())
                    .map(|(&t, s)| (t, s.theta_hat[(i, j)]))
                    .collect(),
            });
        }
    }
    let p4 = out_dir.join(format!("{label}_params.svg"));
    write_svg(
        &p4,
        &render_line_plot("Indistinguishable parameters and estimates", "t [s]", "value", &params),
    )?;
    written.push(p4);

    Ok(written)
}
