//! Minimal SVG line charts with shaded confidence bands.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{CmdpError, Result};
use crate::harness::{read_aggregate, AggregateRow, ALGO_PD_POWERS, ALGO_RANDOM};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN_LEFT: f64 = 72.0;
const MARGIN_RIGHT: f64 = 24.0;
const MARGIN_TOP: f64 = 36.0;
const MARGIN_BOTTOM: f64 = 56.0;

pub struct Curve<'a> {
    pub label: &'a str,
    pub color: &'a str,
    pub x: Vec<f64>,
    pub mean: Vec<f64>,
    pub half_width: Vec<f64>,
}

/// Rounds a raw tick step to 1, 2 or 5 times a power of ten.
fn nice_step(span: f64, target: usize) -> f64 {
    let raw = span / target as f64;
    if !(raw > 0.0) {
        return 1.0;
    }
    let mag = 10f64.powf(raw.log10().floor());
    let unit = raw / mag;
    let nice = if unit <= 1.0 {
        1.0
    } else if unit <= 2.0 {
        2.0
    } else if unit <= 5.0 {
        5.0
    } else {
        10.0
    };
    nice * mag
}

fn fmt_tick(v: f64) -> String {
    if v.abs() >= 1e4 || (v != 0.0 && v.abs() < 1e-2) {
        format!("{v:.1e}")
    } else if v.fract() == 0.0 {
        format!("{v:.0}")
    } else {
        format!("{v}")
    }
}

/// Renders one panel as a standalone SVG document.
pub fn render_svg(title: &str, x_label: &str, y_label: &str, curves: &[Curve<'_>]) -> Result<String> {
    if curves.is_empty() || curves.iter().any(|c| c.x.is_empty()) {
        return Err(CmdpError::Config("nothing to plot".into()));
    }
    let (mut x_min, mut x_max) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut y_min, mut y_max) = (0.0f64, f64::NEG_INFINITY);
    for c in curves {
        if c.mean.len() != c.x.len() || c.half_width.len() != c.x.len() {
            return Err(CmdpError::Config(format!("curve `{}` has mismatched columns", c.label)));
        }
        for i in 0..c.x.len() {
            x_min = x_min.min(c.x[i]);
            x_max = x_max.max(c.x[i]);
            y_min = y_min.min(c.mean[i] - c.half_width[i]);
            y_max = y_max.max(c.mean[i] + c.half_width[i]);
        }
    }
    if x_max <= x_min {
        x_max = x_min + 1.0;
    }
    if y_max <= y_min {
        y_max = y_min + 1.0;
    }
    let y_step = nice_step(y_max - y_min, 6);
    y_min = (y_min / y_step).floor() * y_step;
    y_max = (y_max / y_step).ceil() * y_step;
    let x_step = nice_step(x_max - x_min, 6);

    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let px = |x: f64| MARGIN_LEFT + (x - x_min) / (x_max - x_min) * plot_w;
    let py = |y: f64| MARGIN_TOP + (1.0 - (y - y_min) / (y_max - y_min)) * plot_h;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="20" text-anchor="middle" font-size="14">{title}</text>"#,
        MARGIN_LEFT + plot_w / 2.0
    );

    // grid and ticks
    let mut y = y_min;
    while y <= y_max + 1e-9 * y_step {
        let yy = py(y);
        let _ = writeln!(
            svg,
            r##"<line x1="{MARGIN_LEFT}" y1="{yy:.2}" x2="{:.2}" y2="{yy:.2}" stroke="#e0e0e0"/>"##,
            MARGIN_LEFT + plot_w
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            MARGIN_LEFT - 6.0,
            yy + 4.0,
            fmt_tick(y)
        );
        y += y_step;
    }
    let mut x = (x_min / x_step).ceil() * x_step;
    while x <= x_max + 1e-9 * x_step {
        let xx = px(x);
        let _ = writeln!(
            svg,
            r#"<text x="{xx:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            MARGIN_TOP + plot_h + 18.0,
            fmt_tick(x)
        );
        x += x_step;
    }
    let _ = writeln!(
        svg,
        r#"<rect x="{MARGIN_LEFT}" y="{MARGIN_TOP}" width="{plot_w:.2}" height="{plot_h:.2}" fill="none" stroke="black"/>"#
    );
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{x_label}</text>"#,
        MARGIN_LEFT + plot_w / 2.0,
        HEIGHT - 14.0
    );
    let _ = writeln!(
        svg,
        r#"<text transform="translate(18,{:.2}) rotate(-90)" text-anchor="middle">{y_label}</text>"#,
        MARGIN_TOP + plot_h / 2.0
    );

    for c in curves {
        let mut band = String::new();
        for i in 0..c.x.len() {
            let _ = write!(band, "{:.2},{:.2} ", px(c.x[i]), py(c.mean[i] + c.half_width[i]));
        }
        for i in (0..c.x.len()).rev() {
            let _ = write!(band, "{:.2},{:.2} ", px(c.x[i]), py(c.mean[i] - c.half_width[i]));
        }
        let _ = writeln!(
            svg,
            r#"<polygon points="{}" fill="{}" fill-opacity="0.2" stroke="none"/>"#,
            band.trim_end(),
            c.color
        );
        let mut line = String::new();
        for i in 0..c.x.len() {
            let _ = write!(line, "{:.2},{:.2} ", px(c.x[i]), py(c.mean[i]));
        }
        let _ = writeln!(
            svg,
            r#"<polyline points="{}" fill="none" stroke="{}" stroke-width="1.8"/>"#,
            line.trim_end(),
            c.color
        );
    }

    for (i, c) in curves.iter().enumerate() {
        let ly = MARGIN_TOP + 16.0 + 18.0 * i as f64;
        let lx = MARGIN_LEFT + 14.0;
        let _ = writeln!(
            svg,
            r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{}" stroke-width="2.5"/>"#,
            lx + 22.0,
            c.color
        );
        let _ = writeln!(svg, r#"<text x="{:.2}" y="{:.2}">{}</text>"#, lx + 28.0, ly + 4.0, c.label);
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

fn curves<'a>(
    pd: &[AggregateRow],
    rand: &[AggregateRow],
    pick: fn(&AggregateRow) -> (f64, f64),
) -> Vec<Curve<'a>> {
    let build = |rows: &[AggregateRow], label: &'a str, color: &'a str| Curve {
        label,
        color,
        x: rows.iter().map(|r| r.k as f64).collect(),
        mean: rows.iter().map(|r| pick(r).0).collect(),
        half_width: rows.iter().map(|r| pick(r).1).collect(),
    };
    vec![build(pd, "PD-POWERS", "#1f77b4"), build(rand, "random policy", "#d62728")]
}

/// Reads both aggregates from `in_dir` and writes `regret.svg` and
/// `violation.svg` into `out_dir`. Nothing is written on error.
pub fn emit_plot(in_dir: &Path, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let pd = read_aggregate(&in_dir.join(format!("aggregate_{ALGO_PD_POWERS}.csv")))?;
    let rand = read_aggregate(&in_dir.join(format!("aggregate_{ALGO_RANDOM}.csv")))?;
    if pd.is_empty() || rand.is_empty() {
        return Err(CmdpError::Config("aggregate file has no rows".into()));
    }
    if pd.len() != rand.len() {
        return Err(CmdpError::Config(format!(
            "aggregates have {} and {} rows",
            pd.len(),
            rand.len()
        )));
    }
    let regret = render_svg(
        "Cumulative regret",
        "episode k",
        "Regret(k)",
        &curves(&pd, &rand, |r| (r.regret_mean, r.regret_hw)),
    )?;
    let violation = render_svg(
        "Cumulative constraint violation",
        "episode k",
        "Violation(k)",
        &curves(&pd, &rand, |r| (r.violation_mean, r.violation_hw)),
    )?;
    std::fs::create_dir_all(out_dir).map_err(|source| CmdpError::Io {
        path: out_dir.display().to_string(),
        source,
    })?;
    let mut written = Vec::new();
    for (name, body) in [("regret.svg", regret), ("violation.svg", violation)] {
        let path = out_dir.join(name);
        std::fs::write(&path, body).map_err(|source| CmdpError::Io {
            path: path.display().to_string(),
            source,
        })?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nice_steps() {
        assert_eq!(nice_step(10.0, 5), 2.0);
        assert_eq!(nice_step(3970.0, 6), 1000.0);
        assert_eq!(nice_step(0.3, 6), 0.05);
    }

    #[test]
    fn degenerate_band_renders() {
        let c = Curve {
            label: "one",
            color: "black",
            x: vec![1.0, 2.0, 3.0],
            mean: vec![0.0, 1.0, 2.0],
            half_width: vec![0.0; 3],
        };
        let svg = render_svg("t", "x", "y", &[c]).unwrap();
        assert!(svg.starts_with("<svg"));
        assert!(svg.contains("<polygon"));
        assert!(svg.contains("<polyline"));
    }

    #[test]
    fn empty_curve_is_rejected() {
        let c = Curve {
            label: "none",
            color: "black",
            x: vec![],
            mean: vec![],
            half_width: vec![],
        };
        assert!(render_svg("t", "x", "y", &[c]).is_err());
    }
}
