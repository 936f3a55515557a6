//! Standalone SVG 1.1 figures: a dual-scale comparison of measured error and
//! bound, and a log-log plot with the fitted regression line.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use genbound::analysis::ols_loglog;

use crate::error::{HarnessError, Result};
use crate::experiment::ExperimentReport;
use crate::persist::write_text;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 80.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;

/// Everything a figure needs.
#[derive(Clone, Debug, PartialEq)]
pub struct FigureData {
    pub title: String,
    pub ns: Vec<f64>,
    pub errors: Vec<f64>,
    pub bounds: Vec<f64>,
    /// `(intercept, slope)` in log space.
    pub fit: Option<(f64, f64)>,
}

impl FigureData {
    pub fn from_report(report: &ExperimentReport) -> Self {
        Self {
            title: format!("{} mode", mode_name(report)),
            ns: report.per_n.iter().map(|s| s.n as f64).collect(),
            errors: report.per_n.iter().map(|s| s.mean_abs_gen_error).collect(),
            bounds: report.per_n.iter().map(|s| s.bound).collect(),
            fit: report.regression.as_ref().map(|r| (r.intercept.estimate, r.slope.estimate)),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.ns.len() < 2 {
            return Err(HarnessError::Usage("figures need at least two sample sizes".into()));
        }
        if self.errors.len() != self.ns.len() || self.bounds.len() != self.ns.len() {
            return Err(HarnessError::Usage("figure series differ in length".into()));
        }
        Ok(())
    }
}

fn mode_name(report: &ExperimentReport) -> &'static str {
    match report.config.mode {
        genbound::bounds::Mode::Frozen => "frozen",
        genbound::bounds::Mode::Joint => "joint",
    }
}

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x0) / (self.x1 - self.x0) * (WIDTH - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - BOTTOM - (y - self.y0) / (self.y1 - self.y0) * (HEIGHT - TOP - BOTTOM)
    }
}

fn header(title: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8" standalone="no"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(s, r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="24" text-anchor="middle" font-family="sans-serif" font-size="15">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
    let _ = writeln!(
        s,
        r#"<rect x="{LEFT}" y="{TOP}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        WIDTH - LEFT - RIGHT,
        HEIGHT - TOP - BOTTOM
    );
    s
}

fn escape(t: &str) -> String {
    t.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn polyline(s: &mut String, pts: &[(f64, f64)], color: &str, class: &str, dashed: bool) {
    let coords: Vec<String> = pts.iter().map(|(x, y)| format!("{x:.3},{y:.3}")).collect();
    let dash = if dashed { r#" stroke-dasharray="6,4""# } else { "" };
    let _ = writeln!(
        s,
        r#"<polyline class="{class}" points="{}" fill="none" stroke="{color}" stroke-width="2"{dash}/>"#,
        coords.join(" ")
    );
}

fn markers(s: &mut String, pts: &[(f64, f64)], color: &str, class: &str) {
    for (x, y) in pts {
        let _ = writeln!(s, r#"<circle class="{class}" cx="{x:.6}" cy="{y:.6}" r="3" fill="{color}"/>"#);
    }
}

fn label(s: &mut String, x: f64, y: f64, anchor: &str, text: &str) {
    let _ = writeln!(
        s,
        r#"<text x="{x:.2}" y="{y:.2}" text-anchor="{anchor}" font-family="sans-serif" font-size="11">{}</text>"#,
        escape(text)
    );
}

fn legend(s: &mut String, entries: &[(&str, &str)]) {
    for (k, (color, text)) in entries.iter().enumerate() {
        let y = TOP + 16.0 + 16.0 * k as f64;
        let x = WIDTH - RIGHT - 170.0;
        let _ = writeln!(s, r#"<line x1="{x}" y1="{y}" x2="{}" y2="{y}" stroke="{color}" stroke-width="2"/>"#, x + 20.0);
        label(s, x + 26.0, y + 4.0, "start", text);
    }
}

/// Both curves scaled so that their maxima sit at the same height.
pub fn dual_scale_svg(data: &FigureData) -> Result<String> {
    data.validate()?;
    let x0 = data.ns.iter().cloned().fold(f64::INFINITY, f64::min);
    let x1 = data.ns.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let emax = data.errors.iter().cloned().fold(0.0, f64::max);
    let bmax = data.bounds.iter().cloned().fold(0.0, f64::max);
    if !(emax > 0.0 && bmax > 0.0) {
        return Err(HarnessError::Usage("dual-scale figure needs positive values".into()));
    }
    let f = Frame { x0, x1, y0: 0.0, y1: 1.05 };
    let mut s = header(&format!("Mean |gen. error| vs. bound ({})", data.title));
    for k in 0..=4 {
        let frac = k as f64 / 4.0;
        let y = f.py(frac);
        let _ = writeln!(s, r##"<line x1="{LEFT}" y1="{y:.2}" x2="{}" y2="{y:.2}" stroke="#dddddd"/>"##, WIDTH - RIGHT);
        label(&mut s, LEFT - 6.0, y + 4.0, "end", &format!("{:.3e}", frac * emax));
        label(&mut s, WIDTH - RIGHT + 6.0, y + 4.0, "start", &format!("{:.3e}", frac * bmax));
        let xv = x0 + frac * (x1 - x0);
        label(&mut s, f.px(xv), HEIGHT - BOTTOM + 18.0, "middle", &format!("{xv:.0}"));
    }
    label(&mut s, WIDTH / 2.0, HEIGHT - 14.0, "middle", "n");
    let err: Vec<(f64, f64)> = data.ns.iter().zip(&data.errors).map(|(&n, &e)| (f.px(n), f.py(e / emax))).collect();
    let bnd: Vec<(f64, f64)> = data.ns.iter().zip(&data.bounds).map(|(&n, &b)| (f.px(n), f.py(b / bmax))).collect();
    polyline(&mut s, &err, "#1f77b4", "error", false);
    markers(&mut s, &err, "#1f77b4", "data");
    polyline(&mut s, &bnd, "#d62728", "bound", true);
    legend(&mut s, &[("#1f77b4", "mean |gen. error| (left)"), ("#d62728", "bound (right)")]);
    s.push_str("</svg>\n");
    Ok(s)
}

/// `log mean |ε_gen|` against `log n`, with the least-squares line.
pub fn loglog_svg(data: &FigureData) -> Result<String> {
    data.validate()?;
    if data.ns.iter().chain(&data.errors).any(|&v| !(v > 0.0)) {
        return Err(HarnessError::Usage("log-log figure needs positive values".into()));
    }
    let lx: Vec<f64> = data.ns.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = data.errors.iter().map(|v| v.ln()).collect();
    let fit = match data.fit {
        Some(f) => f,
        None if data.ns.len() >= 3 => {
            let pts: Vec<(f64, f64)> = data.ns.iter().cloned().zip(data.errors.iter().cloned()).collect();
            let r = ols_loglog(&pts)?;
            (r.intercept.estimate, r.slope.estimate)
        }
        None => {
            let slope = (ly[1] - ly[0]) / (lx[1] - lx[0]);
            (ly[0] - slope * lx[0], slope)
        }
    };
    let (x0, x1) = (lx.iter().cloned().fold(f64::INFINITY, f64::min), lx.iter().cloned().fold(f64::NEG_INFINITY, f64::max));
    let line = [(x0, fit.0 + fit.1 * x0), (x1, fit.0 + fit.1 * x1)];
    let ys = ly.iter().cloned().chain(line.iter().map(|p| p.1));
    let (mut y0, mut y1) = ys.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if y1 - y0 < 1e-9 {
        y0 -= 0.5;
        y1 += 0.5;
    }
    let pad = 0.05 * (y1 - y0);
    let f = Frame { x0, x1, y0: y0 - pad, y1: y1 + pad };
    let mut s = header(&format!("log-log regression ({}), slope {:.4}", data.title, fit.1));
    for k in 0..=4 {
        let frac = k as f64 / 4.0;
        let yv = f.y0 + frac * (f.y1 - f.y0);
        let y = f.py(yv);
        let _ = writeln!(s, r##"<line x1="{LEFT}" y1="{y:.2}" x2="{}" y2="{y:.2}" stroke="#dddddd"/>"##, WIDTH - RIGHT);
        label(&mut s, LEFT - 6.0, y + 4.0, "end", &format!("{yv:.3}"));
        let xv = x0 + frac * (x1 - x0);
        label(&mut s, f.px(xv), HEIGHT - BOTTOM + 18.0, "middle", &format!("{xv:.3}"));
    }
    label(&mut s, WIDTH / 2.0, HEIGHT - 14.0, "middle", "log n");
    label(&mut s, 18.0, TOP - 10.0, "start", "log mean |gen. error|");
    let pts: Vec<(f64, f64)> = lx.iter().zip(&ly).map(|(&x, &y)| (f.px(x), f.py(y))).collect();
    markers(&mut s, &pts, "#1f77b4", "data");
    let fitted: Vec<(f64, f64)> = line.iter().map(|&(x, y)| (f.px(x), f.py(y))).collect();
    polyline(&mut s, &fitted, "#d62728", "fit", false);
    legend(&mut s, &[("#1f77b4", "mean |gen. error|"), ("#d62728", "least-squares fit")]);
    s.push_str("</svg>\n");
    Ok(s)
}

/// Writes `<mode>-dual.svg` and `<mode>-loglog.svg` into `dir`.
pub fn emit_figures(report: &ExperimentReport, dir: &Path) -> Result<Vec<PathBuf>> {
    let data = FigureData::from_report(report);
    let mode = mode_name(report);
    let dual = dir.join(format!("{mode}-dual.svg"));
    let log = dir.join(format!("{mode}-loglog.svg"));
    write_text(&dual, &dual_scale_svg(&data)?)?;
    write_text(&log, &loglog_svg(&data)?)?;
    Ok(vec![dual, log])
}
