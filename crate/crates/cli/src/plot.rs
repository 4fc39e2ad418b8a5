//! Static log-log SVG panels for variance, spectrum and mixing CSVs.

use std::fmt::Write as _;
use std::path::Path;

use palmfbm::io;
use palmfbm::stats::{loglog_regress, RegressionSummary};

use crate::error::{CliError, CliResult};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 20.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 50.0;

#[derive(Clone, Debug)]
pub struct Panel {
    pub title: String,
    pub xlabel: &'static str,
    pub ylabel: &'static str,
    pub points: Vec<(f64, f64)>,
    /// Fitted `ln y = slope · ln x + intercept`.
    pub fit: Option<RegressionSummary>,
}

/// Reads a CSV produced by `variance`, `spectrum` or `mixing`.
pub fn load_panel(path: &Path) -> CliResult<Panel> {
    let doc = io::read_csv_file(path, true).map_err(|e| CliError::input(path, e))?;
    let name = path.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let header: Vec<&str> = doc.header.iter().map(String::as_str).collect();
    let file = || std::fs::File::open(path).map_err(|e| CliError::input(path, e.into()));
    match header.as_slice() {
        ["r", "mean_count", "var_count", "var_stderr"] => {
            let table = io::read_variance_table(file()?).map_err(|e| CliError::input(path, e))?;
            let fit = loglog_regress(&table)?;
            Ok(Panel {
                title: format!("number variance: {name}"),
                xlabel: "r",
                ylabel: "Var N(r)",
                points: table.radii.iter().copied().zip(table.var_count.iter().copied()).collect(),
                fit: Some(RegressionSummary::from(&fit)),
            })
        }
        ["t", "s", "method", "trunc"] => {
            let curve = io::read_spectrum(file()?).map_err(|e| CliError::input(path, e))?;
            Ok(Panel {
                title: format!("structure factor ({}): {name}", curve.method),
                xlabel: "t",
                ylabel: "s(t)",
                points: curve.t.iter().copied().zip(curve.s.iter().copied()).collect(),
                fit: None,
            })
        }
        ["t", "V"] => {
            let curve = io::read_mixing(file()?).map_err(|e| CliError::input(path, e))?;
            Ok(Panel {
                title: format!("|V(t)|, a = {}, b = {}: {name}", curve.a, curve.b),
                xlabel: "t",
                ylabel: "|V(t)|",
                points: curve.t.iter().copied().zip(curve.v.iter().map(|v| v.abs())).collect(),
                fit: None,
            })
        }
        _ => Err(CliError::Usage(format!(
            "{}: unrecognized columns {}",
            path.display(),
            doc.header.join(",")
        ))),
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
    top: f64,
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        MARGIN_L + (x.log10() - self.x0) / (self.x1 - self.x0) * (WIDTH - MARGIN_L - MARGIN_R)
    }

    fn py(&self, y: f64) -> f64 {
        self.top + HEIGHT - MARGIN_B - (y.log10() - self.y0) / (self.y1 - self.y0) * (HEIGHT - MARGIN_T - MARGIN_B)
    }
}

fn log_range(vals: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    let (lo, hi) = (lo.log10().floor(), hi.log10().ceil());
    if hi > lo {
        (lo, hi)
    } else {
        (lo, lo + 1.0)
    }
}

fn render_panel(svg: &mut String, panel: &Panel, index: usize) {
    let top = index as f64 * HEIGHT;
    let pts: Vec<(f64, f64)> = panel
        .points
        .iter()
        .copied()
        .filter(|&(x, y)| x > 0.0 && y > 0.0 && x.is_finite() && y.is_finite())
        .collect();
    let (x0, x1) = log_range(pts.iter().map(|p| p.0));
    let (y0, y1) = log_range(pts.iter().map(|p| p.1));
    let f = Frame { x0, x1, y0, y1, top };
    let (left, right) = (MARGIN_L, WIDTH - MARGIN_R);
    let (upper, lower) = (top + MARGIN_T, top + HEIGHT - MARGIN_B);

    let _ = writeln!(svg, r#"<g class="panel" data-index="{index}">"#);
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" font-size="14" text-anchor="middle">{}</text>"#,
        WIDTH / 2.0,
        top + 24.0,
        escape(&panel.title)
    );
    let _ = writeln!(
        svg,
        r#"<rect x="{left:.2}" y="{upper:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="black"/>"#,
        right - left,
        lower - upper
    );
    for d in x0 as i64..=x1 as i64 {
        let x = f.px(10f64.powi(d as i32));
        let _ = writeln!(
            svg,
            r##"<line x1="{x:.2}" y1="{lower:.2}" x2="{x:.2}" y2="{:.2}" stroke="black"/><text x="{x:.2}" y="{:.2}" font-size="11" text-anchor="middle">1e{d}</text>"##,
            lower + 5.0,
            lower + 18.0
        );
    }
    for d in y0 as i64..=y1 as i64 {
        let y = f.py(10f64.powi(d as i32));
        let _ = writeln!(
            svg,
            r##"<line x1="{:.2}" y1="{y:.2}" x2="{left:.2}" y2="{y:.2}" stroke="black"/><text x="{:.2}" y="{:.2}" font-size="11" text-anchor="end">1e{d}</text>"##,
            left - 5.0,
            left - 8.0,
            y + 4.0
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" font-size="12" text-anchor="middle">{}</text>"#,
        (left + right) / 2.0,
        top + HEIGHT - 12.0,
        escape(panel.xlabel)
    );
    let _ = writeln!(
        svg,
        r#"<text x="16" y="{:.2}" font-size="12" text-anchor="middle" transform="rotate(-90 16 {:.2})">{}</text>"#,
        (upper + lower) / 2.0,
        (upper + lower) / 2.0,
        escape(panel.ylabel)
    );

    let mut path = String::new();
    for (i, &(x, y)) in pts.iter().enumerate() {
        let _ = write!(path, "{}{:.2},{:.2}", if i == 0 { "M" } else { " L" }, f.px(x), f.py(y));
    }
    let _ = writeln!(svg, r##"<path class="data" d="{path}" fill="none" stroke="#1f77b4" stroke-width="1.5"/>"##);
    for &(x, y) in &pts {
        let _ = writeln!(svg, r##"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="#1f77b4"/>"##, f.px(x), f.py(y));
    }

    if let (Some(fit), Some(first), Some(last)) = (&panel.fit, pts.first(), pts.last()) {
        let line = |x: f64| (fit.slope * x.ln() + fit.intercept).exp();
        let _ = writeln!(
            svg,
            r##"<line class="fit" data-slope="{:?}" data-intercept="{:?}" x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#d62728" stroke-dasharray="6 4" stroke-width="1.5"/>"##,
            fit.slope,
            fit.intercept,
            f.px(first.0),
            f.py(line(first.0)),
            f.px(last.0),
            f.py(line(last.0))
        );
        let _ = writeln!(
            svg,
            r##"<text class="slope" x="{:.2}" y="{:.2}" font-size="12" fill="#d62728">slope = {:.4}, r² = {:.4}</text>"##,
            left + 10.0,
            upper + 18.0,
            fit.slope,
            fit.r_squared
        );
    }
    svg.push_str("</g>\n");
}

pub fn render(panels: &[Panel]) -> String {
    let total = HEIGHT * panels.len().max(1) as f64;
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{total}" viewBox="0 0 {WIDTH} {total}">"#
    );
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    for (i, p) in panels.iter().enumerate() {
        render_panel(&mut svg, p, i);
    }
    svg.push_str("</svg>\n");
    svg
}
