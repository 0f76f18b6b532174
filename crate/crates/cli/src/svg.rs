//! Minimal SVG figures drawn from emitted CSV files.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use anyhow::{anyhow, bail, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    Line,
    Histogram,
    Scatter,
}

/// A plot of column `y` against column `x` of one CSV, optionally split
/// into one series per value of `group` and restricted to rows where
/// `filter.0 == filter.1`.
#[derive(Debug, Clone, PartialEq)]
pub struct FigureSpec {
    pub kind: PlotKind,
    pub title: String,
    pub x: String,
    pub y: String,
    pub group: Option<String>,
    pub filter: Option<(String, String)>,
    pub x_label: String,
    pub y_label: String,
    pub log_x: bool,
    pub log_y: bool,
}

impl FigureSpec {
    pub fn new(kind: PlotKind, title: &str, x: &str, y: &str) -> Self {
        Self {
            kind,
            title: title.into(),
            x: x.into(),
            y: y.into(),
            group: None,
            filter: None,
            x_label: x.into(),
            y_label: y.into(),
            log_x: false,
            log_y: false,
        }
    }

    pub fn group(mut self, col: &str) -> Self {
        self.group = Some(col.into());
        self
    }

    pub fn filter(mut self, col: &str, value: &str) -> Self {
        self.filter = Some((col.into(), value.into()));
        self
    }

    pub fn log(mut self, x: bool, y: bool) -> Self {
        self.log_x = x;
        self.log_y = y;
        self
    }
}

type Series = BTreeMap<String, Vec<(f64, f64)>>;

fn resolve(spec: &FigureSpec, csv: &str) -> Result<Series> {
    let mut lines = csv
        .lines()
        .filter(|l| !l.starts_with('#') && !l.trim().is_empty());
    let header: Vec<&str> = lines
        .next()
        .ok_or_else(|| anyhow!("figure '{}': empty CSV", spec.title))?
        .split(',')
        .collect();
    let col = |name: &str| {
        header
            .iter()
            .position(|h| *h == name)
            .ok_or_else(|| anyhow!("figure '{}' references unknown column '{name}'", spec.title))
    };
    let (xi, yi) = (col(&spec.x)?, col(&spec.y)?);
    let gi = spec.group.as_deref().map(col).transpose()?;
    let fi = match &spec.filter {
        Some((c, v)) => Some((col(c)?, v.as_str())),
        None => None,
    };
    let mut series = Series::new();
    for line in lines {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != header.len() {
            bail!("figure '{}': ragged CSV row `{line}`", spec.title);
        }
        if let Some((c, v)) = fi {
            if f[c] != v {
                continue;
            }
        }
        let num = |s: &str| -> Result<f64> {
            match s {
                "inf" => Ok(f64::INFINITY),
                _ => s
                    .parse()
                    .map_err(|_| anyhow!("figure '{}': `{s}` is not a number", spec.title)),
            }
        };
        let key = gi.map(|g| f[g].to_string()).unwrap_or_default();
        series
            .entry(key)
            .or_default()
            .push((num(f[xi])?, num(f[yi])?));
    }
    let points = series.values().flatten();
    if points.clone().next().is_none() {
        bail!("figure '{}': no rows to plot", spec.title);
    }
    for &(x, y) in points {
        if (spec.log_x && !(x > 0.0)) || (spec.log_y && !(y > 0.0)) {
            bail!(
                "figure '{}': log axis needs positive data, got ({x}, {y})",
                spec.title
            );
        }
    }
    Ok(series)
}

const W: f64 = 640.0;
const H: f64 = 400.0;
const LEFT: f64 = 72.0;
const RIGHT: f64 = 24.0;
const TOP: f64 = 36.0;
const BOTTOM: f64 = 52.0;
const COLORS: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf",
];

struct Axis {
    lo: f64,
    hi: f64,
    log: bool,
}

impl Axis {
    fn new(values: impl Iterator<Item = f64>, log: bool, from_zero: bool) -> Self {
        let t = |v: f64| if log { v.log10() } else { v };
        let (mut lo, mut hi) = values
            .filter(|v| v.is_finite())
            .map(t)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| {
                (a.min(v), b.max(v))
            });
        if !lo.is_finite() {
            (lo, hi) = (0.0, 1.0);
        }
        if from_zero && !log {
            lo = lo.min(0.0);
        }
        if hi - lo < 1e-300 {
            let pad = if lo == 0.0 { 1.0 } else { lo.abs() * 0.1 };
            (lo, hi) = (lo - pad, hi + pad);
        }
        Self { lo, hi, log }
    }

    fn frac(&self, v: f64) -> f64 {
        let v = if self.log { v.log10() } else { v };
        (v - self.lo) / (self.hi - self.lo)
    }

    fn ticks(&self) -> Vec<(f64, String)> {
        if self.log {
            let (a, b) = (self.lo.floor() as i32, self.hi.ceil() as i32);
            let step = ((b - a) / 6).max(1);
            (a..=b)
                .step_by(step as usize)
                .map(|e| 10f64.powi(e))
                .filter(|&v| (-1e-9..=1.0 + 1e-9).contains(&self.frac(v)))
                .map(|v| (v, format!("{v:e}")))
                .collect()
        } else {
            (0..=4)
                .map(|i| {
                    let v = self.lo + (self.hi - self.lo) * i as f64 / 4.0;
                    (v, fmt_tick(v))
                })
                .collect()
        }
    }
}

fn fmt_tick(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && !(1e-3..1e4).contains(&a) {
        format!("{v:.2e}")
    } else {
        let s = format!("{v:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

/// Renders `spec` from `csv`. A timestamp, when given, is embedded as a comment.
pub fn render(spec: &FigureSpec, csv: &str, timestamp: Option<&str>) -> Result<String> {
    let series = resolve(spec, csv)?;
    let all = || series.values().flatten();
    let xa = Axis::new(all().map(|p| p.0), spec.log_x, false);
    let ya = Axis::new(
        all().map(|p| p.1),
        spec.log_y,
        spec.kind == PlotKind::Histogram,
    );
    let (pw, ph) = (W - LEFT - RIGHT, H - TOP - BOTTOM);
    let px = |v: f64| LEFT + xa.frac(v).clamp(-0.05, 1.05) * pw;
    let py = |v: f64| TOP + (1.0 - ya.frac(v).clamp(-0.05, 1.05)) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="11">"#
    );
    if let Some(t) = timestamp {
        let _ = writeln!(s, "<!-- generated {} -->", esc(t));
    }
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
        W / 2.0,
        esc(&spec.title)
    );
    let _ = writeln!(
        s,
        r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    for (v, label) in xa.ticks() {
        let x = px(v);
        let _ = writeln!(
            s,
            r#"<line x1="{x:.2}" y1="{}" x2="{x:.2}" y2="{}" stroke="black"/>"#,
            TOP + ph,
            TOP + ph + 4.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{x:.2}" y="{}" text-anchor="middle">{label}</text>"#,
            TOP + ph + 16.0
        );
    }
    for (v, label) in ya.ticks() {
        let y = py(v);
        let _ = writeln!(
            s,
            r#"<line x1="{}" y1="{y:.2}" x2="{LEFT}" y2="{y:.2}" stroke="black"/>"#,
            LEFT - 4.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{:.2}" text-anchor="end">{label}</text>"#,
            LEFT - 6.0,
            y + 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        LEFT + pw / 2.0,
        H - 12.0,
        esc(&spec.x_label)
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{0}" text-anchor="middle" transform="rotate(-90 16 {0})">{1}</text>"#,
        TOP + ph / 2.0,
        esc(&spec.y_label)
    );

    for (i, (name, pts)) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let pts: Vec<(f64, f64)> = pts
            .iter()
            .copied()
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .collect();
        match spec.kind {
            PlotKind::Line => {
                let path: Vec<String> = pts
                    .iter()
                    .map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y)))
                    .collect();
                let _ = writeln!(
                    s,
                    r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
                    path.join(" ")
                );
                for &(x, y) in &pts {
                    let _ = writeln!(
                        s,
                        r#"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="{color}"/>"#,
                        px(x),
                        py(y)
                    );
                }
            }
            PlotKind::Scatter => {
                for &(x, y) in &pts {
                    let _ = writeln!(
                        s,
                        r#"<circle cx="{:.2}" cy="{:.2}" r="1.5" fill="{color}" fill-opacity="0.6"/>"#,
                        px(x),
                        py(y)
                    );
                }
            }
            PlotKind::Histogram => {
                let width = if pts.len() > 1 {
                    pts[1].0 - pts[0].0
                } else {
                    1.0
                };
                let base = py(ya.lo.max(0.0));
                for &(x, y) in &pts {
                    let (x0, x1, top) = (px(x), px(x + width), py(y));
                    let _ = writeln!(
                        s,
                        r#"<rect x="{x0:.2}" y="{top:.2}" width="{:.2}" height="{:.2}" fill="{color}" stroke="white" stroke-width="0.5"/>"#,
                        (x1 - x0).max(0.5),
                        (base - top).max(0.0)
                    );
                }
            }
        }
        if series.len() > 1 {
            let ly = TOP + 14.0 + 14.0 * i as f64;
            let lx = LEFT + pw - 120.0;
            let _ = writeln!(
                s,
                r#"<rect x="{lx}" y="{}" width="10" height="10" fill="{color}"/>"#,
                ly - 9.0
            );
            let _ = writeln!(
                s,
                r#"<text x="{}" y="{ly}">{}</text>"#,
                lx + 14.0,
                esc(name)
            );
        }
    }
    s.push_str("</svg>\n");
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    const CSV: &str = "arch,n,latency_s\noptmax,64,1.3e-8\noptmax,2048,4.1e-7\noptmoid,64,6.5e-9\noptmoid,2048,2.05e-7\n";

    #[test]
    fn grouped_log_plot() {
        let spec = FigureSpec::new(PlotKind::Line, "latency", "n", "latency_s")
            .group("arch")
            .log(true, true);
        let svg = render(&spec, CSV, None).unwrap();
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.contains(">optmoid<"));
        assert!(!svg.contains("generated"));
        assert_eq!(svg, render(&spec, CSV, None).unwrap());
        assert!(render(&spec, CSV, Some("t0"))
            .unwrap()
            .contains("<!-- generated t0 -->"));
    }

    #[test]
    fn unresolved_column() {
        let spec = FigureSpec::new(PlotKind::Line, "x", "n", "power_w");
        assert!(render(&spec, CSV, None)
            .unwrap_err()
            .to_string()
            .contains("power_w"));
    }

    #[test]
    fn log_axis_rejects_nonpositive() {
        let csv = "a,b\n0,1\n1,2\n";
        let spec = FigureSpec::new(PlotKind::Scatter, "s", "a", "b").log(true, false);
        assert!(render(&spec, csv, None).is_err());
    }

    #[test]
    fn histogram_skips_comment_lines() {
        let csv = "bin_lo,bin_hi,count\n0,1,3\n1,2,5\n# n=8\n";
        let spec = FigureSpec::new(PlotKind::Histogram, "h", "bin_lo", "count");
        assert_eq!(
            render(&spec, csv, None).unwrap().matches("<rect").count(),
            2 + 2
        );
    }

    #[test]
    fn filter_rows() {
        let spec = FigureSpec::new(PlotKind::Line, "l", "n", "latency_s").filter("arch", "optmax");
        let svg = render(&spec, CSV, None).unwrap();
        assert_eq!(svg.matches("<circle").count(), 2);
    }
}
