//! Log-log convergence plots as self-contained SVG.
//!
//! One `<polyline class="mean">` per method traces the mean squared error;
//! a `<polygon class="band">` underneath shades mean +/- CI half-width, with
//! the lower edge clamped at the smallest positive mean in the plot.
//! Coordinates are printed with two decimals so identical reports give
//! identical bytes.

use std::fmt::Write as _;
use std::path::Path;

use super::{ExperimentReport, HarnessError};

const WIDTH: f64 = 760.0;
const HEIGHT: f64 = 500.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 190.0;
const TOP: f64 = 50.0;
const BOTTOM: f64 = 60.0;

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

struct Series<'a> {
    name: &'a str,
    /// (n, mean, lower, upper)
    points: Vec<(f64, f64, f64, f64)>,
    dropped: usize,
}

struct Axis {
    lo: f64,
    hi: f64,
    pixel_lo: f64,
    pixel_hi: f64,
}

impl Axis {
    /// Log10 range widened to whole decades.
    fn log(lo: f64, hi: f64, pixel_lo: f64, pixel_hi: f64) -> Self {
        let mut lo = lo.log10().floor();
        let mut hi = hi.log10().ceil();
        if hi <= lo {
            lo -= 1.0;
            hi += 1.0;
        }
        Self {
            lo,
            hi,
            pixel_lo,
            pixel_hi,
        }
    }

    fn map(&self, v: f64) -> f64 {
        let t = (v.log10() - self.lo) / (self.hi - self.lo);
        self.pixel_lo + t * (self.pixel_hi - self.pixel_lo)
    }

    fn decades(&self) -> impl Iterator<Item = i32> {
        (self.lo as i32)..=(self.hi as i32)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Renders the report. Fails if no method has a positive mean to plot.
pub fn render_svg(report: &ExperimentReport) -> Result<String, HarnessError> {
    let mut series: Vec<Series> = report
        .methods
        .iter()
        .map(|m| {
            let kept: Vec<_> = m
                .rows
                .iter()
                .filter(|r| r.mean_mse > 0.0 && r.mean_mse.is_finite())
                .collect();
            Series {
                name: &m.method,
                dropped: m.rows.len() - kept.len(),
                points: kept
                    .iter()
                    .map(|r| {
                        let n = r.n_evals as f64;
                        (
                            n,
                            r.mean_mse,
                            r.mean_mse - r.ci_half_width,
                            r.mean_mse + r.ci_half_width,
                        )
                    })
                    .collect(),
            }
        })
        .collect();
    let min_pos = series
        .iter()
        .flat_map(|s| s.points.iter().map(|p| p.1))
        .fold(f64::INFINITY, f64::min);
    if !min_pos.is_finite() {
        return Err(HarnessError::Config(
            "nothing to plot: no positive mean squared error".into(),
        ));
    }
    for s in &mut series {
        for p in &mut s.points {
            p.2 = p.2.max(min_pos);
        }
    }
    let all = || series.iter().flat_map(|s| s.points.iter());
    let n_lo = all().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let n_hi = all().map(|p| p.0).fold(0.0, f64::max);
    let y_hi = all().map(|p| p.3).fold(0.0, f64::max);
    let x_axis = Axis::log(n_lo, n_hi, LEFT, WIDTH - RIGHT);
    let y_axis = Axis::log(min_pos, y_hi, HEIGHT - BOTTOM, TOP);

    let mut out = String::new();
    let w = &mut out;
    let _ = writeln!(
        w,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(
        w,
        r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
    );
    let _ = writeln!(
        w,
        r#"<text class="title" x="{:.2}" y="28" text-anchor="middle" font-size="16">{}</text>"#,
        (LEFT + WIDTH - RIGHT) / 2.0,
        escape(&report.title)
    );

    // frame and decade grid
    let (x0, x1, y0, y1) = (LEFT, WIDTH - RIGHT, TOP, HEIGHT - BOTTOM);
    let _ = writeln!(
        w,
        r##"<rect class="frame" x="{x0:.2}" y="{y0:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="#333"/>"##,
        x1 - x0,
        y1 - y0
    );
    for k in x_axis.decades() {
        let x = x_axis.map(10f64.powi(k));
        let _ = writeln!(
            w,
            r##"<line x1="{x:.2}" y1="{y0:.2}" x2="{x:.2}" y2="{y1:.2}" stroke="#ddd"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">10<tspan dy="-6" font-size="9">{k}</tspan></text>"##,
            y1 + 18.0
        );
    }
    for k in y_axis.decades() {
        let y = y_axis.map(10f64.powi(k));
        let _ = writeln!(
            w,
            r##"<line x1="{x0:.2}" y1="{y:.2}" x2="{x1:.2}" y2="{y:.2}" stroke="#ddd"/><text x="{:.2}" y="{:.2}" text-anchor="end">10<tspan dy="-6" font-size="9">{k}</tspan></text>"##,
            x0 - 6.0,
            y + 4.0
        );
    }
    let _ = writeln!(
        w,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">evaluations n</text>"#,
        (x0 + x1) / 2.0,
        HEIGHT - 14.0
    );
    let _ = writeln!(
        w,
        r#"<text x="18" y="{:.2}" text-anchor="middle" transform="rotate(-90 18 {:.2})">mean squared error</text>"#,
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0
    );

    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let name = escape(s.name);
        if s.points.is_empty() {
            continue;
        }
        let mut band = String::new();
        for p in &s.points {
            let _ = write!(band, "{:.2},{:.2} ", x_axis.map(p.0), y_axis.map(p.3));
        }
        for p in s.points.iter().rev() {
            let _ = write!(band, "{:.2},{:.2} ", x_axis.map(p.0), y_axis.map(p.2));
        }
        let _ = writeln!(
            w,
            r#"<polygon class="band" data-method="{name}" points="{}" fill="{color}" fill-opacity="0.18" stroke="none"/>"#,
            band.trim_end()
        );
        let line: Vec<String> = s
            .points
            .iter()
            .map(|p| format!("{:.2},{:.2}", x_axis.map(p.0), y_axis.map(p.1)))
            .collect();
        let _ = writeln!(
            w,
            r#"<polyline class="mean" data-method="{name}" points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
            line.join(" ")
        );
    }

    // legend
    let lx = WIDTH - RIGHT + 16.0;
    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let ly = TOP + 10.0 + 22.0 * i as f64;
        let _ = writeln!(
            w,
            r#"<rect x="{lx:.2}" y="{:.2}" width="18" height="4" fill="{color}"/><text class="legend" x="{:.2}" y="{:.2}">{}</text>"#,
            ly - 2.0,
            lx + 24.0,
            ly + 4.0,
            escape(s.name)
        );
    }
    let mut warn_y = TOP + 10.0 + 22.0 * series.len() as f64 + 10.0;
    for s in series.iter().filter(|s| s.dropped > 0) {
        let _ = writeln!(
            w,
            r##"<text class="warning" x="{lx:.2}" y="{warn_y:.2}" fill="#a00" font-size="10">{}: {} non-positive point(s) dropped</text>"##,
            escape(s.name),
            s.dropped
        );
        warn_y += 14.0;
    }
    let _ = writeln!(
        w,
        r#"<text x="{lx:.2}" y="{:.2}" font-size="10">band: mean &#177; 1.96 s/&#8730;{}</text>"#,
        HEIGHT - BOTTOM,
        report.trials
    );
    out.push_str("</svg>\n");
    Ok(out)
}

pub fn emit_svg_plot(report: &ExperimentReport, path: &Path) -> Result<(), HarnessError> {
    let svg = render_svg(report)?;
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    }
    std::fs::write(path, svg).map_err(|e| HarnessError::io(path, e))
}

/// Points of the mean polyline for `method`, in SVG pixel coordinates.
pub fn mean_polyline(svg: &str, method: &str) -> Option<Vec<(f64, f64)>> {
    let marker = format!(r#"<polyline class="mean" data-method="{}" points=""#, escape(method));
    let start = svg.find(&marker)? + marker.len();
    let end = start + svg[start..].find('"')?;
    svg[start..end]
        .split(' ')
        .map(|pair| {
            let (x, y) = pair.split_once(',')?;
            Some((x.parse().ok()?, y.parse().ok()?))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{CheckpointStats, MethodReport};

    type Rows<'a> = Vec<(&'a str, Vec<(usize, f64, f64)>)>;

    fn report(methods: Rows) -> ExperimentReport {
        ExperimentReport {
            title: "test <plot>".into(),
            seed: 1,
            trials: 10,
            single_trial: false,
            methods: methods
                .into_iter()
                .map(|(name, rows)| MethodReport {
                    method: name.into(),
                    rows: rows
                        .into_iter()
                        .map(|(n, m, h)| CheckpointStats {
                            n_evals: n,
                            mean_mse: m,
                            std: h,
                            ci_half_width: h,
                            trials: 10,
                        })
                        .collect(),
                })
                .collect(),
            wall_clock_secs: 0.0,
        }
    }

    #[test]
    fn one_polyline_per_method() {
        let r = report(vec![("liso", vec![(100, 0.1, 0.01), (1000, 0.01, 0.02)])]);
        let svg = render_svg(&r).unwrap();
        assert_eq!(svg.matches("<polyline").count(), 1);
        assert_eq!(svg.matches("<polygon class=\"band\"").count(), 1);
        assert!(svg.contains("test &lt;plot&gt;"));
        assert!(!svg.contains("href"));
        let pts = mean_polyline(&svg, "liso").unwrap();
        assert_eq!(pts.len(), 2);
        assert!(pts[1].1 > pts[0].1, "smaller error plots lower");
    }

    #[test]
    fn deterministic_bytes() {
        let r = report(vec![
            ("liso", vec![(100, 0.1, 0.01), (1000, 0.01, 0.001)]),
            ("random_search", vec![(100, 0.2, 0.01), (1000, 0.05, 0.001)]),
        ]);
        assert_eq!(render_svg(&r).unwrap(), render_svg(&r.clone()).unwrap());
    }

    #[test]
    fn non_positive_points_are_dropped() {
        let r = report(vec![("liso", vec![(100, 0.1, 0.0), (200, 0.0, 0.0), (300, 0.05, 0.0)])]);
        let svg = render_svg(&r).unwrap();
        assert_eq!(mean_polyline(&svg, "liso").unwrap().len(), 2);
        assert!(svg.contains("class=\"warning\""));
        let empty = report(vec![("liso", vec![(100, 0.0, 0.0)])]);
        assert!(render_svg(&empty).is_err());
    }
}
