//! Self-contained SVG plots of benchmark results: log-log axes, one
//! polyline per (objective, engine) series, a circle per data point, and a
//! filled black endpoint marker where a series ends in a crash or timeout.

use crate::suite::{Status, TimingRecord};
use std::collections::BTreeMap;
use std::fmt;
use std::fmt::Write as _;

#[derive(Debug, Clone, PartialEq)]
pub enum PlotError {
    /// No plottable records.
    NoData,
}

impl fmt::Display for PlotError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PlotError::NoData => write!(f, "no plottable records"),
        }
    }
}

impl std::error::Error for PlotError {}

#[derive(Debug, Clone, Copy)]
pub struct PlotOptions {
    /// Plot relative runtime (derivative/objective) rather than absolute
    /// derivative seconds.
    pub relative: bool,
}

const WIDTH: f64 = 860.0;
const HEIGHT: f64 = 560.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 220.0;
const MARGIN_T: f64 = 30.0;
const MARGIN_B: f64 = 55.0;

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f",
];

struct Series {
    label: String,
    /// (x, y) of finished points, sorted by x.
    points: Vec<(f64, f64)>,
    /// True when the series has crashed/timed-out/failed records, so the
    /// last finished point gets the black endpoint marker.
    truncated: bool,
}

fn collect_series(records: &[TimingRecord], relative: bool) -> Vec<Series> {
    let mut groups: BTreeMap<String, Vec<&TimingRecord>> = BTreeMap::new();
    for r in records {
        groups
            .entry(format!("{}/{}", r.objective, r.engine))
            .or_default()
            .push(r);
    }
    let mut series = Vec::new();
    for (label, mut recs) in groups {
        recs.sort_by_key(|r| r.n_params_or_meas);
        let mut points = Vec::new();
        let mut truncated = false;
        for r in &recs {
            let y = if relative { r.rel } else { r.der_s };
            match (r.status, y) {
                (Status::Ok, Some(y)) if y > 0.0 => {
                    points.push((r.n_params_or_meas as f64, y));
                }
                // Truncation: the series stops at the last finished size.
                _ => truncated = true,
            }
        }
        if !points.is_empty() {
            series.push(Series {
                label,
                points,
                truncated,
            });
        }
    }
    series
}

fn log_bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for v in values {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    // One decade of padding on either side.
    (lo / 10.0, hi * 10.0)
}

/// Render the records as an SVG document.
pub fn emit_plot(records: &[TimingRecord], opts: &PlotOptions) -> Result<String, PlotError> {
    let series = collect_series(records, opts.relative);
    if series.is_empty() {
        return Err(PlotError::NoData);
    }
    let (x_lo, x_hi) = log_bounds(series.iter().flat_map(|s| s.points.iter().map(|p| p.0)));
    let (y_lo, y_hi) = log_bounds(series.iter().flat_map(|s| s.points.iter().map(|p| p.1)));

    let x_px = |x: f64| {
        MARGIN_L
            + (x.log10() - x_lo.log10()) / (x_hi.log10() - x_lo.log10()).max(1e-12)
                * (WIDTH - MARGIN_L - MARGIN_R)
    };
    let y_px = |y: f64| {
        HEIGHT
            - MARGIN_B
            - (y.log10() - y_lo.log10()) / (y_hi.log10() - y_lo.log10()).max(1e-12)
                * (HEIGHT - MARGIN_T - MARGIN_B)
    };

    let mut svg = String::new();
    writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    )
    .unwrap();
    writeln!(
        svg,
        r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
    )
    .unwrap();

    // Decade gridlines with labels.
    for e in (x_lo.log10().floor() as i64)..=(x_hi.log10().ceil() as i64) {
        let x = 10f64.powi(e as i32);
        if x < x_lo || x > x_hi {
            continue;
        }
        let px = x_px(x);
        writeln!(
            svg,
            r##"<line class="grid" x1="{px:.1}" y1="{MARGIN_T}" x2="{px:.1}" y2="{}" stroke="#dddddd"/>"##,
            HEIGHT - MARGIN_B
        )
        .unwrap();
        writeln!(
            svg,
            r#"<text x="{px:.1}" y="{}" text-anchor="middle">1e{e}</text>"#,
            HEIGHT - MARGIN_B + 18.0
        )
        .unwrap();
    }
    for e in (y_lo.log10().floor() as i64)..=(y_hi.log10().ceil() as i64) {
        let y = 10f64.powi(e as i32);
        if y < y_lo || y > y_hi {
            continue;
        }
        let py = y_px(y);
        writeln!(
            svg,
            r##"<line class="grid" x1="{MARGIN_L}" y1="{py:.1}" x2="{}" y2="{py:.1}" stroke="#dddddd"/>"##,
            WIDTH - MARGIN_R
        )
        .unwrap();
        writeln!(
            svg,
            r#"<text x="{}" y="{:.1}" text-anchor="end">1e{e}</text>"#,
            MARGIN_L - 8.0,
            py + 4.0
        )
        .unwrap();
    }

    // Axes.
    writeln!(
        svg,
        r#"<line x1="{MARGIN_L}" y1="{}" x2="{}" y2="{}" stroke="black"/>"#,
        HEIGHT - MARGIN_B,
        WIDTH - MARGIN_R,
        HEIGHT - MARGIN_B
    )
    .unwrap();
    writeln!(
        svg,
        r#"<line x1="{MARGIN_L}" y1="{MARGIN_T}" x2="{MARGIN_L}" y2="{}" stroke="black"/>"#,
        HEIGHT - MARGIN_B
    )
    .unwrap();
    let y_title = if opts.relative {
        "relative runtime (derivative / objective)"
    } else {
        "derivative runtime [s]"
    };
    writeln!(
        svg,
        r#"<text x="{:.1}" y="{}" text-anchor="middle">problem size</text>"#,
        MARGIN_L + (WIDTH - MARGIN_L - MARGIN_R) / 2.0,
        HEIGHT - 12.0
    )
    .unwrap();
    writeln!(
        svg,
        r#"<text x="16" y="{:.1}" text-anchor="middle" transform="rotate(-90 16 {:.1})">{y_title}</text>"#,
        (HEIGHT - MARGIN_B + MARGIN_T) / 2.0,
        (HEIGHT - MARGIN_B + MARGIN_T) / 2.0
    )
    .unwrap();

    // Series.
    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let pts: Vec<String> = s
            .points
            .iter()
            .map(|&(x, y)| format!("{:.1},{:.1}", x_px(x), y_px(y)))
            .collect();
        writeln!(
            svg,
            r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#,
            pts.join(" ")
        )
        .unwrap();
        for &(x, y) in &s.points {
            writeln!(
                svg,
                r#"<circle class="pt" cx="{:.1}" cy="{:.1}" r="3" fill="{color}"/>"#,
                x_px(x),
                y_px(y)
            )
            .unwrap();
        }
        if s.truncated {
            let &(x, y) = s.points.last().unwrap();
            writeln!(
                svg,
                r#"<circle class="end" cx="{:.1}" cy="{:.1}" r="6" fill="black"/>"#,
                x_px(x),
                y_px(y)
            )
            .unwrap();
        }
        // Legend entry.
        let ly = MARGIN_T + 18.0 * i as f64 + 8.0;
        writeln!(
            svg,
            r#"<rect x="{:.1}" y="{:.1}" width="12" height="12" fill="{color}"/>"#,
            WIDTH - MARGIN_R + 16.0,
            ly - 10.0
        )
        .unwrap();
        writeln!(
            svg,
            r#"<text x="{:.1}" y="{ly:.1}">{}</text>"#,
            WIDTH - MARGIN_R + 34.0,
            s.label
        )
        .unwrap();
    }
    writeln!(svg, "</svg>").unwrap();
    Ok(svg)
}
