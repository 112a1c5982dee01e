//! Standalone SVG radar and grouped bar charts. Output depends only on the
//! input, with all coordinates printed at fixed precision.

use std::f64::consts::PI;
use std::fmt::Write;

use crate::config::Family;
use crate::error::{Error, Result};
use crate::pipeline::MetricsRecord;
use crate::report::normalize::{Metric, RadarRow};

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

fn color(i: usize) -> &'static str {
    PALETTE[i % PALETTE.len()]
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn header(w: f64, h: f64) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w:.0}\" height=\"{h:.0}\" viewBox=\"0 0 {w:.0} {h:.0}\" font-family=\"sans-serif\" font-size=\"12\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    )
}

/// One polygon per row over the six radar axes.
pub fn radar_svg(rows: &[RadarRow]) -> Result<String> {
    if rows.is_empty() {
        return Err(Error::Empty("radar chart needs at least one row".into()));
    }
    let (cx, cy, radius) = (260.0, 240.0, 170.0);
    let n = Metric::RADAR.len();
    let point = |axis: usize, r: f64| {
        let a = -PI / 2.0 + 2.0 * PI * axis as f64 / n as f64;
        (cx + r * radius * a.cos(), cy + r * radius * a.sin())
    };
    let mut s = header(520.0, 500.0 + 18.0 * rows.len() as f64);
    for ring in [0.25, 0.5, 0.75, 1.0] {
        let pts: Vec<String> = (0..n)
            .map(|i| {
                let (x, y) = point(i, ring);
                format!("{x:.2},{y:.2}")
            })
            .collect();
        let _ = writeln!(
            s,
            "<polygon points=\"{}\" fill=\"none\" stroke=\"#cccccc\"/>",
            pts.join(" ")
        );
    }
    for (i, m) in Metric::RADAR.iter().enumerate() {
        let (x, y) = point(i, 1.0);
        let (lx, ly) = point(i, 1.12);
        let anchor = if (lx - cx).abs() < 1.0 {
            "middle"
        } else if lx > cx {
            "start"
        } else {
            "end"
        };
        let _ = writeln!(
            s,
            "<line x1=\"{cx:.2}\" y1=\"{cy:.2}\" x2=\"{x:.2}\" y2=\"{y:.2}\" stroke=\"#999999\"/>\n<text x=\"{lx:.2}\" y=\"{ly:.2}\" text-anchor=\"{anchor}\" dominant-baseline=\"middle\">{}</text>",
            m.label()
        );
    }
    for (i, row) in rows.iter().enumerate() {
        let pts: Vec<String> = row
            .values
            .iter()
            .enumerate()
            .map(|(a, &v)| {
                let (x, y) = point(a, v.clamp(0.0, 1.0));
                format!("{x:.2},{y:.2}")
            })
            .collect();
        let c = color(i);
        let _ = writeln!(
            s,
            "<polygon class=\"series\" points=\"{}\" fill=\"{c}\" fill-opacity=\"0.15\" stroke=\"{c}\" stroke-width=\"2\"/>",
            pts.join(" ")
        );
        let ly = 480.0 + 18.0 * i as f64;
        let _ = writeln!(
            s,
            "<rect x=\"20\" y=\"{:.0}\" width=\"12\" height=\"12\" fill=\"{c}\"/><text x=\"38\" y=\"{:.0}\">{}</text>",
            ly - 10.0,
            ly,
            escape(&row.generator_id)
        );
    }
    s.push_str("</svg>\n");
    Ok(s)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BarMetric {
    Utility,
    Robustness,
}

impl BarMetric {
    pub fn label(self) -> &'static str {
        match self {
            BarMetric::Utility => "Utility",
            BarMetric::Robustness => "Robustness",
        }
    }

    fn value(self, r: &MetricsRecord) -> Option<f64> {
        match self {
            BarMetric::Utility => r.utility.as_ref().map(|u| u.accuracy),
            BarMetric::Robustness => r.robustness.as_ref().map(|u| u.adversarial.accuracy),
        }
    }
}

/// Grouped bars per (family, multiplier) for one dataset, one bar per
/// generator, with dashed reference lines for the baseline families.
/// Groups follow family order, then multiplier.
pub fn bar_svg(records: &[MetricsRecord], dataset_id: &str, metric: BarMetric) -> Result<String> {
    let recs: Vec<&MetricsRecord> = records.iter().filter(|r| r.dataset_id == dataset_id).collect();
    if recs.is_empty() {
        return Err(Error::Empty(format!("no records for dataset {dataset_id}")));
    }
    let mut groups: Vec<(Family, u32)> = recs
        .iter()
        .filter_map(|r| r.variant.multiplier.map(|m| (r.variant.family, m)))
        .collect();
    groups.sort();
    groups.dedup();
    let mut gens: Vec<&str> = recs.iter().filter_map(|r| r.generator_id.as_deref()).collect();
    gens.sort();
    gens.dedup();

    let bar_w = 14.0;
    let group_w = bar_w * gens.len().max(1) as f64 + 16.0;
    let (left, top, plot_h) = (60.0, 40.0, 260.0);
    let plot_w = (group_w * groups.len() as f64).max(200.0);
    let width = left + plot_w + 180.0;
    let height = top + plot_h + 90.0 + 18.0 * gens.len() as f64;
    let y_of = |v: f64| top + plot_h * (1.0 - v.clamp(0.0, 1.0));

    let mut s = header(width, height);
    let _ = writeln!(
        s,
        "<text x=\"{left:.0}\" y=\"20\" font-size=\"14\">{} ({})</text>",
        metric.label(),
        escape(dataset_id)
    );
    for tick in 0..=4 {
        let v = tick as f64 / 4.0;
        let y = y_of(v);
        let _ = writeln!(
            s,
            "<line x1=\"{left:.0}\" y1=\"{y:.2}\" x2=\"{:.2}\" y2=\"{y:.2}\" stroke=\"#eeeeee\"/><text x=\"{:.0}\" y=\"{y:.2}\" text-anchor=\"end\" dominant-baseline=\"middle\">{v:.2}</text>",
            left + plot_w,
            left - 6.0
        );
    }
    for (gi, &(family, m)) in groups.iter().enumerate() {
        let gx = left + gi as f64 * group_w + 8.0;
        for (bi, g) in gens.iter().enumerate() {
            let v = recs
                .iter()
                .find(|r| {
                    r.variant.family == family
                        && r.variant.multiplier == Some(m)
                        && r.generator_id.as_deref() == Some(*g)
                })
                .and_then(|r| metric.value(r));
            if let Some(v) = v {
                let y = y_of(v);
                let _ = writeln!(
                    s,
                    "<rect class=\"bar\" x=\"{:.2}\" y=\"{y:.2}\" width=\"{bar_w:.2}\" height=\"{:.2}\" fill=\"{}\"/>",
                    gx + bi as f64 * bar_w,
                    top + plot_h - y,
                    color(bi)
                );
            }
        }
        let _ = writeln!(
            s,
            "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"10\" text-anchor=\"end\" transform=\"rotate(-40 {:.2} {:.2})\">{} {m}x</text>",
            gx + group_w / 2.0,
            top + plot_h + 14.0,
            gx + group_w / 2.0,
            top + plot_h + 14.0,
            family.label()
        );
    }
    let baselines = [(Family::BaselineReal, "#000000"), (Family::GeometricDa, "#777777")];
    for (i, (family, stroke)) in baselines.iter().enumerate() {
        let v = recs
            .iter()
            .find(|r| r.variant.family == *family)
            .and_then(|r| metric.value(r));
        if let Some(v) = v {
            let y = y_of(v);
            let _ = writeln!(
                s,
                "<line class=\"baseline\" x1=\"{left:.0}\" y1=\"{y:.2}\" x2=\"{:.2}\" y2=\"{y:.2}\" stroke=\"{stroke}\" stroke-dasharray=\"6 4\"/><text x=\"{:.2}\" y=\"{:.2}\" fill=\"{stroke}\">{} {v:.3}</text>",
                left + plot_w,
                left + plot_w + 6.0,
                y + 12.0 * i as f64,
                family.label()
            );
        }
    }
    let _ = writeln!(
        s,
        "<line x1=\"{left:.0}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"black\"/>",
        top + plot_h,
        left + plot_w,
        top + plot_h
    );
    for (bi, g) in gens.iter().enumerate() {
        let ly = top + plot_h + 80.0 + 18.0 * bi as f64;
        let _ = writeln!(
            s,
            "<rect x=\"{left:.0}\" y=\"{:.0}\" width=\"12\" height=\"12\" fill=\"{}\"/><text x=\"{:.0}\" y=\"{ly:.0}\">{}</text>",
            ly - 10.0,
            color(bi),
            left + 18.0,
            escape(g)
        );
    }
    s.push_str("</svg>\n");
    Ok(s)
}
