//! Cross-cell min-max normalization for the radar chart.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::config::Family;
use crate::error::{Error, Result};
use crate::pipeline::MetricsRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Metric {
    Fidelity,
    Diversity,
    SamplingSpeed,
    Utility,
    Robustness,
    Privacy,
}

impl Metric {
    /// Radar axis order.
    pub const RADAR: [Metric; 6] = [
        Metric::Fidelity,
        Metric::Diversity,
        Metric::SamplingSpeed,
        Metric::Utility,
        Metric::Robustness,
        Metric::Privacy,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Metric::Fidelity => "Fidelity",
            Metric::Diversity => "Diversity",
            Metric::SamplingSpeed => "Sampling Speed",
            Metric::Utility => "Utility",
            Metric::Robustness => "Robustness",
            Metric::Privacy => "Privacy",
        }
    }

    /// Privacy is the only metric where a lower raw value is better.
    pub fn inverted(self) -> bool {
        self == Metric::Privacy
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormalizationMode {
    /// Min and max over every (generator, dataset) cell; each generator's
    /// cross-dataset mean is placed within that range.
    #[default]
    CellRange,
    /// Min and max over the per-generator means.
    MeanRange,
}

/// Raw radar metrics of one (generator, dataset) cell, in [`Metric::RADAR`]
/// order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadarCell {
    pub generator_id: String,
    pub dataset_id: String,
    pub values: [Option<f64>; 6],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadarRow {
    pub generator_id: String,
    /// In [0, 1], higher is better, in [`Metric::RADAR`] order.
    pub values: [f64; 6],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadarReport {
    pub mode: NormalizationMode,
    pub rows: Vec<RadarRow>,
    pub warnings: Vec<String>,
}

/// Position of `v` in `[lo, hi]`; 0.5 when the range is empty.
fn position(v: f64, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        ((v - lo) / (hi - lo)).clamp(0.0, 1.0)
    } else {
        0.5
    }
}

fn range(values: &[f64]) -> (f64, f64) {
    values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
}

/// Plain min-max normalization of one column; constant columns map to 0.5.
pub fn min_max(values: &[f64]) -> Vec<f64> {
    let (lo, hi) = range(values);
    values.iter().map(|&v| position(v, lo, hi)).collect()
}

pub fn normalize_cells(cells: &[RadarCell], mode: NormalizationMode) -> Result<RadarReport> {
    if cells.is_empty() {
        return Err(Error::Empty("no cells to normalize".into()));
    }
    let mut generators: Vec<String> = cells.iter().map(|c| c.generator_id.clone()).collect();
    generators.sort();
    generators.dedup();
    let mut warnings = Vec::new();
    let mut rows: Vec<RadarRow> = generators
        .iter()
        .map(|g| RadarRow {
            generator_id: g.clone(),
            values: [0.5; 6],
        })
        .collect();

    for (m, metric) in Metric::RADAR.iter().enumerate() {
        let all: Vec<f64> = cells.iter().filter_map(|c| c.values[m]).collect();
        let means: Vec<Option<f64>> = generators
            .iter()
            .map(|g| {
                let v: Vec<f64> = cells
                    .iter()
                    .filter(|c| &c.generator_id == g)
                    .filter_map(|c| c.values[m])
                    .collect();
                (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
            })
            .collect();
        let present: Vec<f64> = means.iter().flatten().copied().collect();
        let (lo, hi) = match mode {
            NormalizationMode::CellRange => range(&all),
            NormalizationMode::MeanRange => range(&present),
        };
        let distinct = {
            let basis = if mode == NormalizationMode::CellRange { &all } else { &present };
            let mut v = basis.clone();
            v.sort_by(f64::total_cmp);
            v.dedup();
            v.len()
        };
        if distinct < 2 {
            warnings.push(format!(
                "{}: fewer than two distinct values, shown as 0.5",
                metric.label()
            ));
        }
        for (row, mean) in rows.iter_mut().zip(&means) {
            let Some(mean) = mean else {
                warnings.push(format!("{}: no value for {}", metric.label(), row.generator_id));
                continue;
            };
            let p = position(*mean, lo, hi);
            row.values[m] = if metric.inverted() && distinct >= 2 { 1.0 - p } else { p };
        }
    }
    Ok(RadarReport {
        mode,
        rows,
        warnings,
    })
}

/// One radar cell per (generator, dataset). Utility and robustness come
/// from the smallest-multiplier data-anonymization cell when present,
/// otherwise from the first synthetic cell in family and multiplier order.
pub fn radar_cells(records: &[MetricsRecord]) -> Vec<RadarCell> {
    let mut groups: BTreeMap<(String, String), Vec<&MetricsRecord>> = BTreeMap::new();
    for r in records {
        if let Some(g) = &r.generator_id {
            groups.entry((g.clone(), r.dataset_id.clone())).or_default().push(r);
        }
    }
    groups
        .into_iter()
        .map(|((generator_id, dataset_id), mut recs)| {
            recs.sort_by_key(|r| {
                (
                    r.variant.family != Family::DataAnonymization,
                    r.variant.multiplier,
                    r.variant.family,
                )
            });
            let first = |f: &dyn Fn(&MetricsRecord) -> Option<f64>| recs.iter().find_map(|r| f(r));
            let utility = recs
                .iter()
                .find_map(|r| r.utility.as_ref().map(|u| u.accuracy));
            let robustness = recs
                .iter()
                .find_map(|r| r.robustness.as_ref().map(|u| u.adversarial.accuracy));
            RadarCell {
                values: [
                    first(&|r| r.fidelity),
                    first(&|r| r.diversity),
                    first(&|r| r.sampling_speed),
                    utility,
                    robustness,
                    first(&|r| r.privacy),
                ],
                generator_id,
                dataset_id,
            }
        })
        .collect()
}

pub fn normalize_for_radar(records: &[MetricsRecord], mode: NormalizationMode) -> Result<RadarReport> {
    let cells = radar_cells(records);
    if cells.is_empty() {
        return Err(Error::Empty("no generator records to normalize".into()));
    }
    normalize_cells(&cells, mode)
}
