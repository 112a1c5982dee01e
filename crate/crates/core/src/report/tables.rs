//! CSV tables with JSON mirrors.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::Family;
use crate::error::{Error, Result};
use crate::pipeline::MetricsRecord;

pub const NA: &str = "NA";

pub const TRILEMMA_COLUMNS: [&str; 7] = [
    "Dataset",
    "Model",
    "Fidelity",
    "Diversity",
    "FID",
    "Privacy",
    "Sampling Speed",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.columns)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Config(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn from_csv(name: &str, text: &str) -> Result<Self> {
        let mut r = csv::Reader::from_reader(text.as_bytes());
        let columns = r.headers()?.iter().map(str::to_string).collect();
        let rows = r
            .records()
            .map(|rec| Ok(rec?.iter().map(str::to_string).collect()))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            name: name.to_string(),
            columns,
            rows,
        })
    }
}

fn fmt(v: Option<f64>, decimals: usize) -> String {
    match v {
        Some(v) if v.is_finite() => format!("{v:.decimals$}"),
        _ => NA.to_string(),
    }
}

fn mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

/// Fidelity, diversity, FID, privacy and sampling speed per dataset and
/// generator, followed by per-generator averages when there are several
/// datasets.
pub fn trilemma_table(records: &[MetricsRecord]) -> Table {
    type Key = (String, String);
    let mut cells: BTreeMap<Key, [Option<f64>; 5]> = BTreeMap::new();
    for r in records {
        let Some(g) = &r.generator_id else { continue };
        let slot = cells.entry((r.dataset_id.clone(), g.clone())).or_insert([None; 5]);
        let vals = [r.fidelity, r.diversity, r.fid, r.privacy, r.sampling_speed];
        for (s, v) in slot.iter_mut().zip(vals) {
            if s.is_none() {
                *s = v;
            }
        }
    }
    let decimals = [3, 3, 2, 3, 2];
    let mut rows: Vec<Vec<String>> = cells
        .iter()
        .map(|((d, g), v)| {
            let mut row = vec![d.clone(), g.clone()];
            row.extend(v.iter().zip(decimals).map(|(x, n)| fmt(*x, n)));
            row
        })
        .collect();
    let datasets: std::collections::BTreeSet<&String> = cells.keys().map(|(d, _)| d).collect();
    if datasets.len() > 1 {
        let mut gens: Vec<&String> = cells.keys().map(|(_, g)| g).collect();
        gens.sort();
        gens.dedup();
        for g in gens {
            let mut row = vec!["Average".to_string(), g.clone()];
            for (i, n) in decimals.iter().enumerate() {
                let vals: Vec<f64> = cells
                    .iter()
                    .filter(|((_, gg), _)| gg == g)
                    .filter_map(|(_, v)| v[i])
                    .collect();
                row.push(fmt(mean(&vals), *n));
            }
            rows.push(row);
        }
    }
    Table {
        name: "trilemma".into(),
        columns: TRILEMMA_COLUMNS.iter().map(|s| s.to_string()).collect(),
        rows,
    }
}

fn record_order(r: &MetricsRecord) -> (Family, Option<String>, Option<u32>) {
    (r.variant.family, r.variant.generator_id.clone(), r.variant.multiplier)
}

/// Utility and robustness of every cell of one dataset, in family order.
pub fn utility_table(records: &[MetricsRecord], dataset_id: &str) -> Table {
    let mut recs: Vec<&MetricsRecord> = records.iter().filter(|r| r.dataset_id == dataset_id).collect();
    recs.sort_by_key(|r| record_order(r));
    let k = recs
        .iter()
        .find_map(|r| r.utility.as_ref().map(|u| u.k))
        .unwrap_or(1);
    let mut columns: Vec<String> = ["Experiments", "Models", "Multiplier", "Utility", "Robustness"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    if k > 1 {
        columns.push(format!("Top-{k} Utility"));
        columns.push(format!("Top-{k} Robustness"));
    }
    let rows = recs
        .iter()
        .map(|r| {
            let mut row = vec![
                r.variant.family.label().to_string(),
                r.variant.generator_id.clone().unwrap_or_else(|| NA.into()),
                r.variant
                    .multiplier
                    .map(|m| format!("{m}x"))
                    .unwrap_or_else(|| NA.into()),
                fmt(r.utility.as_ref().map(|u| u.accuracy), 4),
                fmt(r.robustness.as_ref().map(|u| u.adversarial.accuracy), 4),
            ];
            if k > 1 {
                row.push(fmt(r.utility.as_ref().map(|u| u.top_k_accuracy), 4));
                row.push(fmt(r.robustness.as_ref().map(|u| u.adversarial.top_k_accuracy), 4));
            }
            row
        })
        .collect();
    Table {
        name: format!("utility_{dataset_id}"),
        columns,
        rows,
    }
}

pub fn all_tables(records: &[MetricsRecord]) -> Vec<Table> {
    let mut tables = vec![trilemma_table(records)];
    let mut datasets: Vec<&String> = records.iter().map(|r| &r.dataset_id).collect();
    datasets.sort();
    datasets.dedup();
    tables.extend(datasets.into_iter().map(|d| utility_table(records, d)));
    tables
}

/// Writes `<name>.csv` and/or `<name>.json` for every table.
pub fn emit_tables(records: &[MetricsRecord], out_dir: &Path, csv: bool, json: bool) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut written = Vec::new();
    for t in all_tables(records) {
        if csv {
            let p = out_dir.join(format!("{}.csv", t.name));
            fs::write(&p, t.to_csv()?).map_err(|e| Error::io(&p, e))?;
            written.push(p);
        }
        if json {
            let p = out_dir.join(format!("{}.json", t.name));
            fs::write(&p, serde_json::to_string_pretty(&t)?).map_err(|e| Error::io(&p, e))?;
            written.push(p);
        }
    }
    Ok(written)
}
