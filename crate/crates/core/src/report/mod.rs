//! Tables and plots for a finished run.

pub mod normalize;
pub mod svg;
pub mod tables;

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pipeline::load_records;

pub use normalize::{
    min_max, normalize_cells, normalize_for_radar, Metric, NormalizationMode, RadarCell, RadarReport,
    RadarRow,
};
pub use svg::{bar_svg, radar_svg, BarMetric};
pub use tables::{all_tables, emit_tables, Table, NA};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
    Svg,
}

impl std::str::FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            "svg" => Ok(Format::Svg),
            _ => Err(Error::InvalidArgument(format!("unknown report format {s:?}"))),
        }
    }
}

fn write(path: PathBuf, text: &str, out: &mut Vec<PathBuf>) -> Result<()> {
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    out.push(path);
    Ok(())
}

/// Renders `<run>/tables` and `<run>/plots` from the records of a run.
pub fn report_run(run_dir: &Path, formats: &[Format], mode: NormalizationMode) -> Result<Vec<PathBuf>> {
    let records = load_records(run_dir)?;
    if records.is_empty() {
        return Err(Error::Empty(format!("no records under {}", run_dir.display())));
    }
    let mut written = emit_tables(
        &records,
        &run_dir.join("tables"),
        formats.contains(&Format::Csv),
        formats.contains(&Format::Json),
    )?;
    let has_generators = records.iter().any(|r| r.generator_id.is_some());
    let plots = run_dir.join("plots");
    if has_generators && (formats.contains(&Format::Json) || formats.contains(&Format::Svg)) {
        fs::create_dir_all(&plots).map_err(|e| Error::io(&plots, e))?;
        let radar = normalize_for_radar(&records, mode)?;
        if formats.contains(&Format::Json) {
            write(plots.join("radar.json"), &serde_json::to_string_pretty(&radar)?, &mut written)?;
        }
        if formats.contains(&Format::Svg) {
            write(plots.join("radar.svg"), &radar_svg(&radar.rows)?, &mut written)?;
        }
    }
    if formats.contains(&Format::Svg) {
        fs::create_dir_all(&plots).map_err(|e| Error::io(&plots, e))?;
        let mut datasets: Vec<&String> = records.iter().map(|r| &r.dataset_id).collect();
        datasets.sort();
        datasets.dedup();
        for d in datasets {
            for m in [BarMetric::Utility, BarMetric::Robustness] {
                let name = format!("{}_{d}.svg", m.label().to_lowercase());
                write(plots.join(name), &bar_svg(&records, d, m)?, &mut written)?;
            }
        }
    }
    Ok(written)
}
