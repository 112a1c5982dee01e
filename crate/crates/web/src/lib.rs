//! WebAssembly bindings for the static demo page in `www/`. The inner
//! functions take and return plain strings so they can be tested natively.

use serde::{Deserialize, Serialize};
use wasm_bindgen::prelude::*;

use trilemma_eval::adversarial::{deepfool_trace, AttackConfig, LinearModel};
use trilemma_eval::features::{FeatureSet, FeatureSource};
use trilemma_eval::manifold::{build_manifold, precision, recall};
use trilemma_eval::report::{normalize_cells, radar_svg, NormalizationMode, RadarCell};

type Out = Result<String, String>;

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

#[derive(Deserialize)]
struct PointSets {
    real: Vec<[f64; 2]>,
    synth: Vec<[f64; 2]>,
}

#[derive(Serialize)]
struct ManifoldView {
    precision: f64,
    recall: f64,
    real_radii: Vec<f64>,
    synth_radii: Vec<f64>,
}

/// Precision/recall of 2-D point sets plus the ball radii of each manifold.
pub fn manifold_json(points: &str, k: usize) -> Out {
    let p: PointSets = serde_json::from_str(points).map_err(err)?;
    let real = FeatureSet::from_rows(&p.real, FeatureSource::Fallback).map_err(err)?;
    let synth = FeatureSet::from_rows(&p.synth, FeatureSource::Fallback).map_err(err)?;
    let radii = |fs: &FeatureSet| -> Result<Vec<f64>, String> {
        Ok(build_manifold(fs, k).map_err(err)?.radii())
    };
    let view = ManifoldView {
        precision: precision(&real, &synth, k).map_err(err)?,
        recall: recall(&real, &synth, k).map_err(err)?,
        real_radii: radii(&real)?,
        synth_radii: radii(&synth)?,
    };
    serde_json::to_string(&view).map_err(err)
}

#[derive(Deserialize)]
struct AttackInput {
    weights: Vec<Vec<f64>>,
    bias: Vec<f64>,
    x: Vec<f64>,
    #[serde(default = "default_overshoot")]
    overshoot: f64,
    #[serde(default = "default_iterations")]
    max_iterations: usize,
}

fn default_overshoot() -> f64 {
    0.02
}

fn default_iterations() -> usize {
    5
}

/// DeepFool on a linear multi-class model, with every visited point.
pub fn deepfool_json(input: &str) -> Out {
    let a: AttackInput = serde_json::from_str(input).map_err(err)?;
    let model = LinearModel::new(a.weights, a.bias).map_err(err)?;
    let cfg = AttackConfig {
        max_iterations: a.max_iterations,
        overshoot: a.overshoot,
        clamp_to_valid_range: false,
    };
    let (outcome, trace) = deepfool_trace(&model, &a.x, &cfg).map_err(err)?;
    serde_json::to_string(&serde_json::json!({ "outcome": outcome, "trace": trace })).map_err(err)
}

/// Radar SVG from a CSV table with columns
/// `generator,fidelity,diversity,speed,utility,robustness,privacy`.
/// Empty cells count as missing.
pub fn radar_from_csv(table: &str, mean_range: bool) -> Out {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(table.as_bytes());
    let mut cells = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(err)?;
        if rec.len() != 7 {
            return Err(format!("row {}: expected 7 columns, found {}", i + 1, rec.len()));
        }
        let mut values = [None; 6];
        for (j, v) in values.iter_mut().enumerate() {
            let s = &rec[j + 1];
            if !s.is_empty() {
                *v = Some(s.parse::<f64>().map_err(|e| format!("row {}: {s:?}: {e}", i + 1))?);
            }
        }
        cells.push(RadarCell {
            generator_id: rec[0].to_string(),
            dataset_id: "demo".into(),
            values,
        });
    }
    let mode = if mean_range {
        NormalizationMode::MeanRange
    } else {
        NormalizationMode::CellRange
    };
    let report = normalize_cells(&cells, mode).map_err(err)?;
    radar_svg(&report.rows).map_err(err)
}

fn js(r: Out) -> Result<String, JsValue> {
    r.map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = manifold)]
pub fn manifold_js(points: &str, k: usize) -> Result<String, JsValue> {
    js(manifold_json(points, k))
}

#[wasm_bindgen(js_name = deepfool)]
pub fn deepfool_js(input: &str) -> Result<String, JsValue> {
    js(deepfool_json(input))
}

#[wasm_bindgen(js_name = radar)]
pub fn radar_js(table: &str, mean_range: bool) -> Result<String, JsValue> {
    js(radar_from_csv(table, mean_range))
}
