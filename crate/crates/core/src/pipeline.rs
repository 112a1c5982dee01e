//! Experiment orchestration over (dataset, experiment variant) cells.
//!
//! Run directory layout:
//!
//! ```text
//! run.json                      resolved config and fingerprint
//! splits/<dataset>.json         sample ids per split
//! pools/<generator>/<dataset>/  generated synthetic pools
//! bench/<generator>.json        sampling-speed measurement
//! generators/<gen>.<ds>.json    precision, recall, FID and privacy
//! records/<ds>.<variant>.json   one MetricsRecord per cell
//! checkpoints/<ds>.<variant>.gevm
//! summary.json                  executed, skipped and failed cells
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::adversarial::{adversarial_accuracy, RobustnessReport};
use crate::augment::geometric_augment;
use crate::config::{
    cell_fingerprint, DatasetConfig, EmbeddingPaths, ExperimentVariant, Family, GeneratorConfig,
    RunConfig, Seeds,
};
use crate::data::{
    base_id, load_image_dataset_with, stratified_split_indices, DatasetRole, LabeledImageDataset,
    LoadOptions, SplitIndices,
};
use crate::error::{Error, Result};
use crate::features::{fallback_features, read_embeddings, FeatureSet};
use crate::fid::fid_from_features;
use crate::genbench::{benchmark_generator, BenchmarkResult, GeneratorAdapter};
use crate::manifold::{precision, recall};
use crate::nn::{checkpoint, evaluate, train, Architecture, Classifier, EpochRecord, EvalResult};
use crate::ssim::{privacy_score, PrivacyReport};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "kebab-case")]
pub enum CellStatus {
    Ok,
    Failed { error: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSummary {
    pub train_size: usize,
    pub class_counts: Vec<usize>,
    pub best_epoch: usize,
    pub curve: Vec<EpochRecord>,
}

/// One (dataset, variant) cell. `None` metric slots are not applicable to
/// the cell (generator metrics on baselines) or missing because it failed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub key: String,
    pub dataset_id: String,
    pub generator_id: Option<String>,
    pub variant: ExperimentVariant,
    pub fidelity: Option<f64>,
    pub diversity: Option<f64>,
    pub fid: Option<f64>,
    pub sampling_speed: Option<f64>,
    pub utility: Option<EvalResult>,
    pub robustness: Option<RobustnessReport>,
    pub privacy: Option<f64>,
    pub training: Option<TrainingSummary>,
    /// Training samples whose source id is in the real test split.
    pub test_overlap: usize,
    pub seeds: Seeds,
    pub host: String,
    pub fingerprint: String,
    pub status: CellStatus,
}

impl MetricsRecord {
    pub fn is_ok(&self) -> bool {
        self.status == CellStatus::Ok
    }
}

/// Generator-level metrics for one dataset, shared by all its cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorMetrics {
    pub generator_id: String,
    pub dataset_id: String,
    pub fidelity: f64,
    pub diversity: f64,
    pub fid: f64,
    pub privacy: PrivacyReport,
    pub pool_size: usize,
    pub fingerprint: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRecord {
    pub result: BenchmarkResult,
    pub host: String,
    pub fingerprint: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub fingerprint: String,
    pub executed: Vec<String>,
    pub skipped: Vec<String>,
    pub failed: Vec<String>,
    #[serde(skip)]
    pub records: Vec<MetricsRecord>,
}

#[derive(Serialize)]
struct RunFile<'a> {
    fingerprint: &'a str,
    config: &'a RunConfig,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let text = serde_json::to_string_pretty(value)?;
    let tmp = path.with_extension("json.tmp");
    fs::write(&tmp, text).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Option<T> {
    let text = fs::read_to_string(path).ok()?;
    serde_json::from_str(&text).ok()
}

/// Keeps the pool classes named like `class_names`, relabelled to their
/// position in it. Other pool classes are dropped.
pub fn align_pool(pool: &LabeledImageDataset, class_names: &[String]) -> Result<LabeledImageDataset> {
    let map: BTreeMap<&str, usize> = class_names
        .iter()
        .enumerate()
        .map(|(i, n)| (n.as_str(), i))
        .collect();
    let mut images = Vec::new();
    let mut labels = Vec::new();
    let mut ids = Vec::new();
    for ((img, &l), id) in pool.images().iter().zip(pool.labels()).zip(pool.ids()) {
        if let Some(&target) = map.get(pool.class_names()[l].as_str()) {
            images.push(img.clone());
            labels.push(target);
            ids.push(id.clone());
        }
    }
    LabeledImageDataset::new(images, labels, ids, class_names.to_vec(), DatasetRole::Synthetic)
}

/// Class-stratified draw of `multiplier × real_counts[c]` pool images per
/// class. Each class's pool order is a fixed seeded permutation and the
/// draw takes its prefix, so smaller multipliers are subsets of larger ones.
pub fn stratified_draw(
    pool: &LabeledImageDataset,
    real_counts: &[usize],
    multiplier: u32,
    seed: u64,
) -> Result<LabeledImageDataset> {
    let by_class = pool.class_indices();
    let mut chosen = Vec::new();
    for (c, &n) in real_counts.iter().enumerate() {
        let required = n * multiplier as usize;
        let mut idx = by_class.get(c).cloned().unwrap_or_default();
        if idx.len() < required {
            return Err(Error::InsufficientPool {
                class: pool
                    .class_names()
                    .get(c)
                    .cloned()
                    .unwrap_or_else(|| c.to_string()),
                required,
                available: idx.len(),
            });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(c as u64);
        idx.shuffle(&mut rng);
        chosen.extend_from_slice(&idx[..required]);
    }
    Ok(pool.subset(&chosen, DatasetRole::Synthetic))
}

/// Training set for one experiment family. `pool` must already be aligned
/// to the real class list.
pub fn build_training_set(
    variant: &ExperimentVariant,
    real_train: &LabeledImageDataset,
    pool: Option<&LabeledImageDataset>,
    seeds: &Seeds,
) -> Result<LabeledImageDataset> {
    let augment_real = || geometric_augment(real_train, seeds.augment);
    let draw = || -> Result<LabeledImageDataset> {
        let pool = pool.ok_or_else(|| Error::Config(format!("{} needs a synthetic pool", variant.family)))?;
        let m = variant.multiplier.unwrap_or(1);
        stratified_draw(pool, &real_train.class_counts(), m, seeds.draw)
    };
    let role = DatasetRole::RealTrain;
    match variant.family {
        Family::BaselineReal => Ok(real_train.clone()),
        Family::GeometricDa => augment_real(),
        Family::DataAnonymization => draw(),
        Family::SyntheticDa => real_train.concat(&draw()?, role),
        Family::CombinedDa => {
            let synth = geometric_augment(&draw()?, seeds.augment.wrapping_add(1))?;
            augment_real()?.concat(&synth, role)
        }
    }
}

/// Number of training samples derived from an id in `test_ids`.
pub fn leakage(training: &LabeledImageDataset, test_ids: &BTreeSet<String>) -> usize {
    training
        .ids()
        .iter()
        .filter(|id| test_ids.contains(base_id(id)))
        .count()
}

struct PreparedDataset {
    config: DatasetConfig,
    full: LabeledImageDataset,
    split: SplitIndices,
    train: LabeledImageDataset,
    val: LabeledImageDataset,
    test: LabeledImageDataset,
}

fn prepare_dataset(cfg: &RunConfig, d: &DatasetConfig, run_dir: &Path) -> Result<PreparedDataset> {
    let opts = LoadOptions { resize: d.resize };
    let full = load_image_dataset_with(&d.root, DatasetRole::RealTrain, opts)?;
    let split = stratified_split_indices(&full, d.split, cfg.seeds.split)?;
    let ids = |idx: &[usize]| idx.iter().map(|&i| full.ids()[i].clone()).collect::<Vec<_>>();
    write_json(
        &run_dir.join("splits").join(format!("{}.json", d.id)),
        &serde_json::json!({
            "class_names": full.class_names(),
            "train": ids(&split.train),
            "val": ids(&split.val),
            "test": ids(&split.test),
        }),
    )?;
    Ok(PreparedDataset {
        train: full.subset(&split.train, DatasetRole::RealTrain),
        val: full.subset(&split.val, DatasetRole::RealVal),
        test: full.subset(&split.test, DatasetRole::RealTest),
        config: d.clone(),
        full,
        split,
    })
}

fn pool_dir(run_dir: &Path, g: &GeneratorConfig, dataset_id: &str) -> PathBuf {
    match g.pools.get(dataset_id) {
        Some(p) => p.dir.clone(),
        None => run_dir.join("pools").join(&g.id).join(dataset_id),
    }
}

/// Generates a pool through the adapter when none is configured. Each class
/// gets `count` samples in its own subdirectory.
fn materialize_pool(g: &GeneratorConfig, ds: &PreparedDataset, count: usize, dir: &Path) -> Result<()> {
    let done = dir.join(".complete");
    if done.exists() {
        return Ok(());
    }
    for (c, name) in ds.full.class_names().iter().enumerate() {
        let class_dir = dir.join(name);
        if class_dir.exists() {
            fs::remove_dir_all(&class_dir).map_err(|e| Error::io(&class_dir, e))?;
        }
        match &g.adapter {
            GeneratorAdapter::Stub(s) => {
                let mut s = s.clone();
                s.per_sample_delay = 0.0;
                s.generate(count, c as u64 + 1, &class_dir)?
            }
            GeneratorAdapter::ExternalCommand { template, .. } => GeneratorAdapter::ExternalCommand {
                template: template.clone(),
                class: Some(name.clone()),
            }
            .generate(count, &class_dir)?,
        }
    }
    fs::write(&done, b"").map_err(|e| Error::io(&done, e))
}

fn load_pool(cfg: &RunConfig, g: &GeneratorConfig, ds: &PreparedDataset, run_dir: &Path) -> Result<LabeledImageDataset> {
    let dir = pool_dir(run_dir, g, &ds.config.id);
    if !g.pools.contains_key(&ds.config.id) {
        let max_m = cfg.plan.multipliers.iter().copied().max().unwrap_or(1) as usize;
        let per_class = ds.train.class_counts().into_iter().max().unwrap_or(0) * max_m;
        materialize_pool(g, ds, per_class.max(cfg.privacy.q), &dir)?;
    }
    let (h, w, _) = ds.full.dims().expect("non-empty dataset");
    let opts = LoadOptions { resize: Some((h, w)) };
    let pool = load_image_dataset_with(&dir, DatasetRole::Synthetic, opts)?;
    if pool.dims() != ds.full.dims() {
        return Err(Error::Config(format!(
            "synthetic pool {} has a different channel count from the real data",
            dir.display()
        )));
    }
    let id = g.id.clone();
    Ok(pool.map_ids(move |s| format!("{id}:{s}")))
}

fn features_for(
    path: Option<&PathBuf>,
    ds: &LabeledImageDataset,
    rows: Option<&[usize]>,
    cfg: &RunConfig,
) -> Result<FeatureSet> {
    let Some(path) = path else {
        return fallback_features(ds, cfg.features.fallback_dim, cfg.features.fallback_seed);
    };
    let all = read_embeddings(path)?;
    let Some(rows) = rows else {
        if all.rows() != ds.len() {
            return Err(Error::Config(format!(
                "{} has {} rows, expected one per image ({})",
                path.display(),
                all.rows(),
                ds.len()
            )));
        }
        return Ok(all);
    };
    let values = rows
        .iter()
        .map(|&r| {
            if r >= all.rows() {
                Err(Error::Config(format!("{} has too few rows", path.display())))
            } else {
                Ok(all.row(r).to_vec())
            }
        })
        .collect::<Result<Vec<_>>>()?
        .concat();
    FeatureSet::new(values, all.dim(), all.source())
}

fn real_features(ds: &PreparedDataset, which: Option<&PathBuf>, cfg: &RunConfig) -> Result<FeatureSet> {
    if let Some(p) = which {
        let all = read_embeddings(p)?;
        if all.rows() != ds.full.len() {
            return Err(Error::Config(format!(
                "{} has {} rows but the dataset has {} images",
                p.display(),
                all.rows(),
                ds.full.len()
            )));
        }
    }
    features_for(which, &ds.train, which.map(|_| ds.split.train.as_slice()), cfg)
}

fn compute_generator_metrics(
    cfg: &RunConfig,
    g: &GeneratorConfig,
    ds: &PreparedDataset,
    pool: &LabeledImageDataset,
    fingerprint: &str,
) -> Result<GeneratorMetrics> {
    let empty = EmbeddingPaths::default();
    let pool_emb = g.pools.get(&ds.config.id).map(|p| &p.embeddings).unwrap_or(&empty);
    let real_pr = real_features(ds, ds.config.embeddings.precision_recall.as_ref(), cfg)?;
    let synth_pr = features_for(pool_emb.precision_recall.as_ref(), pool, None, cfg)?;
    let real_fid = real_features(ds, ds.config.embeddings.fid.as_ref(), cfg)?;
    let synth_fid = features_for(pool_emb.fid.as_ref(), pool, None, cfg)?;
    let k = cfg.features.k;
    Ok(GeneratorMetrics {
        generator_id: g.id.clone(),
        dataset_id: ds.config.id.clone(),
        fidelity: precision(&real_pr, &synth_pr, k)?,
        diversity: recall(&real_pr, &synth_pr, k)?,
        fid: fid_from_features(&real_fid, &synth_fid)?,
        privacy: privacy_score(pool, &ds.train, &cfg.privacy, &cfg.ssim)?,
        pool_size: pool.len(),
        fingerprint: fingerprint.to_string(),
    })
}

fn bench(cfg: &RunConfig, g: &GeneratorConfig, run_dir: &Path, fingerprint: &str) -> Result<BenchRecord> {
    let path = run_dir.join("bench").join(format!("{}.json", g.id));
    let fp = cell_fingerprint(fingerprint, &format!("bench.{}", g.id));
    if let Some(r) = read_json::<BenchRecord>(&path).filter(|r| r.fingerprint == fp) {
        return Ok(r);
    }
    let work = run_dir.join("bench").join(&g.id);
    let result = benchmark_generator(&g.adapter, g.bench.count, g.bench.warmup, &work)?;
    fs::remove_dir_all(&work).map_err(|e| Error::io(&work, e))?;
    let rec = BenchRecord {
        result,
        host: cfg.host.clone(),
        fingerprint: fp,
    };
    write_json(&path, &rec)?;
    Ok(rec)
}

struct GeneratorState {
    pool: std::result::Result<LabeledImageDataset, String>,
    metrics: std::result::Result<GeneratorMetrics, String>,
    speed: std::result::Result<f64, String>,
}

fn generator_state(
    cfg: &RunConfig,
    g: &GeneratorConfig,
    ds: &PreparedDataset,
    run_dir: &Path,
    fingerprint: &str,
    speed: &std::result::Result<f64, String>,
) -> GeneratorState {
    let path = run_dir
        .join("generators")
        .join(format!("{}.{}.json", g.id, ds.config.id));
    let fp = cell_fingerprint(fingerprint, &format!("generator.{}.{}", g.id, ds.config.id));
    let cached = read_json::<GeneratorMetrics>(&path).filter(|m| m.fingerprint == fp);
    let pool = load_pool(cfg, g, ds, run_dir).and_then(|p| align_pool(&p, ds.full.class_names()));
    let metrics = match (&cached, &pool) {
        (Some(m), _) => Ok(m.clone()),
        (None, Ok(p)) => compute_generator_metrics(cfg, g, ds, p, &fp).and_then(|m| {
            write_json(&path, &m)?;
            Ok(m)
        }),
        (None, Err(e)) => Err(Error::Config(e.to_string())),
    };
    GeneratorState {
        pool: pool.map_err(|e| e.to_string()),
        metrics: metrics.map_err(|e| e.to_string()),
        speed: speed.clone(),
    }
}

struct Cell<'a> {
    key: String,
    dataset: &'a PreparedDataset,
    variant: ExperimentVariant,
    fingerprint: String,
    record_path: PathBuf,
}

fn run_cell(
    cfg: &RunConfig,
    cell: &Cell<'_>,
    state: Option<&GeneratorState>,
    run_dir: &Path,
) -> MetricsRecord {
    let mut rec = MetricsRecord {
        key: cell.key.clone(),
        dataset_id: cell.dataset.config.id.clone(),
        generator_id: cell.variant.generator_id.clone(),
        variant: cell.variant.clone(),
        fidelity: None,
        diversity: None,
        fid: None,
        sampling_speed: None,
        utility: None,
        robustness: None,
        privacy: None,
        training: None,
        test_overlap: 0,
        seeds: cfg.seeds,
        host: cfg.host.clone(),
        fingerprint: cell.fingerprint.clone(),
        status: CellStatus::Ok,
    };
    let mut errors = Vec::new();
    if let Some(s) = state {
        match &s.metrics {
            Ok(m) => {
                rec.fidelity = Some(m.fidelity);
                rec.diversity = Some(m.diversity);
                rec.fid = Some(m.fid);
                rec.privacy = Some(m.privacy.score);
            }
            Err(e) => errors.push(format!("generator metrics: {e}")),
        }
        match &s.speed {
            Ok(v) => rec.sampling_speed = Some(*v),
            Err(e) => errors.push(format!("sampling speed: {e}")),
        }
    }
    if let Err(e) = train_and_evaluate(cfg, cell, state, run_dir, &mut rec) {
        errors.push(e.to_string());
    }
    if !errors.is_empty() {
        rec.status = CellStatus::Failed {
            error: errors.join("; "),
        };
    }
    rec
}

fn train_and_evaluate(
    cfg: &RunConfig,
    cell: &Cell<'_>,
    state: Option<&GeneratorState>,
    run_dir: &Path,
    rec: &mut MetricsRecord,
) -> Result<()> {
    let ds = cell.dataset;
    let pool = match state.map(|s| &s.pool) {
        Some(Ok(p)) => Some(p),
        Some(Err(e)) => return Err(Error::Config(format!("synthetic pool: {e}"))),
        None => None,
    };
    let training = build_training_set(&cell.variant, &ds.train, pool, &cfg.seeds)?;
    let test_ids: BTreeSet<String> = ds.test.ids().iter().cloned().collect();
    rec.test_overlap = leakage(&training, &test_ids);
    if rec.test_overlap > 0 {
        return Err(Error::Config(format!(
            "{} training samples come from the test split",
            rec.test_overlap
        )));
    }
    let dims = ds.full.dims().expect("non-empty dataset");
    let arch = Architecture::new(
        dims,
        cfg.classifier.variant.block_channels(),
        cfg.classifier.hidden,
        ds.full.num_classes(),
    )?;
    let init = Classifier::new(arch, cfg.seeds.init)?;
    let hyper = crate::nn::TrainHyper {
        seed: cfg.seeds.train,
        ..cfg.classifier.train
    };
    let outcome = train(&init, &training, &ds.val, &hyper)?;
    let ckpt = run_dir.join("checkpoints").join(format!("{}.gevm", cell.key));
    fs::create_dir_all(ckpt.parent().unwrap()).map_err(|e| Error::io(&ckpt, e))?;
    checkpoint::save(&outcome.model, &ckpt)?;
    rec.training = Some(TrainingSummary {
        train_size: training.len(),
        class_counts: training.class_counts(),
        best_epoch: outcome.best_epoch,
        curve: outcome.curve,
    });
    rec.utility = Some(evaluate(&outcome.model, &ds.test, cfg.top_k)?);
    rec.robustness = Some(adversarial_accuracy(&outcome.model, &ds.test, &cfg.attack, cfg.top_k)?);
    Ok(())
}

/// Runs every cell of the plan, reusing records whose fingerprint matches.
/// Cell failures are recorded and do not stop other cells.
pub fn run_experiment(cfg: &RunConfig, workers: usize) -> Result<RunSummary> {
    cfg.validate()?;
    let run_dir = cfg.output_dir.clone();
    fs::create_dir_all(&run_dir).map_err(|e| Error::io(&run_dir, e))?;
    let fingerprint = cfg.fingerprint();
    write_json(
        &run_dir.join("run.json"),
        &RunFile {
            fingerprint: &fingerprint,
            config: cfg,
        },
    )?;

    let datasets = cfg
        .datasets
        .iter()
        .map(|d| prepare_dataset(cfg, d, &run_dir))
        .collect::<Result<Vec<_>>>()?;
    let variants = cfg.plan.variants(&cfg.generator_ids())?;

    let mut cells = Vec::new();
    for ds in &datasets {
        for v in &variants {
            let key = format!("{}.{}", ds.config.id, v.key());
            cells.push(Cell {
                fingerprint: cell_fingerprint(&fingerprint, &key),
                record_path: run_dir.join("records").join(format!("{key}.json")),
                key,
                dataset: ds,
                variant: v.clone(),
            });
        }
    }
    let cached: Vec<Option<MetricsRecord>> = cells
        .iter()
        .map(|c| {
            read_json::<MetricsRecord>(&c.record_path)
                .filter(|r| r.fingerprint == c.fingerprint && r.is_ok())
        })
        .collect();

    // Generator work is sequential: benchmarks must not overlap anything.
    let mut states: BTreeMap<(String, String), GeneratorState> = BTreeMap::new();
    let mut speeds = BTreeMap::new();
    for g in &cfg.generators {
        let pending: Vec<&Cell> = cells
            .iter()
            .zip(&cached)
            .filter(|(c, r)| r.is_none() && c.variant.generator_id.as_deref() == Some(&g.id))
            .map(|(c, _)| c)
            .collect();
        if pending.is_empty() {
            continue;
        }
        let speed = speeds
            .entry(g.id.clone())
            .or_insert_with(|| {
                bench(cfg, g, &run_dir, &fingerprint)
                    .map(|b| b.result.samples_per_second)
                    .map_err(|e| e.to_string())
            })
            .clone();
        for ds in &datasets {
            if pending.iter().any(|c| c.dataset.config.id == ds.config.id) {
                let st = generator_state(cfg, g, ds, &run_dir, &fingerprint, &speed);
                states.insert((g.id.clone(), ds.config.id.clone()), st);
            }
        }
    }

    let todo: Vec<usize> = (0..cells.len()).filter(|&i| cached[i].is_none()).collect();
    let work = |i: usize| -> MetricsRecord {
        let c = &cells[i];
        let state = c
            .variant
            .generator_id
            .as_ref()
            .and_then(|g| states.get(&(g.clone(), c.dataset.config.id.clone())));
        let rec = run_cell(cfg, c, state, &run_dir);
        if let Err(e) = write_json(&c.record_path, &rec) {
            let mut failed = rec.clone();
            failed.status = CellStatus::Failed { error: e.to_string() };
            return failed;
        }
        rec
    };
    let fresh: Vec<MetricsRecord> = run_parallel(&todo, workers, work)?;

    let mut fresh_iter = fresh.into_iter();
    let mut summary = RunSummary {
        fingerprint,
        executed: Vec::new(),
        skipped: Vec::new(),
        failed: Vec::new(),
        records: Vec::with_capacity(cells.len()),
    };
    for (c, cached) in cells.iter().zip(cached) {
        let rec = match cached {
            Some(r) => {
                summary.skipped.push(c.key.clone());
                r
            }
            None => {
                summary.executed.push(c.key.clone());
                fresh_iter.next().expect("one record per pending cell")
            }
        };
        if !rec.is_ok() {
            summary.failed.push(c.key.clone());
        }
        summary.records.push(rec);
    }
    write_json(&run_dir.join("summary.json"), &summary)?;
    Ok(summary)
}

#[cfg(feature = "parallel")]
fn run_parallel<F>(todo: &[usize], workers: usize, work: F) -> Result<Vec<MetricsRecord>>
where
    F: Fn(usize) -> MetricsRecord + Sync,
{
    use rayon::prelude::*;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    Ok(pool.install(|| todo.par_iter().map(|&i| work(i)).collect()))
}

#[cfg(not(feature = "parallel"))]
fn run_parallel<F>(todo: &[usize], _workers: usize, work: F) -> Result<Vec<MetricsRecord>>
where
    F: Fn(usize) -> MetricsRecord,
{
    Ok(todo.iter().map(|&i| work(i)).collect())
}

/// Reads all records of a run directory in key order.
pub fn load_records(run_dir: &Path) -> Result<Vec<MetricsRecord>> {
    let dir = run_dir.join("records");
    let mut paths: Vec<PathBuf> = fs::read_dir(&dir)
        .map_err(|e| Error::io(&dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .collect();
    paths.sort();
    paths
        .iter()
        .map(|p| {
            let text = fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            Ok(serde_json::from_str(&text)?)
        })
        .collect()
}
