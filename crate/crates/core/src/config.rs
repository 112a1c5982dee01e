//! JSON run configuration.
//!
//! Relative paths are resolved against the directory holding the config
//! file. The fingerprint is the SHA-256 of the resolved config serialized
//! as JSON; records computed under a different fingerprint are recomputed.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::adversarial::AttackConfig;
use crate::data::SplitRatios;
use crate::error::{Error, Result};
use crate::genbench::GeneratorAdapter;
use crate::nn::{TrainHyper, Variant, DEFAULT_HIDDEN};
use crate::ssim::{PrivacyConfig, SsimParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    BaselineReal,
    GeometricDa,
    DataAnonymization,
    SyntheticDa,
    CombinedDa,
}

impl Family {
    pub const ALL: [Family; 5] = [
        Family::BaselineReal,
        Family::GeometricDa,
        Family::DataAnonymization,
        Family::SyntheticDa,
        Family::CombinedDa,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::BaselineReal => "baseline-real",
            Family::GeometricDa => "geometric-da",
            Family::DataAnonymization => "data-anonymization",
            Family::SyntheticDa => "synthetic-da",
            Family::CombinedDa => "combined-da",
        }
    }

    /// Table label.
    pub fn label(self) -> &'static str {
        match self {
            Family::BaselineReal => "Baseline Real",
            Family::GeometricDa => "Geometric DA",
            Family::DataAnonymization => "Data Anonymization",
            Family::SyntheticDa => "Synthetic DA",
            Family::CombinedDa => "Combined DA",
        }
    }

    pub fn uses_synthetic(self) -> bool {
        !matches!(self, Family::BaselineReal | Family::GeometricDa)
    }
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ExperimentVariant {
    pub family: Family,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub multiplier: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub generator_id: Option<String>,
}

impl ExperimentVariant {
    pub fn baseline(family: Family) -> Result<Self> {
        Self::new(family, None, None)
    }

    pub fn synthetic(family: Family, multiplier: u32, generator_id: &str) -> Result<Self> {
        Self::new(family, Some(multiplier), Some(generator_id.to_string()))
    }

    pub fn new(family: Family, multiplier: Option<u32>, generator_id: Option<String>) -> Result<Self> {
        let synthetic = family.uses_synthetic();
        if synthetic != multiplier.is_some() || synthetic != generator_id.is_some() {
            return Err(Error::Config(format!(
                "{family} {} a multiplier and generator",
                if synthetic { "needs" } else { "takes no" }
            )));
        }
        if multiplier == Some(0) {
            return Err(Error::Config("multiplier must be >= 1".into()));
        }
        Ok(Self {
            family,
            multiplier,
            generator_id,
        })
    }

    /// Stable identifier, e.g. `synthetic-da.x2.stub`.
    pub fn key(&self) -> String {
        match (&self.multiplier, &self.generator_id) {
            (Some(m), Some(g)) => format!("{}.x{m}.{g}", self.family),
            _ => self.family.to_string(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmbeddingPaths {
    /// GEVB file used for precision and recall.
    #[serde(default)]
    pub precision_recall: Option<PathBuf>,
    /// GEVB file used for FID.
    #[serde(default)]
    pub fid: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub id: String,
    pub root: PathBuf,
    #[serde(default)]
    pub resize: Option<(usize, usize)>,
    #[serde(default)]
    pub split: SplitRatios,
    /// Embeddings with one row per image of `root`, in load order.
    #[serde(default)]
    pub embeddings: EmbeddingPaths,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoolConfig {
    /// Class-per-subdirectory PNG corpus of pre-generated samples.
    pub dir: PathBuf,
    #[serde(default)]
    pub embeddings: EmbeddingPaths,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    pub count: usize,
    pub warmup: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            count: 128,
            warmup: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorConfig {
    pub id: String,
    pub adapter: GeneratorAdapter,
    #[serde(default)]
    pub bench: BenchConfig,
    /// Synthetic pool per dataset id. Missing pools are generated through
    /// the adapter into the run directory, one call per class.
    #[serde(default)]
    pub pools: BTreeMap<String, PoolConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlanConfig {
    pub families: Vec<Family>,
    pub multipliers: Vec<u32>,
}

impl Default for PlanConfig {
    fn default() -> Self {
        Self {
            families: Family::ALL.to_vec(),
            multipliers: vec![1, 2, 3],
        }
    }
}

impl PlanConfig {
    /// Baseline families once, synthetic families per generator and
    /// multiplier, in family order.
    pub fn variants(&self, generators: &[String]) -> Result<Vec<ExperimentVariant>> {
        let mut families = self.families.clone();
        families.sort();
        families.dedup();
        let mut multipliers = self.multipliers.clone();
        multipliers.sort();
        multipliers.dedup();
        let mut out = Vec::new();
        for f in families {
            if !f.uses_synthetic() {
                out.push(ExperimentVariant::baseline(f)?);
                continue;
            }
            for g in generators {
                for &m in &multipliers {
                    out.push(ExperimentVariant::synthetic(f, m, g)?);
                }
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Seeds {
    pub split: u64,
    pub augment: u64,
    pub draw: u64,
    pub init: u64,
    pub train: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifierConfig {
    pub variant: Variant,
    pub hidden: usize,
    pub train: TrainHyper,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self {
            variant: Variant::FourBlock,
            hidden: DEFAULT_HIDDEN,
            train: TrainHyper::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureConfig {
    pub k: usize,
    /// Width of the pixel-projection features used when no embedding file
    /// is configured.
    pub fallback_dim: usize,
    pub fallback_seed: u64,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            k: crate::manifold::DEFAULT_K,
            fallback_dim: 64,
            fallback_seed: 0,
        }
    }
}

fn default_top_k() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub output_dir: PathBuf,
    /// Free-form hardware description copied into reports.
    #[serde(default)]
    pub host: String,
    pub datasets: Vec<DatasetConfig>,
    #[serde(default)]
    pub generators: Vec<GeneratorConfig>,
    #[serde(default)]
    pub plan: PlanConfig,
    #[serde(default)]
    pub seeds: Seeds,
    #[serde(default)]
    pub classifier: ClassifierConfig,
    #[serde(default)]
    pub attack: AttackConfig,
    #[serde(default)]
    pub privacy: PrivacyConfig,
    #[serde(default)]
    pub ssim: SsimParams,
    #[serde(default)]
    pub features: FeatureConfig,
    #[serde(default = "default_top_k")]
    pub top_k: usize,
}

fn valid_id(id: &str) -> bool {
    !id.is_empty()
        && id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
}

fn resolve(base: &Path, p: &mut PathBuf) {
    if p.is_relative() {
        *p = base.join(&*p);
    }
}

fn resolve_embeddings(base: &Path, e: &mut EmbeddingPaths) {
    for p in [&mut e.precision_recall, &mut e.fid].into_iter().flatten() {
        resolve(base, p);
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file and resolves its relative paths.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_json(&text)?;
        let base = path
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_default();
        let base = if base.as_os_str().is_empty() {
            std::env::current_dir().map_err(|e| Error::io(".", e))?
        } else {
            base
        };
        cfg.resolve_paths(&base);
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        resolve(base, &mut self.output_dir);
        for d in &mut self.datasets {
            resolve(base, &mut d.root);
            resolve_embeddings(base, &mut d.embeddings);
        }
        for g in &mut self.generators {
            for p in g.pools.values_mut() {
                resolve(base, &mut p.dir);
                resolve_embeddings(base, &mut p.embeddings);
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.datasets.is_empty() {
            return Err(Error::Config("at least one dataset is required".into()));
        }
        let mut seen = std::collections::BTreeSet::new();
        for id in self.datasets.iter().map(|d| &d.id) {
            if !valid_id(id) || !seen.insert(id.clone()) {
                return Err(Error::Config(format!("invalid or duplicate dataset id {id:?}")));
            }
        }
        let mut gens = std::collections::BTreeSet::new();
        for g in &self.generators {
            if !valid_id(&g.id) || !gens.insert(g.id.clone()) {
                return Err(Error::Config(format!("invalid or duplicate generator id {:?}", g.id)));
            }
            g.adapter.validate()?;
            if let Some(d) = g.pools.keys().find(|d| !seen.contains(*d)) {
                return Err(Error::Config(format!("generator {} has a pool for unknown dataset {d}", g.id)));
            }
        }
        if self.plan.multipliers.iter().any(|&m| m == 0) {
            return Err(Error::Config("multipliers must be >= 1".into()));
        }
        if self.top_k == 0 {
            return Err(Error::Config("top_k must be >= 1".into()));
        }
        self.classifier.train.validate()?;
        self.attack.validate()?;
        self.ssim.validate()?;
        Ok(())
    }

    pub fn generator_ids(&self) -> Vec<String> {
        self.generators.iter().map(|g| g.id.clone()).collect()
    }

    pub fn fingerprint(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&bytes))
    }
}

/// SHA-256 of a config fingerprint combined with a cell key.
pub fn cell_fingerprint(config_fingerprint: &str, key: &str) -> String {
    let mut h = Sha256::new();
    h.update(config_fingerprint.as_bytes());
    h.update(b"\0");
    h.update(key.as_bytes());
    hex::encode(h.finalize())
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "output_dir": "out",
        "datasets": [{"id": "toy", "root": "data/toy"}],
        "generators": [{"id": "stub", "adapter": {"kind": "stub", "per_sample_delay": 0.0,
            "height": 8, "width": 8, "channels": 1, "seed": 0}}]
    }"#;

    #[test]
    fn defaults_and_paths() {
        let mut cfg = RunConfig::from_json(MINIMAL).unwrap();
        assert_eq!(cfg.classifier.train.epochs, 30);
        assert_eq!(cfg.attack.max_iterations, 5);
        assert_eq!(cfg.privacy.q, 100);
        assert_eq!(cfg.features.k, 3);
        cfg.resolve_paths(Path::new("/cfg"));
        assert_eq!(cfg.datasets[0].root, Path::new("/cfg/data/toy"));
        assert_eq!(cfg.output_dir, Path::new("/cfg/out"));
    }

    #[test]
    fn plan_collapses_baselines() {
        let cfg = RunConfig::from_json(MINIMAL).unwrap();
        let v = cfg.plan.variants(&cfg.generator_ids()).unwrap();
        assert_eq!(v.len(), 11);
        assert_eq!(v[0].key(), "baseline-real");
        assert_eq!(v[2].key(), "data-anonymization.x1.stub");
        let two = PlanConfig {
            families: vec![Family::BaselineReal, Family::SyntheticDa],
            multipliers: vec![1],
        };
        assert_eq!(two.variants(&["g".into()]).unwrap().len(), 2);
    }

    #[test]
    fn variant_invariants() {
        assert!(ExperimentVariant::new(Family::BaselineReal, Some(1), None).is_err());
        assert!(ExperimentVariant::new(Family::SyntheticDa, None, Some("g".into())).is_err());
        assert!(ExperimentVariant::synthetic(Family::SyntheticDa, 0, "g").is_err());
    }

    #[test]
    fn fingerprint_tracks_content() {
        let a = RunConfig::from_json(MINIMAL).unwrap();
        let mut b = a.clone();
        assert_eq!(a.fingerprint(), b.fingerprint());
        b.seeds.train = 9;
        assert_ne!(a.fingerprint(), b.fingerprint());
        assert_ne!(cell_fingerprint("x", "a"), cell_fingerprint("x", "b"));
    }

    #[test]
    fn rejects_bad_ids_and_unknown_fields() {
        let bad = MINIMAL.replace("\"toy\"", "\"t/y\"");
        assert!(RunConfig::from_json(&bad).is_err());
        let extra = MINIMAL.replace("\"output_dir\"", "\"bogus\": 1, \"output_dir\"");
        assert!(RunConfig::from_json(&extra).is_err());
    }
}
