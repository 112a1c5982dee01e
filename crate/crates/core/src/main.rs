use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use trilemma_eval::adversarial::{adversarial_accuracy, AttackConfig};
use trilemma_eval::config::RunConfig;
use trilemma_eval::data::{
    load_image_dataset_with, stratified_split_indices, DatasetRole, LabeledImageDataset, LoadOptions,
    SplitRatios,
};
use trilemma_eval::features::{fallback_features, read_embeddings, write_embeddings};
use trilemma_eval::fid::fid_from_features;
use trilemma_eval::genbench::{benchmark_generator, GeneratorAdapter, StubGenerator};
use trilemma_eval::manifold::{precision, recall};
use trilemma_eval::nn::{checkpoint, evaluate, train, Architecture, Classifier, TrainHyper, Variant, DEFAULT_HIDDEN};
use trilemma_eval::pipeline::run_experiment;
use trilemma_eval::report::{report_run, Format, NormalizationMode};
use trilemma_eval::ssim::{privacy_score, PrivacyConfig, SsimParams};

#[derive(Parser)]
#[command(name = "trilemma-eval", version, about = "Evaluate synthetic image datasets against real data")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantArg {
    FourBlock,
    ThreeBlock,
}

impl From<VariantArg> for Variant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::FourBlock => Variant::FourBlock,
            VariantArg::ThreeBlock => Variant::ThreeBlock,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum AdapterArg {
    Cmd,
    Stub,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    CellRange,
    MeanRange,
}

#[derive(Subcommand)]
enum Cmd {
    /// Load a class-per-directory corpus and write its stratified split.
    Ingest {
        #[arg(long)]
        root: PathBuf,
        #[arg(long, default_value = "0.8,0.1,0.1")]
        split: SplitRatios,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Resize every image, as HEIGHTxWIDTH.
        #[arg(long, value_parser = parse_dims)]
        resize: Option<(usize, usize)>,
    },
    /// Write pixel-projection features for a corpus in GEVB format.
    Features {
        #[arg(long)]
        dir: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 64)]
        dim: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Precision and recall of two embedding files.
    Manifold {
        #[arg(long)]
        real: PathBuf,
        #[arg(long)]
        synth: PathBuf,
        #[arg(long, default_value_t = 3)]
        k: usize,
    },
    /// Frechet distance between two embedding files.
    Fid {
        #[arg(long)]
        real: PathBuf,
        #[arg(long)]
        synth: PathBuf,
    },
    /// Max-SSIM privacy score of a synthetic corpus against real images.
    Privacy {
        #[arg(long)]
        real: PathBuf,
        #[arg(long)]
        synth: PathBuf,
        #[arg(long, default_value_t = 100)]
        q: usize,
        #[arg(long, default_value_t = 10)]
        l: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 10)]
        audit_top: usize,
    },
    /// Train the classifier and save a GEVM checkpoint.
    Train {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        val: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "four-block")]
        variant: VariantArg,
        #[arg(long, default_value_t = DEFAULT_HIDDEN)]
        hidden: usize,
        #[arg(long, default_value_t = 30)]
        epochs: usize,
        #[arg(long, default_value_t = 32)]
        batch_size: usize,
        #[arg(long, default_value_t = 1e-3)]
        lr: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_parser = parse_dims)]
        resize: Option<(usize, usize)>,
    },
    /// Accuracy of a checkpoint on a labelled corpus.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        test: PathBuf,
        #[arg(long, default_value_t = 1)]
        top_k: usize,
    },
    /// DeepFool robustness of a checkpoint on a labelled corpus.
    Attack {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        test: PathBuf,
        #[arg(long, default_value_t = 5)]
        iters: usize,
        #[arg(long, default_value_t = 0.02)]
        overshoot: f64,
        /// Leave perturbed pixels outside [0, 1].
        #[arg(long)]
        no_clamp: bool,
        #[arg(long, default_value_t = 1)]
        top_k: usize,
    },
    /// Measure generator sampling speed.
    Bench {
        #[arg(long, value_enum)]
        adapter: AdapterArg,
        /// Command template with {count} and {outdir} (and optionally {class}).
        #[arg(long)]
        template: Option<String>,
        #[arg(long)]
        class: Option<String>,
        #[arg(long, default_value_t = 128)]
        count: usize,
        #[arg(long, default_value_t = 1)]
        warmup: usize,
        /// Stub delay per sample in seconds.
        #[arg(long, default_value_t = 0.0)]
        delay: f64,
        /// Stub image size, as HEIGHTxWIDTH.
        #[arg(long, value_parser = parse_dims, default_value = "32x32")]
        dims: (usize, usize),
        #[arg(long)]
        workdir: Option<PathBuf>,
    },
    /// Run every experiment cell of a config.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 1)]
        workers: usize,
    },
    /// Write tables and plots for a run directory.
    Report {
        #[arg(long)]
        run: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "csv,json,svg")]
        format: Vec<Format>,
        #[arg(long, value_enum, default_value = "cell-range")]
        mode: ModeArg,
    },
}

fn parse_dims(s: &str) -> std::result::Result<(usize, usize), String> {
    let (h, w) = s.split_once('x').ok_or("expected HEIGHTxWIDTH")?;
    let h = h.trim().parse().map_err(|_| "bad height")?;
    let w = w.trim().parse().map_err(|_| "bad width")?;
    Ok((h, w))
}

fn load(dir: &Path, role: DatasetRole, resize: Option<(usize, usize)>) -> Result<LabeledImageDataset> {
    load_image_dataset_with(dir, role, LoadOptions { resize })
        .with_context(|| format!("loading {}", dir.display()))
}

fn print(v: &impl serde::Serialize) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

/// Loads a corpus at the checkpoint's input size.
fn load_for_model(m: &Classifier, dir: &Path) -> Result<LabeledImageDataset> {
    let (h, w, c) = m.architecture().input_dims();
    let ds = load(dir, DatasetRole::RealTest, Some((h, w)))?;
    if ds.dims().map(|d| d.2) != Some(c) {
        bail!("{} has a different channel count from the model ({c})", dir.display());
    }
    if ds.num_classes() != m.num_classes() {
        bail!(
            "{} has {} classes but the model predicts {}",
            dir.display(),
            ds.num_classes(),
            m.num_classes()
        );
    }
    Ok(ds)
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Cmd::Ingest {
            root,
            split,
            seed,
            out,
            resize,
        } => {
            let ds = load(&root, DatasetRole::RealTrain, resize)?;
            let idx = stratified_split_indices(&ds, split, seed)?;
            let ids = |v: &[usize]| v.iter().map(|&i| ds.ids()[i].clone()).collect::<Vec<_>>();
            std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
            let doc = json!({
                "root": root,
                "seed": seed,
                "ratios": split,
                "class_names": ds.class_names(),
                "dims": ds.dims(),
                "train": ids(&idx.train),
                "val": ids(&idx.val),
                "test": ids(&idx.test),
            });
            let path = out.join("splits.json");
            std::fs::write(&path, serde_json::to_string_pretty(&doc)?)?;
            print(&json!({
                "images": ds.len(),
                "classes": ds.num_classes(),
                "train": idx.train.len(),
                "val": idx.val.len(),
                "test": idx.test.len(),
                "splits": path,
            }))
        }
        Cmd::Features { dir, out, dim, seed } => {
            let ds = load(&dir, DatasetRole::RealTrain, None)?;
            let fs = fallback_features(&ds, dim, seed)?;
            write_embeddings(&fs, &out)?;
            print(&json!({ "rows": fs.rows(), "dim": fs.dim(), "out": out }))
        }
        Cmd::Manifold { real, synth, k } => {
            let r = read_embeddings(&real)?;
            let s = read_embeddings(&synth)?;
            print(&json!({
                "precision": precision(&r, &s, k)?,
                "recall": recall(&r, &s, k)?,
                "k": k,
            }))
        }
        Cmd::Fid { real, synth } => {
            let v = fid_from_features(&read_embeddings(&real)?, &read_embeddings(&synth)?)?;
            print(&v)
        }
        Cmd::Privacy {
            real,
            synth,
            q,
            l,
            seed,
            audit_top,
        } => {
            let r = load(&real, DatasetRole::RealTrain, None)?;
            let dims = r.dims().map(|(h, w, _)| (h, w));
            let s = load(&synth, DatasetRole::Synthetic, dims)?;
            let cfg = PrivacyConfig { q, l, seed, audit_top };
            print(&privacy_score(&s, &r, &cfg, &SsimParams::default())?)
        }
        Cmd::Train {
            train: train_dir,
            val,
            out,
            variant,
            hidden,
            epochs,
            batch_size,
            lr,
            seed,
            resize,
        } => {
            let tr = load(&train_dir, DatasetRole::RealTrain, resize)?;
            let dims = tr.dims().context("empty training set")?;
            let va = load(&val, DatasetRole::RealVal, Some((dims.0, dims.1)))?;
            let arch = Architecture::new(dims, Variant::from(variant).block_channels(), hidden, tr.num_classes())?;
            let init = Classifier::new(arch, seed)?;
            let hyper = TrainHyper {
                epochs,
                batch_size,
                learning_rate: lr,
                seed,
                ..TrainHyper::default()
            };
            let outcome = train(&init, &tr, &va, &hyper)?;
            checkpoint::save(&outcome.model, &out)?;
            print(&json!({
                "best_epoch": outcome.best_epoch,
                "curve": outcome.curve,
                "checkpoint": out,
            }))
        }
        Cmd::Eval { model, test, top_k } => {
            let m = checkpoint::load(&model)?;
            let ds = load_for_model(&m, &test)?;
            print(&evaluate(&m, &ds, top_k)?)
        }
        Cmd::Attack {
            model,
            test,
            iters,
            overshoot,
            no_clamp,
            top_k,
        } => {
            let m = checkpoint::load(&model)?;
            let ds = load_for_model(&m, &test)?;
            let cfg = AttackConfig {
                max_iterations: iters,
                overshoot,
                clamp_to_valid_range: !no_clamp,
            };
            print(&adversarial_accuracy(&m, &ds, &cfg, top_k)?)
        }
        Cmd::Bench {
            adapter,
            template,
            class,
            count,
            warmup,
            delay,
            dims,
            workdir,
        } => {
            let g = match adapter {
                AdapterArg::Cmd => GeneratorAdapter::ExternalCommand {
                    template: template.context("--template is required for the cmd adapter")?,
                    class,
                },
                AdapterArg::Stub => GeneratorAdapter::Stub(StubGenerator {
                    per_sample_delay: delay,
                    height: dims.0,
                    width: dims.1,
                    channels: 3,
                    seed: 0,
                }),
            };
            let tmp;
            let work = match workdir {
                Some(w) => w,
                None => {
                    tmp = std::env::temp_dir().join(format!("trilemma-bench-{}", std::process::id()));
                    tmp.clone()
                }
            };
            let r = benchmark_generator(&g, count, warmup, &work)?;
            print(&r)
        }
        Cmd::Run { config, workers } => {
            let cfg = RunConfig::load(&config)?;
            let summary = run_experiment(&cfg, workers)?;
            print(&summary)?;
            if !summary.failed.is_empty() {
                bail!("{} cell(s) failed: {}", summary.failed.len(), summary.failed.join(", "));
            }
            Ok(())
        }
        Cmd::Report { run, format, mode } => {
            let mode = match mode {
                ModeArg::CellRange => NormalizationMode::CellRange,
                ModeArg::MeanRange => NormalizationMode::MeanRange,
            };
            let files = report_run(&run, &format, mode)?;
            print(&files)
        }
    }
}
