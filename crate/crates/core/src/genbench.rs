//! Sampling-speed measurement through generator adapters.
//!
//! External generators are shell command templates. `{count}` and `{outdir}`
//! are required placeholders, `{class}` is optional. The command runs once
//! per benchmark through `sh -c` and must leave exactly `{count}` PNG files
//! in `{outdir}`. Timing is monotonic wall-clock from spawn to exit, so
//! process start-up and file I/O are included.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::thread;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{read_png, write_png, Image};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StubGenerator {
    /// Seconds slept before producing each sample.
    pub per_sample_delay: f64,
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub seed: u64,
}

impl StubGenerator {
    pub fn validate(&self) -> Result<()> {
        if !(self.per_sample_delay >= 0.0) || !self.per_sample_delay.is_finite() {
            return Err(Error::InvalidArgument("stub delay must be a finite value >= 0".into()));
        }
        if self.height == 0 || self.width == 0 || !matches!(self.channels, 1 | 3) {
            return Err(Error::InvalidArgument("stub image must be non-empty with 1 or 3 channels".into()));
        }
        Ok(())
    }

    /// Seeded uniform-noise image number `index` in stream `stream`.
    pub fn sample(&self, stream: u64, index: u64) -> Image {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        rng.set_word_pos(u128::from(index) << 20);
        let n = self.height * self.width * self.channels;
        let pixels = (0..n).map(|_| rng.random::<f32>()).collect();
        Image::new(self.height, self.width, self.channels, pixels).expect("noise is in range")
    }

    /// Writes `count` samples into `dir` as `00000.png`, `00001.png`, ...
    pub fn generate(&self, count: usize, stream: u64, dir: &Path) -> Result<()> {
        self.validate()?;
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let delay = Duration::from_secs_f64(self.per_sample_delay);
        for i in 0..count {
            if !delay.is_zero() {
                thread::sleep(delay);
            }
            write_png(&self.sample(stream, i as u64), &dir.join(format!("{i:05}.png")))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum GeneratorAdapter {
    ExternalCommand {
        template: String,
        #[serde(default)]
        class: Option<String>,
    },
    Stub(StubGenerator),
}

impl GeneratorAdapter {
    pub fn validate(&self) -> Result<()> {
        match self {
            GeneratorAdapter::ExternalCommand { template, .. } => {
                for p in ["{count}", "{outdir}"] {
                    if !template.contains(p) {
                        return Err(Error::InvalidArgument(format!(
                            "generator command template must contain {p}"
                        )));
                    }
                }
                Ok(())
            }
            GeneratorAdapter::Stub(s) => s.validate(),
        }
    }

    pub fn render_command(&self, count: usize, outdir: &Path) -> Option<String> {
        match self {
            GeneratorAdapter::ExternalCommand { template, class } => Some(
                template
                    .replace("{count}", &count.to_string())
                    .replace("{outdir}", &outdir.display().to_string())
                    .replace("{class}", class.as_deref().unwrap_or("")),
            ),
            GeneratorAdapter::Stub(_) => None,
        }
    }

    /// Produces `count` samples in `outdir`.
    pub fn generate(&self, count: usize, outdir: &Path) -> Result<()> {
        match self {
            GeneratorAdapter::Stub(s) => s.generate(count, 0, outdir),
            GeneratorAdapter::ExternalCommand { .. } => {
                fs::create_dir_all(outdir).map_err(|e| Error::io(outdir, e))?;
                let cmd = self.render_command(count, outdir).expect("external adapter");
                let out = Command::new("sh")
                    .arg("-c")
                    .arg(&cmd)
                    .output()
                    .map_err(|e| Error::io(Path::new("sh"), e))?;
                if !out.status.success() {
                    let mut text = String::from_utf8_lossy(&out.stdout).into_owned();
                    text.push_str(&String::from_utf8_lossy(&out.stderr));
                    return Err(Error::GeneratorFailed {
                        status: out.status.to_string(),
                        output: text.trim().to_string(),
                    });
                }
                Ok(())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkResult {
    pub count: usize,
    pub warmup: usize,
    pub elapsed_seconds: f64,
    pub samples_per_second: f64,
    pub samples_dir: PathBuf,
}

/// Samples per second, `c / t`.
pub fn sampling_speed(count: usize, elapsed_seconds: f64) -> Result<f64> {
    if !(elapsed_seconds > 0.0) || !elapsed_seconds.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "elapsed time must be positive, got {elapsed_seconds}"
        )));
    }
    Ok(count as f64 / elapsed_seconds)
}

fn png_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("png")) {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

fn reset_dir(dir: &Path) -> Result<()> {
    if dir.exists() {
        fs::remove_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Runs `warmup` untimed samples, then times the generation of `count`
/// samples into `workdir/samples` and checks that exactly `count` decodable
/// PNG files were produced.
pub fn benchmark_generator(
    g: &GeneratorAdapter,
    count: usize,
    warmup: usize,
    workdir: &Path,
) -> Result<BenchmarkResult> {
    if count == 0 {
        return Err(Error::InvalidArgument("benchmark count must be >= 1".into()));
    }
    g.validate()?;
    if warmup > 0 {
        let warm = workdir.join("warmup");
        reset_dir(&warm)?;
        g.generate(warmup, &warm)?;
        fs::remove_dir_all(&warm).map_err(|e| Error::io(&warm, e))?;
    }
    let samples = workdir.join("samples");
    reset_dir(&samples)?;
    let start = Instant::now();
    g.generate(count, &samples)?;
    let elapsed = start.elapsed().as_secs_f64();

    let files = png_files(&samples)?;
    if files.len() != count {
        return Err(Error::CountMismatch {
            expected: count,
            found: files.len(),
        });
    }
    for f in &files {
        read_png(f)?;
    }
    Ok(BenchmarkResult {
        count,
        warmup,
        elapsed_seconds: elapsed,
        samples_per_second: sampling_speed(count, elapsed)?,
        samples_dir: samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stub(delay: f64) -> GeneratorAdapter {
        GeneratorAdapter::Stub(StubGenerator {
            per_sample_delay: delay,
            height: 4,
            width: 4,
            channels: 1,
            seed: 1,
        })
    }

    #[test]
    fn ratio_examples() {
        assert_eq!(sampling_speed(128, 10.0).unwrap(), 12.8);
        assert_eq!(sampling_speed(16, 100.0).unwrap(), 0.16);
        assert_eq!(sampling_speed(1, 1.0).unwrap(), 1.0);
        assert!(sampling_speed(1, 0.0).is_err());
        assert!(sampling_speed(1, -1.0).is_err());
    }

    #[test]
    fn stub_timing_lower_bound() {
        let dir = tempfile::tempdir().unwrap();
        let r = benchmark_generator(&stub(0.01), 20, 1, dir.path()).unwrap();
        assert!(r.elapsed_seconds >= 0.2 * 0.99, "{}", r.elapsed_seconds);
        assert_eq!(png_files(&r.samples_dir).unwrap().len(), 20);
        assert!(!dir.path().join("warmup").exists());
    }

    #[test]
    fn zero_count_rejected() {
        let dir = tempfile::tempdir().unwrap();
        assert!(benchmark_generator(&stub(0.0), 0, 0, dir.path()).is_err());
    }

    #[test]
    fn template_needs_placeholders() {
        let g = GeneratorAdapter::ExternalCommand {
            template: "gen --n {count}".into(),
            class: None,
        };
        assert!(g.validate().is_err());
    }

    #[test]
    fn external_count_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        // Writes one file fewer than requested.
        let g = GeneratorAdapter::ExternalCommand {
            template: "true {count}; touch {outdir}/only.png".into(),
            class: None,
        };
        let err = benchmark_generator(&g, 2, 0, dir.path()).unwrap_err();
        assert_eq!(err.to_string(), "expected 2 generated samples, found 1");
    }

    #[test]
    fn external_failure_carries_output() {
        let dir = tempfile::tempdir().unwrap();
        let g = GeneratorAdapter::ExternalCommand {
            template: "echo boom {count} {outdir}; exit 3".into(),
            class: None,
        };
        match benchmark_generator(&g, 1, 0, dir.path()).unwrap_err() {
            Error::GeneratorFailed { output, .. } => assert!(output.starts_with("boom 1")),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn stub_is_deterministic() {
        let GeneratorAdapter::Stub(s) = stub(0.0) else { unreachable!() };
        assert_eq!(s.sample(2, 5), s.sample(2, 5));
        assert_ne!(s.sample(2, 5), s.sample(2, 6));
        assert_ne!(s.sample(1, 5), s.sample(2, 5));
    }
}
