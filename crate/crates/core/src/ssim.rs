//! Gaussian-window SSIM and the memorization (privacy) score built on it.
//!
//! Local statistics are the standard 11×11, σ = 1.5 weighted moments taken
//! over every fully contained window ("valid" filtering); the image score is
//! the mean of the local SSIM map, averaged over channels for colour images.
//!
//! Filtered moment maps are rounded to `f32` after filtering. The same
//! rounding applies on every path, so `ssim(x, x)` is exactly 1 and
//! `ssim(a, b) == ssim(b, a)` bit for bit, whether or not a side was
//! prepared in advance.

use std::collections::BTreeMap;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{Image, LabeledImageDataset};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SsimParams {
    pub window: usize,
    pub gaussian_sigma: f64,
    pub k1: f64,
    pub k2: f64,
    pub dynamic_range: f64,
}

impl Default for SsimParams {
    fn default() -> Self {
        Self {
            window: 11,
            gaussian_sigma: 1.5,
            k1: 0.01,
            k2: 0.03,
            dynamic_range: 1.0,
        }
    }
}

impl SsimParams {
    pub fn validate(&self) -> Result<()> {
        if self.window < 3 || self.window % 2 == 0 {
            return Err(Error::InvalidArgument(format!(
                "ssim window must be odd and >= 3, got {}",
                self.window
            )));
        }
        if !(self.gaussian_sigma > 0.0 && self.k1 > 0.0 && self.k2 > 0.0 && self.dynamic_range > 0.0)
        {
            return Err(Error::InvalidArgument("ssim constants must be positive".into()));
        }
        Ok(())
    }

    pub fn c1(&self) -> f64 {
        (self.k1 * self.dynamic_range).powi(2)
    }

    pub fn c2(&self) -> f64 {
        (self.k2 * self.dynamic_range).powi(2)
    }

    fn kernel(&self) -> Vec<f64> {
        let r = (self.window / 2) as f64;
        let g: Vec<f64> = (0..self.window)
            .map(|i| {
                let x = i as f64 - r;
                (-(x * x) / (2.0 * self.gaussian_sigma * self.gaussian_sigma)).exp()
            })
            .collect();
        let sum: f64 = g.iter().sum();
        g.into_iter().map(|v| v / sum).collect()
    }
}

/// Separable Gaussian filter over the valid region of an `h × w` plane.
fn filter_valid(plane: &[f64], h: usize, w: usize, kernel: &[f64]) -> Vec<f32> {
    let win = kernel.len();
    let (oh, ow) = (h - win + 1, w - win + 1);
    let mut rows = vec![0.0f64; h * ow];
    for y in 0..h {
        let src = &plane[y * w..(y + 1) * w];
        let dst = &mut rows[y * ow..(y + 1) * ow];
        for (x, out) in dst.iter_mut().enumerate() {
            *out = kernel.iter().zip(&src[x..x + win]).map(|(k, v)| k * v).sum();
        }
    }
    let mut out = vec![0.0f32; oh * ow];
    for y in 0..oh {
        for x in 0..ow {
            let mut acc = 0.0;
            for (i, k) in kernel.iter().enumerate() {
                acc += k * rows[(y + i) * ow + x];
            }
            out[y * ow + x] = acc as f32;
        }
    }
    out
}

fn plane(img: &Image, c: usize) -> Vec<f64> {
    img.pixels()
        .iter()
        .skip(c)
        .step_by(img.channels())
        .map(|&v| f64::from(v))
        .collect()
}

/// Per-channel filtered mean and second-moment maps of one image.
#[derive(Debug, Clone)]
pub struct PreparedImage {
    dims: (usize, usize, usize),
    planes: Vec<Vec<f64>>,
    mean: Vec<Vec<f32>>,
    square: Vec<Vec<f32>>,
}

impl PreparedImage {
    pub fn new(img: &Image, p: &SsimParams) -> Result<Self> {
        p.validate()?;
        let (h, w, c) = img.dims();
        if h < p.window || w < p.window {
            return Err(Error::SsimShape {
                window: p.window,
                a: img.dims(),
                b: img.dims(),
            });
        }
        let kernel = p.kernel();
        let planes: Vec<Vec<f64>> = (0..c).map(|ch| plane(img, ch)).collect();
        let mean = planes.iter().map(|pl| filter_valid(pl, h, w, &kernel)).collect();
        let square = planes
            .iter()
            .map(|pl| {
                let sq: Vec<f64> = pl.iter().map(|v| v * v).collect();
                filter_valid(&sq, h, w, &kernel)
            })
            .collect();
        Ok(Self {
            dims: img.dims(),
            planes,
            mean,
            square,
        })
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        self.dims
    }
}

/// SSIM between two prepared images.
pub fn ssim_prepared(a: &PreparedImage, b: &PreparedImage, p: &SsimParams) -> Result<f64> {
    if a.dims != b.dims {
        return Err(Error::SsimShape {
            window: p.window,
            a: a.dims,
            b: b.dims,
        });
    }
    let (h, w, channels) = a.dims;
    if h < p.window || w < p.window {
        return Err(Error::SsimShape {
            window: p.window,
            a: a.dims,
            b: b.dims,
        });
    }
    let kernel = p.kernel();
    let (c1, c2) = (p.c1(), p.c2());
    let mut total = 0.0;
    for ch in 0..channels {
        let product: Vec<f64> = a.planes[ch]
            .iter()
            .zip(&b.planes[ch])
            .map(|(x, y)| x * y)
            .collect();
        let cross = filter_valid(&product, h, w, &kernel);
        let n = cross.len();
        let mut sum = 0.0;
        for i in 0..n {
            let ma = f64::from(a.mean[ch][i]);
            let mb = f64::from(b.mean[ch][i]);
            let mab = ma * mb;
            let va = f64::from(a.square[ch][i]) - ma * ma;
            let vb = f64::from(b.square[ch][i]) - mb * mb;
            let cov = f64::from(cross[i]) - mab;
            let num = (2.0 * mab + c1) * (2.0 * cov + c2);
            let den = (ma * ma + mb * mb + c1) * (va + vb + c2);
            sum += num / den;
        }
        total += sum / n as f64;
    }
    Ok(total / channels as f64)
}

pub fn ssim(a: &Image, b: &Image, p: &SsimParams) -> Result<f64> {
    if a.dims() != b.dims() {
        return Err(Error::SsimShape {
            window: p.window,
            a: a.dims(),
            b: b.dims(),
        });
    }
    ssim_prepared(&PreparedImage::new(a, p)?, &PreparedImage::new(b, p)?, p)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaxSsim {
    pub value: f64,
    /// Index of the most similar reference image (lowest index on ties).
    pub index: usize,
}

fn max_over(s: &PreparedImage, reference: &[PreparedImage], p: &SsimParams) -> Result<MaxSsim> {
    let score = |r: &PreparedImage| ssim_prepared(s, r, p);

    #[cfg(feature = "parallel")]
    let values: Vec<f64> = {
        use rayon::prelude::*;
        reference.par_iter().map(score).collect::<Result<_>>()?
    };
    #[cfg(not(feature = "parallel"))]
    let values: Vec<f64> = reference.iter().map(score).collect::<Result<_>>()?;

    let mut best = MaxSsim {
        value: f64::NEG_INFINITY,
        index: 0,
    };
    for (i, &v) in values.iter().enumerate() {
        if v > best.value {
            best = MaxSsim { value: v, index: i };
        }
    }
    Ok(best)
}

fn prepare_all(images: &[Image], p: &SsimParams) -> Result<Vec<PreparedImage>> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        images.par_iter().map(|im| PreparedImage::new(im, p)).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        images.iter().map(|im| PreparedImage::new(im, p)).collect()
    }
}

/// Highest SSIM between `s` and any image of `real`, with its index.
pub fn max_ssim(s: &Image, real: &LabeledImageDataset, p: &SsimParams) -> Result<MaxSsim> {
    if real.is_empty() {
        return Err(Error::Empty("reference set for max-SSIM".into()));
    }
    let reference = prepare_all(real.images(), p)?;
    max_over(&PreparedImage::new(s, p)?, &reference, p)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PrivacyConfig {
    /// Synthetic images drawn per repeat.
    pub q: usize,
    /// Number of repeats.
    pub l: usize,
    pub seed: u64,
    /// Number of audit entries kept in the report.
    pub audit_top: usize,
}

impl Default for PrivacyConfig {
    fn default() -> Self {
        Self {
            q: 100,
            l: 10,
            seed: 0,
            audit_top: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub synthetic_index: usize,
    pub synthetic_id: String,
    pub real_index: usize,
    pub real_id: String,
    pub ssim: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrivacyReport {
    pub score: f64,
    pub repeat_means: Vec<f64>,
    pub q: usize,
    pub l: usize,
    /// Sampled synthetic images with their nearest real image, most similar
    /// first.
    pub audit: Vec<AuditEntry>,
}

/// Mean over `l` repeats of the mean max-SSIM of `q` synthetic images drawn
/// without replacement. Lower means less memorization.
pub fn privacy_score(
    synth: &LabeledImageDataset,
    real: &LabeledImageDataset,
    cfg: &PrivacyConfig,
    p: &SsimParams,
) -> Result<PrivacyReport> {
    if cfg.q == 0 || cfg.l == 0 {
        return Err(Error::InvalidArgument("q and l must be at least 1".into()));
    }
    if synth.len() < cfg.q {
        return Err(Error::SampleTooLarge {
            requested: cfg.q,
            available: synth.len(),
        });
    }
    if real.is_empty() {
        return Err(Error::Empty("real training set for privacy".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let draws: Vec<Vec<usize>> = (0..cfg.l)
        .map(|_| sample(&mut rng, synth.len(), cfg.q).into_vec())
        .collect();

    let needed: Vec<usize> = {
        let mut v: Vec<usize> = draws.iter().flatten().copied().collect();
        v.sort_unstable();
        v.dedup();
        v
    };
    let reference = prepare_all(real.images(), p)?;
    let mut best: BTreeMap<usize, MaxSsim> = BTreeMap::new();
    for &j in &needed {
        let s = PreparedImage::new(&synth.images()[j], p)?;
        best.insert(j, max_over(&s, &reference, p)?);
    }

    let repeat_means: Vec<f64> = draws
        .iter()
        .map(|d| d.iter().map(|j| best[j].value).sum::<f64>() / cfg.q as f64)
        .collect();
    let score = repeat_means.iter().sum::<f64>() / cfg.l as f64;

    let mut audit: Vec<AuditEntry> = best
        .iter()
        .map(|(&j, m)| AuditEntry {
            synthetic_index: j,
            synthetic_id: synth.ids()[j].clone(),
            real_index: m.index,
            real_id: real.ids()[m.index].clone(),
            ssim: m.value,
        })
        .collect();
    audit.sort_by(|a, b| b.ssim.total_cmp(&a.ssim).then(a.synthetic_index.cmp(&b.synthetic_index)));
    audit.truncate(cfg.audit_top);

    Ok(PrivacyReport {
        score,
        repeat_means,
        q: cfg.q,
        l: cfg.l,
        audit,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::DatasetRole;

    fn noise(h: usize, w: usize, c: usize, seed: u32) -> Image {
        let mut s = seed.wrapping_mul(2_654_435_761).wrapping_add(12345);
        Image::from_fn(h, w, c, |_, _, _| {
            s ^= s << 13;
            s ^= s >> 17;
            s ^= s << 5;
            (s % 1000) as f32 / 999.0
        })
        .unwrap()
    }

    fn ds(images: Vec<Image>) -> LabeledImageDataset {
        let n = images.len();
        LabeledImageDataset::from_images(images, vec![0; n], vec!["x".into()], DatasetRole::RealTrain)
            .unwrap()
    }

    #[test]
    fn kernel_is_normalized_and_symmetric() {
        let k = SsimParams::default().kernel();
        assert_eq!(k.len(), 11);
        assert!((k.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(k[0], k[10]);
    }

    #[test]
    fn identity_is_exactly_one() {
        let p = SsimParams::default();
        for seed in 0..5 {
            let x = noise(16, 13, 3, seed);
            assert_eq!(ssim(&x, &x, &p).unwrap(), 1.0);
        }
    }

    #[test]
    fn constant_pair_matches_hand_value() {
        let p = SsimParams::default();
        let a = Image::filled(16, 16, 1, 0.5).unwrap();
        let b = Image::filled(16, 16, 1, 0.25).unwrap();
        let expected = (2.0 * 0.5 * 0.25 + 1e-4) / (0.25 + 0.0625 + 1e-4);
        let got = ssim(&a, &b, &p).unwrap();
        assert!((got - expected).abs() < 1e-6, "{got} vs {expected}");
        assert!((got - 0.8003).abs() < 1e-3);
    }

    #[test]
    fn symmetric_bitwise() {
        let p = SsimParams::default();
        let a = noise(12, 12, 1, 1);
        let b = noise(12, 12, 1, 2);
        assert_eq!(ssim(&a, &b, &p).unwrap(), ssim(&b, &a, &p).unwrap());
    }

    #[test]
    fn shape_errors() {
        let p = SsimParams::default();
        let a = noise(12, 12, 1, 1);
        assert!(ssim(&a, &noise(12, 13, 1, 1), &p).is_err());
        let small = noise(8, 8, 1, 1);
        assert!(ssim(&small, &small, &p).is_err());
        let bad = SsimParams {
            window: 4,
            ..p
        };
        assert!(ssim(&a, &a, &bad).is_err());
    }

    #[test]
    fn max_ssim_finds_copy() {
        let p = SsimParams::default();
        let real = ds((0..5).map(|s| noise(12, 12, 1, s)).collect());
        let m = max_ssim(&real.images()[3].clone(), &real, &p).unwrap();
        assert_eq!(m.value, 1.0);
        assert_eq!(m.index, 3);
        let empty = ds(vec![]);
        assert!(max_ssim(&real.images()[0].clone(), &empty, &p).is_err());
    }

    #[test]
    fn privacy_collapses_to_pair_for_singletons() {
        let p = SsimParams::default();
        let a = noise(12, 12, 1, 7);
        let b = noise(12, 12, 1, 8);
        let cfg = PrivacyConfig {
            q: 1,
            l: 1,
            ..Default::default()
        };
        let r = privacy_score(&ds(vec![a.clone()]), &ds(vec![b.clone()]), &cfg, &p).unwrap();
        assert_eq!(r.score, ssim(&a, &b, &p).unwrap());
    }

    #[test]
    fn privacy_rejects_oversized_q() {
        let p = SsimParams::default();
        let s = ds(vec![noise(12, 12, 1, 1)]);
        let cfg = PrivacyConfig {
            q: 2,
            l: 1,
            ..Default::default()
        };
        let err = privacy_score(&s, &s, &cfg, &p).unwrap_err();
        assert!(err.to_string().contains("--q 1"), "{err}");
    }
}
