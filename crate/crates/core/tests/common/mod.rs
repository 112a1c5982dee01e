#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use trilemma_eval::data::{DatasetRole, Image, LabeledImageDataset};
use trilemma_eval::features::{FeatureSet, FeatureSource};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Two-class image set: class 0 has a bright upper half, class 1 a bright
/// lower half, both with uniform noise of amplitude 0.3.
pub fn toy_images(per_class: usize, size: usize, seed: u64) -> LabeledImageDataset {
    let mut r = rng(seed);
    let mut images = Vec::new();
    let mut labels = Vec::new();
    for i in 0..2 * per_class {
        let label = i % 2;
        let img = Image::from_fn(size, size, 1, |y, _, _| {
            let bright = (y < size / 2) == (label == 0);
            let base = if bright { 0.7 } else { 0.3 };
            (base + 0.3 * (r.random::<f32>() - 0.5)).clamp(0.0, 1.0)
        })
        .unwrap();
        images.push(img);
        labels.push(label);
    }
    LabeledImageDataset::from_images(
        images,
        labels,
        vec!["lower".into(), "upper".into()],
        DatasetRole::RealTrain,
    )
    .unwrap()
}

pub fn random_image(r: &mut ChaCha8Rng, h: usize, w: usize, c: usize) -> Image {
    let pixels = (0..h * w * c).map(|_| r.random::<f32>()).collect();
    Image::new(h, w, c, pixels).unwrap()
}

/// Gaussian rows, or small integer grid points when `grid` is set so that
/// ties and exact boundary hits are common.
pub fn random_features(r: &mut ChaCha8Rng, rows: usize, dim: usize, grid: bool) -> FeatureSet {
    let normal = Normal::new(0.0, 1.0).unwrap();
    let values = (0..rows * dim)
        .map(|_| {
            if grid {
                r.random_range(-2i32..=2) as f32
            } else {
                normal.sample(r) as f32
            }
        })
        .collect();
    FeatureSet::new(values, dim, FeatureSource::Fallback).unwrap()
}

fn sq(a: &[f32], b: &[f32]) -> f64 {
    let mut s = 0.0;
    for i in 0..a.len() {
        let d = a[i] as f64 - b[i] as f64;
        s += d * d;
    }
    s
}

/// Fraction of `queries` rows within the k-NN ball of some `support` row,
/// by exhaustive search with fully sorted neighbour lists.
pub fn brute_coverage(support: &FeatureSet, queries: &FeatureSet, k: usize) -> f64 {
    let n = support.rows();
    let mut radii = Vec::with_capacity(n);
    for i in 0..n {
        let mut d = Vec::new();
        for j in 0..n {
            if j != i {
                d.push(sq(support.row(i), support.row(j)));
            }
        }
        d.sort_by(|a, b| a.partial_cmp(b).unwrap());
        radii.push(d[k - 1]);
    }
    let mut inside = 0;
    for q in 0..queries.rows() {
        let mut hit = false;
        for i in 0..n {
            if sq(queries.row(q), support.row(i)) <= radii[i] {
                hit = true;
            }
        }
        if hit {
            inside += 1;
        }
    }
    inside as f64 / queries.rows() as f64
}

/// SSIM of two constant images, where variances and covariance vanish and
/// only the luminance term remains.
pub fn constant_pair_ssim(a: f64, b: f64, k1: f64, k2: f64, l: f64) -> f64 {
    let c1 = (k1 * l).powi(2);
    let c2 = (k2 * l).powi(2);
    ((2.0 * a * b + c1) * c2) / ((a * a + b * b + c1) * c2)
}

/// Relative error with an absolute floor on the denominator.
pub fn rel_err(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}
