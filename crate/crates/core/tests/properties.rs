//! Invariants checked over random inputs.

mod common;

use nalgebra::{DMatrix, Rotation2};
use proptest::prelude::*;

use trilemma_eval::data::{stratified_split_indices, DatasetRole, Image, LabeledImageDataset, SplitRatios};
use trilemma_eval::features::{FeatureSet, FeatureSource};
use trilemma_eval::fid::fid_from_features;
use trilemma_eval::genbench::sampling_speed;
use trilemma_eval::manifold::{precision, recall};
use trilemma_eval::report::min_max;

fn features(rows: &[Vec<f64>]) -> FeatureSet {
    FeatureSet::from_rows(rows, FeatureSource::Fallback).unwrap()
}

fn points(dim: usize, min: usize, max: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(-4i32..=4, dim), min..=max)
        .prop_map(|rows| rows.into_iter().map(|r| r.into_iter().map(f64::from).collect()).collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn manifold_metrics_ignore_row_order(
        real in points(3, 6, 40),
        synth in points(3, 6, 40),
        k in 1usize..=5,
        shift in 0usize..40,
    ) {
        let mut rotated = real.clone();
        let s = shift % rotated.len();
        rotated.rotate_left(s);
        rotated.reverse();
        let a = features(&real);
        let b = features(&rotated);
        let s = features(&synth);
        prop_assert_eq!(precision(&a, &s, k).unwrap(), precision(&b, &s, k).unwrap());
        prop_assert_eq!(recall(&a, &s, k).unwrap(), recall(&b, &s, k).unwrap());
    }

    #[test]
    fn manifold_metrics_survive_quarter_turns(
        real in points(2, 6, 40),
        synth in points(2, 6, 40),
        k in 1usize..=4,
    ) {
        // Quarter turns keep integer coordinates exact in f32.
        let turn = |rows: &[Vec<f64>]| -> Vec<Vec<f64>> {
            rows.iter().map(|r| vec![-r[1], r[0]]).collect()
        };
        let (a, s) = (features(&real), features(&synth));
        let (ra, rs) = (features(&turn(&real)), features(&turn(&synth)));
        prop_assert_eq!(precision(&a, &s, k).unwrap(), precision(&ra, &rs, k).unwrap());
        prop_assert_eq!(recall(&a, &s, k).unwrap(), recall(&ra, &rs, k).unwrap());
    }

    #[test]
    fn metrics_stay_in_unit_interval(real in points(4, 6, 30), synth in points(4, 1, 30), k in 1usize..=5) {
        let (a, s) = (features(&real), features(&synth));
        let p = precision(&a, &s, k).unwrap();
        prop_assert!((0.0..=1.0).contains(&p));
    }

    #[test]
    fn embeddings_round_trip(rows in 1usize..20, dim in 1usize..10, seed in any::<u64>()) {
        let mut r = common::rng(seed);
        let fs = common::random_features(&mut r, rows, dim, false);
        let back = FeatureSet::from_bytes(&fs.to_bytes()).unwrap();
        prop_assert_eq!(back.values(), fs.values());
        prop_assert_eq!(back.dim(), dim);
        prop_assert_eq!(back.source(), fs.source());
    }

    #[test]
    fn fid_is_rotation_invariant(seed in any::<u64>(), angle in 0.0f64..6.28) {
        let mut r = common::rng(seed);
        let a = common::random_features(&mut r, 30, 2, false);
        let b = common::random_features(&mut r, 30, 2, false);
        let rot = Rotation2::new(angle);
        let turn = |fs: &FeatureSet| {
            let rows: Vec<Vec<f64>> = fs
                .iter_rows()
                .map(|v| {
                    let p = rot * nalgebra::Point2::new(v[0] as f64, v[1] as f64);
                    vec![p.x, p.y]
                })
                .collect();
            features(&rows)
        };
        let f0 = fid_from_features(&a, &b).unwrap();
        let f1 = fid_from_features(&turn(&a), &turn(&b)).unwrap();
        // Rotated rows are rounded back to f32.
        prop_assert!((f0 - f1).abs() <= 1e-4 * f0.max(1.0), "{} vs {}", f0, f1);
    }

    #[test]
    fn min_max_is_affine_invariant(
        values in prop::collection::vec(-100.0f64..100.0, 2..10),
        scale in 0.1f64..10.0,
        offset in -50.0f64..50.0,
    ) {
        let mapped: Vec<f64> = values.iter().map(|v| scale * v + offset).collect();
        for (a, b) in min_max(&values).iter().zip(min_max(&mapped)) {
            prop_assert!((a - b).abs() < 1e-9);
            prop_assert!((0.0..=1.0).contains(a));
        }
    }

    #[test]
    fn split_is_a_stratified_partition(
        counts in prop::collection::vec(3usize..30, 1..4),
        seed in any::<u64>(),
    ) {
        let labels: Vec<usize> = counts.iter().enumerate().flat_map(|(c, &n)| vec![c; n]).collect();
        let images = labels.iter().map(|_| Image::filled(2, 2, 1, 0.0).unwrap()).collect();
        let names = (0..counts.len()).map(|c| format!("c{c}")).collect();
        let ds = LabeledImageDataset::from_images(images, labels.clone(), names, DatasetRole::RealTrain).unwrap();
        let ratios = SplitRatios::new(0.8, 0.1, 0.1).unwrap();
        let s = stratified_split_indices(&ds, ratios, seed).unwrap();
        let mut all: Vec<usize> = s.train.iter().chain(&s.val).chain(&s.test).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..labels.len()).collect::<Vec<_>>());
        for (c, &n) in counts.iter().enumerate() {
            let in_train = s.train.iter().filter(|&&i| labels[i] == c).count();
            prop_assert!(in_train >= 1 && in_train <= n);
        }
        prop_assert_eq!(s, stratified_split_indices(&ds, ratios, seed).unwrap());
    }

    #[test]
    fn sampling_speed_scales(count in 1usize..10_000, t in 0.001f64..1000.0, a in 0.5f64..4.0) {
        let s = sampling_speed(count, t).unwrap();
        let scaled = sampling_speed(count, a * t).unwrap();
        prop_assert!((s / scaled - a).abs() < 1e-9 * a);
    }
}

#[test]
fn sqrt_of_diagonal_is_elementwise() {
    let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![4.0, 9.0, 0.0]));
    let s = trilemma_eval::fid::matrix_sqrt_psd(&d).unwrap();
    assert!((s[(0, 0)] - 2.0).abs() < 1e-12 && (s[(1, 1)] - 3.0).abs() < 1e-12 && s[(2, 2)].abs() < 1e-12);
}
