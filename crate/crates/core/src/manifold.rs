//! k-NN hypersphere manifolds and the precision / recall scores built on them.
//!
//! Every support point owns a ball whose radius is the distance to its k-th
//! nearest *other* support point. A query belongs to the manifold when it
//! lies in at least one ball, boundary included. Distances are exact
//! brute-force Euclidean; comparisons use squared distances so that no
//! rounding from `sqrt` can move a point across a boundary.

use crate::error::{Error, Result};
use crate::features::FeatureSet;

pub const DEFAULT_K: usize = 3;

#[derive(Debug, Clone)]
pub struct ManifoldModel {
    support: FeatureSet,
    radii_sq: Vec<f64>,
    k: usize,
}

#[inline]
pub(crate) fn squared_distance(a: &[f32], b: &[f32]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            let d = f64::from(x) - f64::from(y);
            d * d
        })
        .sum()
}

fn kth_neighbour_sq(fs: &FeatureSet, i: usize, k: usize) -> f64 {
    let row = fs.row(i);
    let mut d: Vec<f64> = (0..fs.rows())
        .filter(|&j| j != i)
        .map(|j| squared_distance(row, fs.row(j)))
        .collect();
    // k-th order statistic of the distance multiset; equal distances each
    // count, so the result is independent of which tied neighbour sorts first.
    let (_, kth, _) = d.select_nth_unstable_by(k - 1, f64::total_cmp);
    *kth
}

pub fn build_manifold(fs: &FeatureSet, k: usize) -> Result<ManifoldModel> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    if fs.rows() < k + 1 {
        return Err(Error::TooFewSupportPoints { k, rows: fs.rows() });
    }
    let radius = |i: usize| kth_neighbour_sq(fs, i, k);

    #[cfg(feature = "parallel")]
    let radii_sq = {
        use rayon::prelude::*;
        (0..fs.rows()).into_par_iter().map(radius).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let radii_sq = (0..fs.rows()).map(radius).collect();

    Ok(ManifoldModel {
        support: fs.clone(),
        radii_sq,
        k,
    })
}

impl ManifoldModel {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn support(&self) -> &FeatureSet {
        &self.support
    }

    pub fn radii(&self) -> Vec<f64> {
        self.radii_sq.iter().map(|r| r.sqrt()).collect()
    }

    pub fn contains(&self, v: &[f32]) -> Result<bool> {
        if v.len() != self.support.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.support.dim(),
                found: v.len(),
            });
        }
        Ok(self
            .support
            .iter_rows()
            .zip(&self.radii_sq)
            .any(|(s, &r)| squared_distance(v, s) <= r))
    }

    /// Fraction of `queries` rows lying inside the manifold.
    pub fn coverage(&self, queries: &FeatureSet) -> Result<f64> {
        if queries.dim() != self.support.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.support.dim(),
                found: queries.dim(),
            });
        }
        let inside = |i: usize| self.contains(queries.row(i)).map(usize::from);

        #[cfg(feature = "parallel")]
        let hits: Vec<usize> = {
            use rayon::prelude::*;
            (0..queries.rows())
                .into_par_iter()
                .map(inside)
                .collect::<Result<_>>()?
        };
        #[cfg(not(feature = "parallel"))]
        let hits: Vec<usize> = (0..queries.rows()).map(inside).collect::<Result<_>>()?;

        Ok(hits.iter().sum::<usize>() as f64 / queries.rows() as f64)
    }
}

/// 1 when `v` falls inside the union of hyperspheres, else 0.
pub fn membership(v: &[f32], m: &ManifoldModel) -> Result<u8> {
    m.contains(v).map(u8::from)
}

/// Fidelity: share of synthetic rows inside the real manifold.
pub fn precision(real: &FeatureSet, synth: &FeatureSet, k: usize) -> Result<f64> {
    build_manifold(real, k)?.coverage(synth)
}

/// Diversity: share of real rows inside the synthetic manifold.
pub fn recall(real: &FeatureSet, synth: &FeatureSet, k: usize) -> Result<f64> {
    precision(synth, real, k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::FeatureSource;

    fn set(rows: &[&[f64]]) -> FeatureSet {
        FeatureSet::from_rows(rows, FeatureSource::Fallback).unwrap()
    }

    #[test]
    fn line_radii() {
        let fs = set(&[&[0.0], &[1.0], &[3.0]]);
        assert_eq!(build_manifold(&fs, 1).unwrap().radii(), vec![1.0, 1.0, 2.0]);
        assert_eq!(build_manifold(&fs, 2).unwrap().radii(), vec![3.0, 2.0, 3.0]);
        assert!(matches!(
            build_manifold(&fs, 3),
            Err(Error::TooFewSupportPoints { k: 3, rows: 3 })
        ));
    }

    #[test]
    fn membership_cases() {
        let fs = set(&[&[0.0, 0.0], &[3.0, 0.0], &[0.0, 4.0]]);
        let m = build_manifold(&fs, 1).unwrap();
        // radii: 3, 3, 4
        assert_eq!(membership(&[0.0, 0.0], &m).unwrap(), 1);
        assert_eq!(membership(&[0.0, -3.0], &m).unwrap(), 1);
        assert_eq!(membership(&[100.0, 100.0], &m).unwrap(), 0);
        assert!(membership(&[0.0], &m).is_err());
    }

    #[test]
    fn square_corners_precision() {
        let real = set(&[&[0.0, 0.0], &[1.0, 0.0], &[0.0, 1.0], &[1.0, 1.0]]);
        let synth = set(&[&[0.5, 0.5], &[10.0, 10.0]]);
        assert_eq!(precision(&real, &synth, 3).unwrap(), 0.5);
    }

    #[test]
    fn identity_and_exterior() {
        let real = set(&[&[0.0, 0.1], &[0.3, 0.2], &[0.9, 0.4], &[0.5, 0.5], &[0.2, 0.8]]);
        assert_eq!(precision(&real, &real, 3).unwrap(), 1.0);
        assert_eq!(recall(&real, &real, 3).unwrap(), 1.0);
        let far = set(&[&[1e6, 1e6], &[-1e6, 1e6]]);
        assert_eq!(precision(&real, &far, 3).unwrap(), 0.0);
    }

    #[test]
    fn duplicate_points_give_zero_radius_not_self() {
        let fs = set(&[&[0.0], &[0.0], &[2.0]]);
        let r = build_manifold(&fs, 1).unwrap().radii();
        assert_eq!(r, vec![0.0, 0.0, 2.0]);
    }

    #[test]
    fn recall_covers_one_of_two_clusters() {
        // Real: 6 points near the origin and 4 near (100, 100). Synthetic
        // only covers the origin cluster, so recall is 6/10.
        let real = set(&[
            &[0.0, 0.0],
            &[0.1, 0.0],
            &[0.0, 0.1],
            &[0.1, 0.1],
            &[0.05, 0.05],
            &[0.02, 0.08],
            &[100.0, 100.0],
            &[100.1, 100.0],
            &[100.0, 100.1],
            &[100.1, 100.1],
        ]);
        let synth = set(&[&[0.0, 0.0], &[0.2, 0.0], &[0.0, 0.2], &[0.2, 0.2], &[0.1, 0.1]]);
        assert_eq!(recall(&real, &synth, 3).unwrap(), 0.6);
    }
}
