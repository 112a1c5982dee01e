//! Multiclass DeepFool and adversarial accuracy.

#[cfg(feature = "parallel")]
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::LabeledImageDataset;
use crate::error::{Error, Result};
use crate::nn::{argmax, evaluate_logits, Classifier, EvalResult};

/// Step added to each linearized boundary distance so that a point exactly
/// on a boundary still moves across it.
const BOUNDARY_NUDGE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AttackConfig {
    pub max_iterations: usize,
    pub overshoot: f64,
    pub clamp_to_valid_range: bool,
}

impl Default for AttackConfig {
    fn default() -> Self {
        Self {
            max_iterations: 5,
            overshoot: 0.02,
            clamp_to_valid_range: true,
        }
    }
}

impl AttackConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::InvalidArgument("max_iterations must be >= 1".into()));
        }
        if !(self.overshoot >= 0.0) {
            return Err(Error::InvalidArgument("overshoot must be >= 0".into()));
        }
        Ok(())
    }
}

/// Anything with logits and per-logit input gradients over a flat input.
pub trait DifferentiableModel {
    fn input_len(&self) -> usize;
    fn num_classes(&self) -> usize;
    fn logits(&self, x: &[f64]) -> Result<Vec<f64>>;
    fn logits_and_gradients(&self, x: &[f64]) -> Result<(Vec<f64>, Vec<Vec<f64>>)>;
}

impl DifferentiableModel for Classifier {
    fn input_len(&self) -> usize {
        self.architecture().input_len()
    }

    fn num_classes(&self) -> usize {
        Classifier::num_classes(self)
    }

    fn logits(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.logits_raw(x)
    }

    fn logits_and_gradients(&self, x: &[f64]) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
        self.logits_and_input_gradients(x)
    }
}

/// Affine multiclass model `f(x) = W x + b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    weights: Vec<Vec<f64>>,
    bias: Vec<f64>,
}

impl LinearModel {
    pub fn new(weights: Vec<Vec<f64>>, bias: Vec<f64>) -> Result<Self> {
        if weights.is_empty() || weights[0].is_empty() {
            return Err(Error::InvalidArgument("linear model needs at least one class and input".into()));
        }
        let d = weights[0].len();
        if weights.iter().any(|w| w.len() != d) || bias.len() != weights.len() {
            return Err(Error::InvalidArgument("ragged linear model weights".into()));
        }
        Ok(Self { weights, bias })
    }

    /// Two-class model whose class-1 logit is `w·x + b` and class-0 logit 0.
    pub fn binary(w: Vec<f64>, b: f64) -> Result<Self> {
        Self::new(vec![vec![0.0; w.len()], w], vec![0.0, b])
    }

    pub fn weights(&self) -> &[Vec<f64>] {
        &self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }
}

impl DifferentiableModel for LinearModel {
    fn input_len(&self) -> usize {
        self.weights[0].len()
    }

    fn num_classes(&self) -> usize {
        self.weights.len()
    }

    fn logits(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_len() {
            return Err(Error::DimensionMismatch {
                expected: self.input_len(),
                found: x.len(),
            });
        }
        Ok(self
            .weights
            .iter()
            .zip(&self.bias)
            .map(|(w, b)| w.iter().zip(x).map(|(a, v)| a * v).sum::<f64>() + b)
            .collect())
    }

    fn logits_and_gradients(&self, x: &[f64]) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
        Ok((self.logits(x)?, self.weights.clone()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeepFoolOutcome {
    /// Attacked input, same layout as the original.
    pub perturbed: Vec<f64>,
    pub perturbation_l2: f64,
    pub flipped: bool,
    /// Gradient steps taken.
    pub iterations: usize,
    /// No competing class had a nonzero gradient difference at the start.
    pub degenerate: bool,
    pub original_class: usize,
    pub final_class: usize,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

fn attack_point(x0: &[f64], r_tot: &[f64], scale: f64) -> Vec<f64> {
    x0.iter().zip(r_tot).map(|(a, r)| a + scale * r).collect()
}

fn run_deepfool<M: DifferentiableModel + ?Sized>(
    m: &M,
    x0: &[f64],
    cfg: &AttackConfig,
    mut trace: Option<&mut Vec<Vec<f64>>>,
) -> Result<DeepFoolOutcome> {
    cfg.validate()?;
    if x0.len() != m.input_len() {
        return Err(Error::DimensionMismatch {
            expected: m.input_len(),
            found: x0.len(),
        });
    }
    let scale = 1.0 + cfg.overshoot;
    let original_class = argmax(&m.logits(x0)?);
    let mut r_tot = vec![0.0; x0.len()];
    let mut iterations = 0;
    let mut degenerate = false;
    if let Some(t) = trace.as_deref_mut() {
        t.push(x0.to_vec());
    }

    while iterations < cfg.max_iterations {
        let x = attack_point(x0, &r_tot, scale);
        let (logits, grads) = m.logits_and_gradients(&x)?;
        if argmax(&logits) != original_class {
            break;
        }
        let c = original_class;
        let mut best: Option<(f64, Vec<f64>)> = None;
        for j in (0..logits.len()).filter(|&j| j != c) {
            let w: Vec<f64> = grads[j].iter().zip(&grads[c]).map(|(a, b)| a - b).collect();
            let wn = norm(&w);
            if wn == 0.0 || !wn.is_finite() {
                continue;
            }
            let dist = (logits[j] - logits[c]).abs() / wn;
            if best.as_ref().is_none_or(|(d, _)| dist < *d) {
                let unit = w.into_iter().map(|v| v / wn).collect();
                best = Some((dist, unit));
            }
        }
        let Some((dist, unit)) = best else {
            degenerate = iterations == 0;
            break;
        };
        for (r, u) in r_tot.iter_mut().zip(&unit) {
            *r += (dist + BOUNDARY_NUDGE) * u;
        }
        iterations += 1;
        if let Some(t) = trace.as_deref_mut() {
            t.push(attack_point(x0, &r_tot, scale));
        }
    }

    let mut perturbed = attack_point(x0, &r_tot, scale);
    if cfg.clamp_to_valid_range {
        perturbed.iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
    }
    let delta: Vec<f64> = perturbed.iter().zip(x0).map(|(a, b)| a - b).collect();
    let final_class = argmax(&m.logits(&perturbed)?);
    Ok(DeepFoolOutcome {
        perturbation_l2: norm(&delta),
        perturbed,
        flipped: final_class != original_class,
        iterations,
        degenerate,
        original_class,
        final_class,
    })
}

/// DeepFool on a flat input. At each step the current point is
/// `x0 + (1+η)·r_tot`; the nearest linearized boundary among all competing
/// classes is found and its distance added to `r_tot`.
pub fn deepfool<M: DifferentiableModel + ?Sized>(
    m: &M,
    x: &[f64],
    cfg: &AttackConfig,
) -> Result<DeepFoolOutcome> {
    run_deepfool(m, x, cfg, None)
}

/// Like [`deepfool`], also returning the sequence of visited points
/// (starting with the original input).
pub fn deepfool_trace<M: DifferentiableModel + ?Sized>(
    m: &M,
    x: &[f64],
    cfg: &AttackConfig,
) -> Result<(DeepFoolOutcome, Vec<Vec<f64>>)> {
    let mut trace = Vec::new();
    let out = run_deepfool(m, x, cfg, Some(&mut trace))?;
    Ok((out, trace))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    /// `counts.len() + 1` bin edges.
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

impl Histogram {
    pub fn new(values: &[f64], bins: usize) -> Self {
        let max = values.iter().copied().fold(0.0, f64::max);
        if values.is_empty() || max == 0.0 || bins == 0 {
            return Self {
                edges: vec![0.0, max],
                counts: vec![values.len()],
            };
        }
        let width = max / bins as f64;
        let edges = (0..=bins).map(|i| i as f64 * width).collect();
        let mut counts = vec![0; bins];
        for &v in values {
            let b = ((v / width) as usize).min(bins - 1);
            counts[b] += 1;
        }
        Self { edges, counts }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrectSubset {
    /// Test points classified correctly before the attack.
    pub total: usize,
    /// Of those, still correct after it.
    pub still_correct: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessReport {
    pub config: AttackConfig,
    pub clean: EvalResult,
    pub adversarial: EvalResult,
    pub flipped: usize,
    pub degenerate: usize,
    pub mean_perturbation_l2: f64,
    pub histogram: Histogram,
    pub correct_subset: CorrectSubset,
}

/// Attacks every test image independently and evaluates the classifier on
/// the perturbed set.
pub fn adversarial_accuracy(
    m: &Classifier,
    test: &LabeledImageDataset,
    cfg: &AttackConfig,
    k: usize,
) -> Result<RobustnessReport> {
    cfg.validate()?;
    if test.is_empty() {
        return Err(Error::Empty("test set".into()));
    }
    let attack = |i: usize| -> Result<(Vec<f64>, Vec<f64>, DeepFoolOutcome)> {
        let x = test.images()[i].to_f64();
        let clean = m.logits_raw(&x)?;
        let out = deepfool(m, &x, cfg)?;
        let adv = m.logits_raw(&out.perturbed)?;
        Ok((clean, adv, out))
    };
    #[cfg(feature = "parallel")]
    let results: Vec<_> = (0..test.len()).into_par_iter().map(attack).collect::<Result<_>>()?;
    #[cfg(not(feature = "parallel"))]
    let results: Vec<_> = (0..test.len()).map(attack).collect::<Result<_>>()?;

    let classes = m.num_classes();
    let clean_logits: Vec<Vec<f64>> = results.iter().map(|r| r.0.clone()).collect();
    let adv_logits: Vec<Vec<f64>> = results.iter().map(|r| r.1.clone()).collect();
    let norms: Vec<f64> = results.iter().map(|r| r.2.perturbation_l2).collect();
    let mut subset = CorrectSubset {
        total: 0,
        still_correct: 0,
    };
    for ((c, a), &y) in clean_logits.iter().zip(&adv_logits).zip(test.labels()) {
        if argmax(c) == y {
            subset.total += 1;
            if argmax(a) == y {
                subset.still_correct += 1;
            }
        }
    }
    Ok(RobustnessReport {
        config: *cfg,
        clean: evaluate_logits(&clean_logits, test.labels(), classes, k)?,
        adversarial: evaluate_logits(&adv_logits, test.labels(), classes, k)?,
        flipped: results.iter().filter(|r| r.2.flipped).count(),
        degenerate: results.iter().filter(|r| r.2.degenerate).count(),
        mean_perturbation_l2: norms.iter().sum::<f64>() / norms.len() as f64,
        histogram: Histogram::new(&norms, 10),
        correct_subset: subset,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unclamped() -> AttackConfig {
        AttackConfig {
            clamp_to_valid_range: false,
            ..Default::default()
        }
    }

    #[test]
    fn binary_linear_example() {
        let m = LinearModel::binary(vec![1.0, 0.0], 0.0).unwrap();
        let out = deepfool(&m, &[2.0, 0.0], &unclamped()).unwrap();
        assert!(out.flipped);
        assert_eq!(out.iterations, 1);
        assert!((out.perturbation_l2 - 2.04).abs() < 1e-6);
        assert!((out.perturbed[0] - (2.0 - 2.04)).abs() < 1e-6);
        assert_eq!(out.perturbed[1], 0.0);
    }

    #[test]
    fn on_boundary_flips_with_tiny_step() {
        let m = LinearModel::binary(vec![1.0, 0.0], 0.0).unwrap();
        let out = deepfool(&m, &[0.0, 3.0], &unclamped()).unwrap();
        assert!(out.flipped);
        assert!(out.perturbation_l2 < 1e-6);
    }

    #[test]
    fn zero_weights_are_degenerate() {
        let m = LinearModel::new(vec![vec![0.0; 3]; 2], vec![1.0, 0.0]).unwrap();
        let out = deepfool(&m, &[0.2, 0.3, 0.4], &unclamped()).unwrap();
        assert!(out.degenerate);
        assert!(!out.flipped);
        assert_eq!(out.perturbation_l2, 0.0);
    }

    #[test]
    fn single_class_never_moves() {
        let m = LinearModel::new(vec![vec![1.0, 2.0]], vec![0.0]).unwrap();
        let out = deepfool(&m, &[0.5, 0.5], &AttackConfig::default()).unwrap();
        assert!(!out.flipped);
        assert_eq!(out.perturbation_l2, 0.0);
    }

    #[test]
    fn three_class_picks_nearest_boundary() {
        // Class 0 wins at the origin-ish point; class 2's boundary is closer.
        let m = LinearModel::new(
            vec![vec![0.0, 0.0], vec![-1.0, 0.0], vec![0.0, 1.0]],
            vec![1.0, 0.0, 0.5],
        )
        .unwrap();
        let (out, trace) = deepfool_trace(&m, &[0.0, 0.0], &unclamped()).unwrap();
        assert_eq!(out.final_class, 2);
        assert!((out.perturbation_l2 - 0.5 * 1.02).abs() < 1e-6);
        assert_eq!(trace.len(), 2);
    }

    #[test]
    fn clamping_keeps_pixels_valid() {
        let m = LinearModel::binary(vec![1.0, 1.0], -0.5).unwrap();
        let out = deepfool(&m, &[0.0, 0.0], &AttackConfig::default()).unwrap();
        assert!(out.perturbed.iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn rejects_bad_config() {
        let m = LinearModel::binary(vec![1.0], 0.0).unwrap();
        let cfg = AttackConfig {
            max_iterations: 0,
            ..Default::default()
        };
        assert!(deepfool(&m, &[1.0], &cfg).is_err());
        assert!(deepfool(&m, &[1.0, 2.0], &AttackConfig::default()).is_err());
    }

    #[test]
    fn histogram_bins() {
        let h = Histogram::new(&[0.0, 0.5, 1.0, 1.0], 2);
        assert_eq!(h.counts, vec![1, 3]);
        assert_eq!(h.edges, vec![0.0, 0.5, 1.0]);
        assert_eq!(Histogram::new(&[0.0, 0.0], 10).counts, vec![2]);
    }
}
