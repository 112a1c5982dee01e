use serde::{Deserialize, Serialize};

use crate::data::LabeledImageDataset;
use crate::error::{Error, Result};
use crate::nn::Classifier;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub accuracy: f64,
    pub top_k_accuracy: f64,
    pub k: usize,
    /// `None` for classes absent from the evaluated set.
    pub per_class_accuracy: Vec<Option<f64>>,
    pub count: usize,
}

/// Index of the largest logit; ties go to the lowest index.
pub fn argmax(logits: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in logits.iter().enumerate().skip(1) {
        if v > logits[best] {
            best = i;
        }
    }
    best
}

/// Zero-based rank of `label` under the same ordering as [`argmax`]: classes
/// with a larger logit, or an equal logit and a lower index, come first.
pub fn rank_of(logits: &[f64], label: usize) -> usize {
    let target = logits[label];
    logits
        .iter()
        .enumerate()
        .filter(|&(i, &v)| v > target || (v == target && i < label))
        .count()
}

pub fn evaluate_logits(
    logits: &[Vec<f64>],
    labels: &[usize],
    num_classes: usize,
    k: usize,
) -> Result<EvalResult> {
    if logits.is_empty() {
        return Err(Error::Empty("evaluation set".into()));
    }
    if k == 0 {
        return Err(Error::InvalidArgument("top-k needs k >= 1".into()));
    }
    let mut correct = 0usize;
    let mut top_k = 0usize;
    let mut per_class = vec![(0usize, 0usize); num_classes];
    for (z, &y) in logits.iter().zip(labels) {
        let rank = rank_of(z, y);
        per_class[y].1 += 1;
        if rank == 0 {
            correct += 1;
            per_class[y].0 += 1;
        }
        if rank < k {
            top_k += 1;
        }
    }
    let n = logits.len() as f64;
    Ok(EvalResult {
        accuracy: correct as f64 / n,
        top_k_accuracy: top_k as f64 / n,
        k,
        per_class_accuracy: per_class
            .into_iter()
            .map(|(c, t)| (t > 0).then(|| c as f64 / t as f64))
            .collect(),
        count: logits.len(),
    })
}

pub fn evaluate(m: &Classifier, test: &LabeledImageDataset, k: usize) -> Result<EvalResult> {
    if test.is_empty() {
        return Err(Error::Empty("test set".into()));
    }
    let logits = m.forward_batch(test.images())?;
    evaluate_logits(&logits, test.labels(), m.num_classes(), k)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn argmax_ties_to_lowest() {
        assert_eq!(argmax(&[1.0, 3.0, 3.0]), 1);
        assert_eq!(argmax(&[0.0, 0.0]), 0);
    }

    #[test]
    fn all_correct() {
        let r = evaluate_logits(&[vec![1.0, 0.0], vec![0.0, 1.0]], &[0, 1], 2, 1).unwrap();
        assert_eq!(r.accuracy, 1.0);
        assert_eq!(r.per_class_accuracy, vec![Some(1.0), Some(1.0)]);
    }

    #[test]
    fn second_ranked_everywhere() {
        // True label always ranks second of three.
        let logits = vec![vec![3.0, 2.0, 1.0], vec![1.0, 3.0, 2.0], vec![2.0, 1.0, 3.0]];
        let labels = [1, 2, 0];
        let r1 = evaluate_logits(&logits, &labels, 3, 1).unwrap();
        let r3 = evaluate_logits(&logits, &labels, 3, 3).unwrap();
        assert_eq!(r1.accuracy, 0.0);
        assert_eq!(r3.top_k_accuracy, 1.0);
        let r2 = evaluate_logits(&logits, &labels, 3, 2).unwrap();
        assert_eq!(r2.top_k_accuracy, 1.0);
        assert!(r2.top_k_accuracy >= r2.accuracy);
    }

    #[test]
    fn missing_class_is_none() {
        let r = evaluate_logits(&[vec![1.0, 0.0, 0.0]], &[0], 3, 1).unwrap();
        assert_eq!(r.per_class_accuracy, vec![Some(1.0), None, None]);
    }

    #[test]
    fn empty_and_zero_k_rejected() {
        assert!(evaluate_logits(&[], &[], 2, 1).is_err());
        assert!(evaluate_logits(&[vec![0.0]], &[0], 1, 0).is_err());
    }
}
