//! Minibatch Adam on softmax cross-entropy with best-validation-loss
//! checkpoint selection.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::LabeledImageDataset;
use crate::error::{Error, Result};
use crate::nn::{argmax, Classifier};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainHyper {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub seed: u64,
}

impl Default for TrainHyper {
    fn default() -> Self {
        Self {
            epochs: 30,
            batch_size: 32,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            seed: 0,
        }
    }
}

impl TrainHyper {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::InvalidArgument("epochs and batch size must be >= 1".into()));
        }
        if !(self.learning_rate >= 0.0) {
            return Err(Error::InvalidArgument("learning rate must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_accuracy: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters from the epoch with the lowest validation loss.
    pub model: Classifier,
    pub best_epoch: usize,
    pub curve: Vec<EpochRecord>,
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    step: i32,
}

impl Adam {
    fn new(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            step: 0,
        }
    }

    fn update(&mut self, params: &mut [f64], grad: &[f64], h: &TrainHyper) {
        self.step += 1;
        let c1 = 1.0 - h.beta1.powi(self.step);
        let c2 = 1.0 - h.beta2.powi(self.step);
        for (((p, &g), m), v) in params.iter_mut().zip(grad).zip(&mut self.m).zip(&mut self.v) {
            *m = h.beta1 * *m + (1.0 - h.beta1) * g;
            *v = h.beta2 * *v + (1.0 - h.beta2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= h.learning_rate * m_hat / (v_hat.sqrt() + h.epsilon);
        }
    }
}

fn check_labels(ds: &LabeledImageDataset, classes: usize, what: &str) -> Result<()> {
    if ds.is_empty() {
        return Err(Error::Empty(format!("{what} set")));
    }
    if let Some(&l) = ds.labels().iter().find(|&&l| l >= classes) {
        return Err(Error::ClassIndex {
            index: l,
            classes,
        });
    }
    Ok(())
}

/// Mean cross-entropy and accuracy over a dataset.
pub fn loss_and_accuracy(m: &Classifier, ds: &LabeledImageDataset) -> (f64, f64) {
    let mut loss = 0.0;
    let mut correct = 0usize;
    for (img, &y) in ds.images().iter().zip(ds.labels()) {
        loss += m.loss_image(img, y);
        if m.forward(img).map(|z| argmax(&z) == y).unwrap_or(false) {
            correct += 1;
        }
    }
    let n = ds.len() as f64;
    (loss / n, correct as f64 / n)
}

/// Trains a copy of `model`. Each epoch reshuffles the training set with a
/// seeded RNG; per-sample gradients are summed in batch order and averaged.
/// Validation loss is measured after every epoch and the snapshot with the
/// smallest value (earliest on ties) is returned.
pub fn train(
    model: &Classifier,
    train_ds: &LabeledImageDataset,
    val_ds: &LabeledImageDataset,
    h: &TrainHyper,
) -> Result<TrainOutcome> {
    h.validate()?;
    let classes = model.num_classes();
    check_labels(train_ds, classes, "training")?;
    check_labels(val_ds, classes, "validation")?;
    let dims = model.architecture().input_dims();
    for ds in [train_ds, val_ds] {
        if ds.dims() != Some(dims) {
            return Err(Error::DimensionMismatch {
                expected: model.architecture().input_len(),
                found: ds.dims().map(|(a, b, c)| a * b * c).unwrap_or(0),
            });
        }
    }

    let mut current = model.clone();
    let mut best = model.clone();
    let mut best_loss = f64::INFINITY;
    let mut best_epoch = 0;
    let mut curve = Vec::with_capacity(h.epochs);
    let mut adam = Adam::new(current.parameter_count());
    let mut rng = ChaCha8Rng::seed_from_u64(h.seed);
    let mut order: Vec<usize> = (0..train_ds.len()).collect();
    let mut batch_grad = vec![0.0; current.parameter_count()];
    let mut sample_grad = vec![0.0; current.parameter_count()];

    for epoch in 1..=h.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(h.batch_size) {
            batch_grad.fill(0.0);
            for &i in batch {
                sample_grad.fill(0.0);
                let loss = current.accumulate_image_gradient(
                    &train_ds.images()[i],
                    train_ds.labels()[i],
                    &mut sample_grad,
                );
                if !loss.is_finite() {
                    return Err(Error::TrainingDiverged { epoch });
                }
                epoch_loss += loss;
                for (b, s) in batch_grad.iter_mut().zip(&sample_grad) {
                    *b += s;
                }
            }
            let scale = 1.0 / batch.len() as f64;
            batch_grad.iter_mut().for_each(|g| *g *= scale);
            adam.update(current.params_mut(), &batch_grad, h);
        }
        let (val_loss, val_accuracy) = loss_and_accuracy(&current, val_ds);
        if !val_loss.is_finite() {
            return Err(Error::TrainingDiverged { epoch });
        }
        curve.push(EpochRecord {
            epoch,
            train_loss: epoch_loss / train_ds.len() as f64,
            val_loss,
            val_accuracy,
        });
        if val_loss < best_loss {
            best_loss = val_loss;
            best_epoch = epoch;
            best = current.clone();
        }
    }
    Ok(TrainOutcome {
        model: best,
        best_epoch,
        curve,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{DatasetRole, Image};
    use crate::nn::{build_classifier, Variant};

    fn blobs(n: usize, seed: u32) -> LabeledImageDataset {
        let mut s = seed.wrapping_add(7);
        let mut next = move || {
            s = s.wrapping_mul(1_664_525).wrapping_add(1_013_904_223);
            (s >> 8) as f32 / (1u32 << 24) as f32
        };
        let mut images = Vec::new();
        let mut labels = Vec::new();
        for i in 0..n {
            let label = i % 2;
            let img = Image::from_fn(8, 8, 1, |y, _, _| {
                let bright = if label == 0 { y < 4 } else { y >= 4 };
                let base = if bright { 0.8 } else { 0.2 };
                (base + 0.1 * (next() - 0.5)).clamp(0.0, 1.0)
            })
            .unwrap();
            images.push(img);
            labels.push(label);
        }
        LabeledImageDataset::from_images(images, labels, vec!["top".into(), "bottom".into()], DatasetRole::RealTrain)
            .unwrap()
    }

    #[test]
    fn zero_learning_rate_keeps_initial_model() {
        let m = build_classifier((8, 8, 1), 2, Variant::ThreeBlock, 1).unwrap();
        let h = TrainHyper {
            epochs: 2,
            learning_rate: 0.0,
            ..Default::default()
        };
        let out = train(&m, &blobs(20, 1), &blobs(6, 2), &h).unwrap();
        assert_eq!(out.model.params(), m.params());
        assert_eq!(out.best_epoch, 1);
    }

    #[test]
    fn deterministic_given_seed() {
        let m = build_classifier((8, 8, 1), 2, Variant::ThreeBlock, 1).unwrap();
        let h = TrainHyper {
            epochs: 2,
            seed: 3,
            ..Default::default()
        };
        let a = train(&m, &blobs(24, 1), &blobs(6, 2), &h).unwrap();
        let b = train(&m, &blobs(24, 1), &blobs(6, 2), &h).unwrap();
        assert_eq!(a.model.params(), b.model.params());
        assert_eq!(a.curve, b.curve);
    }

    #[test]
    fn learns_easy_blobs() {
        let m = build_classifier((8, 8, 1), 2, Variant::ThreeBlock, 2).unwrap();
        let h = TrainHyper {
            epochs: 5,
            ..Default::default()
        };
        let out = train(&m, &blobs(64, 1), &blobs(16, 2), &h).unwrap();
        let (_, acc) = loss_and_accuracy(&out.model, &blobs(16, 3));
        assert!(acc >= 0.9, "accuracy {acc}");
        assert_eq!(out.curve.len(), 5);
    }

    #[test]
    fn diverging_run_reports_epoch() {
        let mut m = build_classifier((8, 8, 1), 2, Variant::ThreeBlock, 2).unwrap();
        let r = m.layout().fc2_bias.clone();
        m.params_mut()[r][0] = f64::NAN;
        let err = train(&m, &blobs(8, 1), &blobs(4, 2), &TrainHyper::default()).unwrap_err();
        assert!(matches!(err, Error::TrainingDiverged { epoch: 1 }));
    }

    #[test]
    fn rejects_out_of_range_labels() {
        let m = build_classifier((8, 8, 1), 1, Variant::ThreeBlock, 2).unwrap();
        assert!(train(&m, &blobs(4, 1), &blobs(4, 2), &TrainHyper::default()).is_err());
    }
}
