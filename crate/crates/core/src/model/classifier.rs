//! Per-pixel logistic classifier trained by gradient descent on the soft DSC
//! loss, one slice per step.
//!
//! Features per pixel: intensity, 5x5 local mean, 5x5 local variance, and a
//! constant bias term. Windows use replicate padding at the borders.

use serde::{Deserialize, Serialize};

use super::{digest, ModelDescriptor, SegModel, SliceContext};
use crate::error::{Error, Result};
use crate::metrics;
use crate::volume::Slice2D;

pub const NUM_FEATURES: usize = 4;
const WINDOW_RADIUS: isize = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierParams {
    /// `[intensity, local mean, local variance, bias]`.
    pub weights: [f64; NUM_FEATURES],
    pub learning_rate: f64,
    pub epochs: usize,
}

impl Default for ClassifierParams {
    fn default() -> Self {
        Self {
            weights: [0.0; NUM_FEATURES],
            learning_rate: 0.5,
            epochs: 200,
        }
    }
}

impl ClassifierParams {
    pub fn validate(&self) -> Result<()> {
        if self.weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::InvalidModel(format!(
                "non-finite weights {:?}",
                self.weights
            )));
        }
        if self.learning_rate < 0.0 || !self.learning_rate.is_finite() {
            return Err(Error::InvalidModel(format!(
                "learning rate must be finite and >= 0, got {}",
                self.learning_rate
            )));
        }
        Ok(())
    }
}

pub type Features = [f64; NUM_FEATURES];

pub fn features(slice: &Slice2D) -> Vec<Features> {
    let (rows, cols) = (slice.height as isize, slice.width as isize);
    let mut out = Vec::with_capacity(slice.len());
    let n = ((2 * WINDOW_RADIUS + 1) * (2 * WINDOW_RADIUS + 1)) as f64;
    for r in 0..rows {
        for c in 0..cols {
            let mut sum = 0.0;
            let mut sq = 0.0;
            for dr in -WINDOW_RADIUS..=WINDOW_RADIUS {
                let rr = (r + dr).clamp(0, rows - 1) as usize;
                for dc in -WINDOW_RADIUS..=WINDOW_RADIUS {
                    let cc = (c + dc).clamp(0, cols - 1) as usize;
                    let v = slice.at(rr, cc) as f64;
                    sum += v;
                    sq += v * v;
                }
            }
            let mean = sum / n;
            let var = (sq / n - mean * mean).max(0.0);
            out.push([slice.at(r as usize, c as usize) as f64, mean, var, 1.0]);
        }
    }
    out
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

#[inline]
fn dot(w: &Features, f: &Features) -> f64 {
    w.iter().zip(f).map(|(a, b)| a * b).sum()
}

fn probabilities(feats: &[Features], weights: &Features) -> Vec<f64> {
    feats.iter().map(|f| sigmoid(dot(weights, f))).collect()
}

/// Per-pixel `sigmoid(w . features)`.
pub fn classifier_predict(slice: &Slice2D, params: &ClassifierParams) -> Result<Slice2D> {
    params.validate()?;
    let z = probabilities(&features(slice), &params.weights);
    Ok(Slice2D {
        data: z.into_iter().map(|v| v as f32).collect(),
        ..slice.clone()
    })
}

/// Soft DSC loss of the classifier on one sample and its gradient with
/// respect to the weights, chained through the sigmoid.
pub fn loss_and_weight_gradient(
    feats: &[Features],
    truth: &[f32],
    weights: &Features,
) -> Result<(f64, Features)> {
    let z = probabilities(feats, weights);
    let (loss, dz) = metrics::soft_dsc_loss_and_gradient(&z, truth)?;
    let mut grad = [0.0; NUM_FEATURES];
    for ((f, zj), gj) in feats.iter().zip(&z).zip(dz.as_slice()) {
        let scale = gj * zj * (1.0 - zj);
        for (g, x) in grad.iter_mut().zip(f) {
            *g += scale * x;
        }
    }
    Ok((loss.value(), grad))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub params: ClassifierParams,
    /// Mean pre-step loss over the samples of each epoch.
    pub loss_curve: Vec<f64>,
    pub skipped: usize,
}

/// Gradient descent with one sample per step, in the given order.
pub fn classifier_train(
    samples: &[(Slice2D, Slice2D)],
    params: &ClassifierParams,
) -> Result<TrainOutcome> {
    params.validate()?;
    if samples.is_empty() {
        return Err(Error::InvalidConfig(
            "classifier training needs at least one sample".into(),
        ));
    }
    let prepared = samples
        .iter()
        .map(|(img, truth)| {
            if (img.height, img.width) != (truth.height, truth.width) {
                return Err(Error::DimMismatch(format!(
                    "training image {}x{} vs truth {}x{}",
                    img.height, img.width, truth.height, truth.width
                )));
            }
            if let Some(v) = truth.data.iter().find(|&&v| v != 0.0 && v != 1.0) {
                return Err(Error::NotBinary {
                    index: 0,
                    value: *v as f64,
                });
            }
            Ok((features(img), truth.data.as_slice()))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut weights = params.weights;
    let mut loss_curve = Vec::with_capacity(params.epochs);
    let mut skipped = 0;
    for epoch in 0..params.epochs {
        let mut total = 0.0;
        let mut used = 0usize;
        for (i, (feats, truth)) in prepared.iter().enumerate() {
            match loss_and_weight_gradient(feats, truth, &weights) {
                Ok((loss, grad)) => {
                    total += loss;
                    used += 1;
                    for (w, g) in weights.iter_mut().zip(grad) {
                        *w -= params.learning_rate * g;
                    }
                }
                Err(Error::DegenerateLoss) => {
                    log::warn!("epoch {epoch}: skipping degenerate sample {i}");
                    skipped += 1;
                }
                Err(e) => return Err(e),
            }
        }
        loss_curve.push(if used == 0 {
            f64::NAN
        } else {
            total / used as f64
        });
    }
    let trained = ClassifierParams {
        weights,
        ..params.clone()
    };
    trained.validate()?;
    Ok(TrainOutcome {
        params: trained,
        loss_curve,
        skipped,
    })
}

pub struct ClassifierModel {
    params: ClassifierParams,
}

impl ClassifierModel {
    pub fn new(params: ClassifierParams) -> Result<Self> {
        params.validate()?;
        Ok(Self { params })
    }
}

impl SegModel for ClassifierModel {
    fn predict(&self, input: &Slice2D, _ctx: &SliceContext) -> Result<Slice2D> {
        classifier_predict(input, &self.params)
    }

    fn descriptor(&self) -> ModelDescriptor {
        ModelDescriptor {
            backend: "classifier".into(),
            digest: digest(&serde_json::to_vec(&self.params).unwrap_or_default()),
        }
    }
}
