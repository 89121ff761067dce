//! Cross-validated training of the six model slots.
//!
//! Coarse models see full slices with at least `min_pixels` foreground
//! pixels. Fine models see each foreground slice cropped to its minimal box
//! plus a random frame, filled with the original intensities.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dataset::{Case, ModelSet, Scale, TrainedModels};
use super::folds::{make_folds, DEFAULT_FOLDS};
use crate::error::{Error, Result};
use crate::model::{classifier_train, Backend, ClassifierParams, ModelConfig, OracleParams};
use crate::region::{self, MarginSpec, MIN_TRAINING_PIXELS};
use crate::seed;
use crate::volume::{self, Axis, Slice2D, VoxelGrid};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub backend: Backend,
    pub folds: usize,
    pub seed: u64,
    pub min_pixels: usize,
    pub margin_lo: usize,
    pub margin_hi: usize,
    pub classifier: ClassifierParams,
    pub oracle_noise: f64,
    pub oracle_jitter: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            backend: Backend::Classifier,
            folds: DEFAULT_FOLDS,
            seed: 0,
            min_pixels: MIN_TRAINING_PIXELS,
            margin_lo: 0,
            margin_hi: 60,
            classifier: ClassifierParams::default(),
            oracle_noise: 0.05,
            oracle_jitter: 1,
        }
    }
}

fn scale_tag(scale: Scale) -> u64 {
    match scale {
        Scale::Coarse => 0,
        Scale::Fine => 1,
    }
}

/// `(intensity, truth)` pairs for one slot drawn from `cases`.
pub fn training_samples(
    cases: &[&Case],
    scale: Scale,
    axis: Axis,
    config: &TrainConfig,
    fold: usize,
) -> Result<Vec<(Slice2D, Slice2D)>> {
    let mut samples = Vec::new();
    for (ci, case) in cases.iter().enumerate() {
        let truth = case.truth.as_ref();
        match scale {
            Scale::Coarse => {
                for i in region::select_training_slices(truth, axis, config.min_pixels) {
                    samples.push((
                        volume::slice(&case.volume, axis, i)?,
                        volume::slice(truth, axis, i)?,
                    ));
                }
            }
            Scale::Fine => {
                let margins = MarginSpec::random(
                    config.margin_lo,
                    config.margin_hi,
                    seed::derive(config.seed, &[fold as u64, ci as u64, axis.ordinal()]),
                );
                margins.validate()?;
                let plane = truth.dims().plane(axis);
                for i in 0..truth.dims().extent(axis) {
                    let t = volume::slice(truth, axis, i)?;
                    let Some(bbox) = region::min_bbox(&t) else {
                        continue;
                    };
                    let reg = region::expand(&bbox, &margins, plane);
                    let img = volume::slice(&case.volume, axis, i)?;
                    samples.push((region::crop(&img, &reg)?, region::crop(&t, &reg)?));
                }
            }
        }
    }
    Ok(samples)
}

fn oracle_set(config: &TrainConfig) -> ModelSet {
    let make = |scale: Scale| {
        Axis::ALL.map(|axis| {
            ModelConfig::Oracle(OracleParams::new(
                config.oracle_noise,
                config.oracle_jitter,
                seed::derive(config.seed, &[scale_tag(scale), axis.ordinal()]),
            ))
        })
    };
    ModelSet {
        coarse: make(Scale::Coarse),
        fine: make(Scale::Fine),
    }
}

/// Builds a fold plan over `cases` and one model set per fold, each trained
/// on the other folds. Oracle backends need no training and share one set.
pub fn train_models(cases: &[Case], config: &TrainConfig) -> Result<TrainedModels> {
    let ids: Vec<&str> = cases.iter().map(|c| c.id.as_str()).collect();
    let plan = make_folds(&ids, config.folds, config.seed)?;
    let folds = match config.backend {
        Backend::Oracle => vec![oracle_set(config); plan.k],
        Backend::Classifier => (0..plan.k)
            .map(|fold| {
                let train: Vec<&Case> = cases
                    .iter()
                    .filter(|c| plan.fold_of(&c.id) != Some(fold))
                    .collect();
                let slots: Vec<(Scale, Axis)> = [Scale::Coarse, Scale::Fine]
                    .into_iter()
                    .flat_map(|s| Axis::ALL.map(|a| (s, a)))
                    .collect();
                let trained = slots
                    .par_iter()
                    .map(|&(scale, axis)| {
                        let samples = training_samples(&train, scale, axis, config, fold)?;
                        if samples.is_empty() {
                            return Err(Error::InvalidConfig(format!(
                                "fold {fold}: no {} {axis} training slices",
                                scale.name()
                            )));
                        }
                        let out = classifier_train(&samples, &config.classifier)?;
                        log::info!(
                            "fold {fold} {} {axis}: {} samples, final loss {:.4}",
                            scale.name(),
                            samples.len(),
                            out.loss_curve.last().copied().unwrap_or(f64::NAN)
                        );
                        Ok(ModelConfig::Classifier {
                            params: out.params,
                            seed: config.seed,
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                let mut it = trained.into_iter();
                let mut next3 = || -> [ModelConfig; 3] {
                    [it.next().unwrap(), it.next().unwrap(), it.next().unwrap()]
                };
                Ok(ModelSet {
                    coarse: next3(),
                    fine: next3(),
                })
            })
            .collect::<Result<Vec<_>>>()?,
    };
    Ok(TrainedModels { plan, folds })
}
