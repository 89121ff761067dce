//! Pluggable per-view 2D segmentation models.
//!
//! A [`SegModel`] maps an intensity slice (a full slice or a cropped patch)
//! to a probability slice of identical size. Two backends ship here: a noisy
//! [`oracle`] that corrupts hidden ground truth, and a trainable per-pixel
//! logistic [`classifier`] fitted through the soft DSC loss.

pub mod classifier;
pub mod oracle;

use std::fs;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::region::Region2D;
use crate::volume::{Axis, Mask3D, Slice2D};

pub use classifier::{
    classifier_predict, classifier_train, ClassifierModel, ClassifierParams, TrainOutcome,
};
pub use oracle::{oracle_predict, OracleModel, OracleParams};

/// Where an input slice came from: its region in full-slice coordinates
/// (the whole slice for coarse passes) and the full slice size.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SliceContext {
    pub region: Region2D,
    pub plane: (usize, usize),
}

impl SliceContext {
    pub fn full(axis: Axis, index: usize, plane: (usize, usize)) -> Self {
        Self {
            region: Region2D::full(axis, index, plane.0, plane.1),
            plane,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelDescriptor {
    pub backend: String,
    pub digest: String,
}

pub trait SegModel: Send + Sync {
    /// Probability map with the same dims as `input`.
    fn predict(&self, input: &Slice2D, ctx: &SliceContext) -> Result<Slice2D>;

    fn descriptor(&self) -> ModelDescriptor;
}

/// Adapts a closure into a [`SegModel`].
pub struct FnModel<F>(pub F);

impl<F> SegModel for FnModel<F>
where
    F: Fn(&Slice2D, &SliceContext) -> Result<Slice2D> + Send + Sync,
{
    fn predict(&self, input: &Slice2D, ctx: &SliceContext) -> Result<Slice2D> {
        (self.0)(input, ctx)
    }

    fn descriptor(&self) -> ModelDescriptor {
        ModelDescriptor {
            backend: "fn".into(),
            digest: String::new(),
        }
    }
}

impl<M: SegModel + ?Sized> SegModel for Arc<M> {
    fn predict(&self, input: &Slice2D, ctx: &SliceContext) -> Result<Slice2D> {
        (**self).predict(input, ctx)
    }

    fn descriptor(&self) -> ModelDescriptor {
        (**self).descriptor()
    }
}

impl<M: SegModel + ?Sized> SegModel for Box<M> {
    fn predict(&self, input: &Slice2D, ctx: &SliceContext) -> Result<Slice2D> {
        (**self).predict(input, ctx)
    }

    fn descriptor(&self) -> ModelDescriptor {
        (**self).descriptor()
    }
}

/// One model per view.
pub struct ViewModels {
    coronal: Box<dyn SegModel>,
    sagittal: Box<dyn SegModel>,
    axial: Box<dyn SegModel>,
}

impl ViewModels {
    pub fn new(
        coronal: Box<dyn SegModel>,
        sagittal: Box<dyn SegModel>,
        axial: Box<dyn SegModel>,
    ) -> Self {
        Self {
            coronal,
            sagittal,
            axial,
        }
    }

    pub fn from_fn(mut make: impl FnMut(Axis) -> Box<dyn SegModel>) -> Self {
        Self::new(make(Axis::Coronal), make(Axis::Sagittal), make(Axis::Axial))
    }

    pub fn get(&self, axis: Axis) -> &dyn SegModel {
        match axis {
            Axis::Coronal => self.coronal.as_ref(),
            Axis::Sagittal => self.sagittal.as_ref(),
            Axis::Axial => self.axial.as_ref(),
        }
    }
}

/// Checks the output contract every backend shares.
pub(crate) fn check_output(input: &Slice2D, output: &Slice2D) -> Result<()> {
    if (output.height, output.width) != (input.height, input.width)
        || output.data.len() != input.data.len()
    {
        return Err(Error::DimMismatch(format!(
            "model returned {}x{} for a {}x{} input",
            output.height, output.width, input.height, input.width
        )));
    }
    if let Some(v) = output.data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::InvalidModel(format!(
            "model output {v} outside [0, 1]"
        )));
    }
    Ok(())
}

/// FNV-1a over the serialized parameters.
pub(crate) fn digest(bytes: &[u8]) -> String {
    let hash = bytes.iter().fold(0xcbf2_9ce4_8422_2325u64, |h, &b| {
        (h ^ b as u64).wrapping_mul(0x0100_0000_01b3)
    });
    format!("{hash:016x}")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    Oracle,
    Classifier,
}

/// On-disk model file: `{"backend": ..., "params": {...}, "seed": N}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub backend: Backend,
    pub params: serde_json::Value,
    pub seed: u64,
}

/// A backend configuration ready to be instantiated.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelConfig {
    Oracle(OracleParams),
    Classifier { params: ClassifierParams, seed: u64 },
}

impl ModelConfig {
    pub fn backend(&self) -> Backend {
        match self {
            ModelConfig::Oracle(_) => Backend::Oracle,
            ModelConfig::Classifier { .. } => Backend::Classifier,
        }
    }

    pub fn to_file(&self) -> ModelFile {
        match self {
            ModelConfig::Oracle(p) => ModelFile {
                backend: Backend::Oracle,
                params: serde_json::to_value(p).expect("plain struct"),
                seed: p.seed,
            },
            ModelConfig::Classifier { params, seed } => ModelFile {
                backend: Backend::Classifier,
                params: serde_json::to_value(params).expect("plain struct"),
                seed: *seed,
            },
        }
    }

    pub fn from_file(file: ModelFile) -> Result<Self> {
        let bad =
            |e: serde_json::Error| Error::InvalidModel(format!("{:?} params: {e}", file.backend));
        Ok(match file.backend {
            Backend::Oracle => {
                let mut p: OracleParams =
                    serde_json::from_value(file.params.clone()).map_err(bad)?;
                p.seed = file.seed;
                p.validate()?;
                ModelConfig::Oracle(p)
            }
            Backend::Classifier => {
                let params: ClassifierParams =
                    serde_json::from_value(file.params.clone()).map_err(bad)?;
                params.validate()?;
                ModelConfig::Classifier {
                    params,
                    seed: file.seed,
                }
            }
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(&fs::read_to_string(path)?)?;
        Self::from_file(file)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut text = serde_json::to_string_pretty(&self.to_file())?;
        text.push('\n');
        fs::write(path, text)?;
        Ok(())
    }

    /// Builds the model. The oracle needs the case's ground truth as a side channel.
    pub fn build(&self, truth: Option<&Arc<Mask3D>>) -> Result<Box<dyn SegModel>> {
        match self {
            ModelConfig::Oracle(p) => {
                let truth = truth.ok_or_else(|| {
                    Error::InvalidModel("the oracle backend needs the ground-truth mask".into())
                })?;
                Ok(Box::new(OracleModel::new(*p, Arc::clone(truth))?))
            }
            ModelConfig::Classifier { params, .. } => {
                Ok(Box::new(ClassifierModel::new(params.clone())?))
            }
        }
    }
}
