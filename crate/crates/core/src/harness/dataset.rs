//! Case directories and model directories.
//!
//! A case directory holds `<id>.json/.raw` intensity volumes next to
//! `<id>_mask.json/.raw` ground truth. A model directory holds
//! `folds.json` plus one `fold_<f>/` per fold with six model files named
//! `{coarse,fine}_{coronal,sagittal,axial}.json`.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;

use super::folds::{make_folds, FoldPlan};
use super::phantom::{gen_phantom, PhantomSpec};
use crate::error::{Error, Result};
use crate::io;
use crate::model::{ModelConfig, ViewModels};
use crate::volume::{Axis, Mask3D, Volume3D, VoxelGrid};

pub const MASK_SUFFIX: &str = "_mask";

#[derive(Debug, Clone)]
pub struct Case {
    pub id: String,
    pub volume: Volume3D,
    pub truth: Arc<Mask3D>,
}

impl Case {
    pub fn new(id: impl Into<String>, volume: Volume3D, truth: Mask3D) -> Result<Self> {
        truth.require_binary()?;
        if volume.dims() != truth.dims() {
            return Err(Error::DimMismatch(format!(
                "volume {} vs truth {}",
                volume.dims(),
                truth.dims()
            )));
        }
        Ok(Self {
            id: id.into(),
            volume,
            truth: Arc::new(truth),
        })
    }
}

pub fn case_id(i: usize) -> String {
    format!("case_{i:03}")
}

/// Generates `count` phantoms from `spec`, one derived seed per case.
pub fn phantom_cases(spec: &PhantomSpec, count: usize) -> Result<Vec<Case>> {
    (0..count)
        .into_par_iter()
        .map(|i| {
            let p = gen_phantom(&spec.case(i))?;
            Case::new(case_id(i), p.volume, p.mask)
        })
        .collect()
}

pub fn write_case(dir: impl AsRef<Path>, case: &Case) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    io::write_volume(&case.volume, dir.join(&case.id))?;
    io::write_mask(
        &case.truth,
        case.volume.spacing(),
        dir.join(format!("{}{MASK_SUFFIX}", case.id)),
    )
}

/// Loads every case with both files present, sorted by id.
pub fn load_cases(dir: impl AsRef<Path>) -> Result<Vec<Case>> {
    let dir = dir.as_ref();
    let mut ids = Vec::new();
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        if path.extension().and_then(|e| e.to_str()) != Some("json") {
            continue;
        }
        let Some(stem) = path.file_stem().and_then(|s| s.to_str()) else {
            continue;
        };
        if stem.ends_with(MASK_SUFFIX) || !dir.join(format!("{stem}{MASK_SUFFIX}.json")).exists() {
            continue;
        }
        ids.push(stem.to_owned());
    }
    ids.sort();
    if ids.is_empty() {
        return Err(Error::InvalidConfig(format!(
            "no cases found in {}",
            dir.display()
        )));
    }
    ids.into_iter()
        .map(|id| {
            let volume = io::read_volume(dir.join(&id))?;
            let (truth, _) = io::read_mask(dir.join(format!("{id}{MASK_SUFFIX}")))?;
            Case::new(id, volume, truth.binarize())
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scale {
    Coarse,
    Fine,
}

impl Scale {
    pub fn name(self) -> &'static str {
        match self {
            Scale::Coarse => "coarse",
            Scale::Fine => "fine",
        }
    }
}

/// The six model slots: three views at two scales.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSet {
    pub coarse: [ModelConfig; 3],
    pub fine: [ModelConfig; 3],
}

fn slot(axis: Axis) -> usize {
    axis.ordinal() as usize
}

impl ModelSet {
    pub fn get(&self, scale: Scale, axis: Axis) -> &ModelConfig {
        match scale {
            Scale::Coarse => &self.coarse[slot(axis)],
            Scale::Fine => &self.fine[slot(axis)],
        }
    }

    pub fn file_name(scale: Scale, axis: Axis) -> String {
        format!("{}_{}.json", scale.name(), axis.name())
    }

    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        for scale in [Scale::Coarse, Scale::Fine] {
            for axis in Axis::ALL {
                self.get(scale, axis)
                    .save(dir.join(Self::file_name(scale, axis)))?;
            }
        }
        Ok(())
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let load = |scale| -> Result<[ModelConfig; 3]> {
            let [c, s, a] =
                Axis::ALL.map(|axis| ModelConfig::load(dir.join(Self::file_name(scale, axis))));
            Ok([c?, s?, a?])
        };
        Ok(Self {
            coarse: load(Scale::Coarse)?,
            fine: load(Scale::Fine)?,
        })
    }

    /// Instantiates one scale's three views, binding oracles to `truth`.
    pub fn views(&self, scale: Scale, truth: Option<&Arc<Mask3D>>) -> Result<ViewModels> {
        let [c, s, a] = Axis::ALL.map(|axis| self.get(scale, axis).build(truth));
        Ok(ViewModels::new(c?, s?, a?))
    }
}

/// Per-fold model sets plus the fold plan they were trained under.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModels {
    pub plan: FoldPlan,
    pub folds: Vec<ModelSet>,
}

impl TrainedModels {
    /// Models for testing `case_id`: those trained without its fold.
    pub fn for_case(&self, case_id: &str) -> Result<&ModelSet> {
        let fold = self.plan.fold_of(case_id).ok_or_else(|| {
            Error::InvalidConfig(format!("case {case_id} is not in the fold plan"))
        })?;
        self.folds
            .get(fold)
            .ok_or_else(|| Error::InvalidConfig(format!("no models for fold {fold}")))
    }

    pub fn fold_dir(root: &Path, fold: usize) -> PathBuf {
        root.join(format!("fold_{fold}"))
    }

    pub fn save(&self, root: impl AsRef<Path>) -> Result<()> {
        let root = root.as_ref();
        fs::create_dir_all(root)?;
        let mut text = serde_json::to_string_pretty(&self.plan)?;
        text.push('\n');
        fs::write(root.join("folds.json"), text)?;
        for (f, set) in self.folds.iter().enumerate() {
            set.save(Self::fold_dir(root, f))?;
        }
        Ok(())
    }

    pub fn load(root: impl AsRef<Path>) -> Result<Self> {
        let root = root.as_ref();
        let plan: FoldPlan = serde_json::from_str(&fs::read_to_string(root.join("folds.json"))?)?;
        let folds = (0..plan.k)
            .map(|f| ModelSet::load(Self::fold_dir(root, f)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { plan, folds })
    }

    /// One untrained model set shared by every fold.
    pub fn shared<S: AsRef<str>>(
        case_ids: &[S],
        k: usize,
        seed: u64,
        set: ModelSet,
    ) -> Result<Self> {
        let plan = make_folds(case_ids, k, seed)?;
        Ok(Self {
            folds: vec![set; plan.k],
            plan,
        })
    }
}

/// Loads a model directory for a single volume: either a fold root (picking
/// `fold`) or a directory holding the six model files directly.
pub fn load_model_set(dir: impl AsRef<Path>, fold: usize) -> Result<ModelSet> {
    let dir = dir.as_ref();
    if dir.join("folds.json").exists() {
        let trained = TrainedModels::load(dir)?;
        return trained.folds.into_iter().nth(fold).ok_or_else(|| {
            Error::InvalidConfig(format!("fold {fold} not present in {}", dir.display()))
        });
    }
    ModelSet::load(dir)
}
