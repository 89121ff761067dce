//! Fixed-point segmentation: a coarse pass over full slices produces `Z(0)`;
//! each following round crops every slice to the expanded bounding box of the
//! previous mask, re-segments with the fine models, and fuses the views. The
//! loop stops once the inter-iteration DSC reaches the threshold `R` or after
//! `T` rounds.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fusion::{majority_vote, ViewPredictions};
use crate::metrics::inter_iteration_dsc;
use crate::model::{check_output, SliceContext, ViewModels};
use crate::region::{self, MarginSpec, Region2D};
use crate::volume::{self, Axis, Mask3D, MaskMode, Volume3D, VoxelGrid};

/// What a refinement round does when the previous mask has no foreground.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmptyMaskPolicy {
    /// Use the boxes of the coarse mask `Z(0)`, or full slices if it is empty too.
    FallbackToCoarseBox,
    /// Treat every slice as a full-slice region.
    #[default]
    FallbackToFullSlice,
    /// Stop and return the empty mask.
    Terminate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixpointConfig {
    pub threshold: f64,
    pub max_iterations: usize,
    pub margins: MarginSpec,
    #[serde(default)]
    pub empty_mask_policy: EmptyMaskPolicy,
}

impl Default for FixpointConfig {
    fn default() -> Self {
        Self {
            threshold: 0.95,
            max_iterations: 10,
            margins: MarginSpec::fixed(30),
            empty_mask_policy: EmptyMaskPolicy::default(),
        }
    }
}

impl FixpointConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.threshold > 0.0 && self.threshold <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "threshold R must lie in (0, 1], got {}",
                self.threshold
            )));
        }
        self.margins.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminationCause {
    ThresholdReached,
    MaxIterations,
    EmptyMaskTerminated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub t: usize,
    /// `DSC(Z(t-1), Z(t))`.
    pub d: f64,
    pub foreground: usize,
    pub wall_time_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixpointTrace {
    pub threshold: f64,
    pub max_iterations: usize,
    pub coarse_foreground: usize,
    pub coarse_time_ms: f64,
    pub iterations: Vec<IterationRecord>,
    pub cause: TerminationCause,
    pub total_time_ms: f64,
}

impl FixpointTrace {
    pub fn iteration_count(&self) -> usize {
        self.iterations.len()
    }

    pub fn last_d(&self) -> Option<f64> {
        self.iterations.last().map(|r| r.d)
    }
}

fn check_dims(volume: &Volume3D, mask: &Mask3D) -> Result<()> {
    if volume.dims() != mask.dims() {
        return Err(Error::DimMismatch(format!(
            "volume {} vs mask {}",
            volume.dims(),
            mask.dims()
        )));
    }
    Ok(())
}

/// Per-view input regions, indexed by slice; `None` skips the slice.
pub type ViewRegions = [Vec<Option<Region2D>>; 3];

pub fn full_regions(volume: &Volume3D) -> ViewRegions {
    let dims = volume.dims();
    Axis::ALL.map(|axis| {
        let (rows, cols) = dims.plane(axis);
        (0..dims.extent(axis))
            .map(|i| Some(Region2D::full(axis, i, rows, cols)))
            .collect()
    })
}

pub fn mask_regions(mask: &Mask3D, margins: &MarginSpec) -> ViewRegions {
    Axis::ALL.map(|axis| region::view_regions(mask, axis, margins))
}

/// Segments every region with its view's model, pastes and thresholds the
/// predictions, stacks each view to 3D, and majority-votes the views.
pub fn segment_regions(
    volume: &Volume3D,
    models: &ViewModels,
    regions: &ViewRegions,
) -> Result<Mask3D> {
    let dims = volume.dims();
    let per_view = Axis::ALL
        .par_iter()
        .zip(regions.par_iter())
        .map(|(&axis, view)| {
            let plane = dims.plane(axis);
            if view.len() != dims.extent(axis) {
                return Err(Error::DimMismatch(format!(
                    "{} {axis} regions for {} slices",
                    view.len(),
                    dims.extent(axis)
                )));
            }
            let model = models.get(axis);
            let slices = view
                .par_iter()
                .enumerate()
                .map(|(index, reg)| {
                    let Some(reg) = reg else {
                        return Ok(volume::Slice2D::zeros(axis, index, plane.0, plane.1));
                    };
                    let wrap = |e: Error| Error::Model {
                        axis,
                        index,
                        source: Box::new(e),
                    };
                    let full = volume::slice(volume, axis, index)?;
                    reg.validate(plane.0, plane.1)?;
                    let patch = if reg.area() == full.len() {
                        full
                    } else {
                        region::crop(&full, reg)?
                    };
                    let ctx = SliceContext {
                        region: *reg,
                        plane,
                    };
                    let pred = model.predict(&patch, &ctx).map_err(wrap)?;
                    check_output(&patch, &pred).map_err(wrap)?;
                    let mut canvas = if reg.area() == plane.0 * plane.1 {
                        pred
                    } else {
                        region::paste(reg, &pred, plane)?
                    };
                    canvas.axis = axis;
                    canvas.index = index;
                    Ok(canvas.binarize())
                })
                .collect::<Result<Vec<_>>>()?;
            Mask3D::from_slices(&slices, axis, MaskMode::Binary)
        })
        .collect::<Result<Vec<_>>>()?;
    let [coronal, sagittal, axial]: [Mask3D; 3] = per_view.try_into().expect("three views");
    majority_vote(&ViewPredictions::new(coronal, sagittal, axial)?)
}

/// `Z(0)`: the coarse models on full slices, fused.
pub fn coarse_segment(volume: &Volume3D, coarse: &ViewModels) -> Result<Mask3D> {
    segment_regions(volume, coarse, &full_regions(volume))
}

/// One refinement round from `z_prev`. An empty `z_prev` yields [`Error::EmptyMask`].
pub fn refine_once(
    volume: &Volume3D,
    z_prev: &Mask3D,
    fine: &ViewModels,
    margins: &MarginSpec,
) -> Result<Mask3D> {
    z_prev.require_binary()?;
    check_dims(volume, z_prev)?;
    margins.validate()?;
    if z_prev.foreground_count() == 0 {
        return Err(Error::EmptyMask);
    }
    segment_regions(volume, fine, &mask_regions(z_prev, margins))
}

/// A single fine pass with regions taken from the ground truth.
pub fn run_with_oracle_box(
    volume: &Volume3D,
    fine: &ViewModels,
    truth: &Mask3D,
    margins: &MarginSpec,
) -> Result<Mask3D> {
    refine_once(volume, truth, fine, margins)
}

enum Step {
    Mask(Mask3D),
    Terminated,
}

fn refine_step(
    volume: &Volume3D,
    z_prev: &Mask3D,
    z0: &Mask3D,
    fine: &ViewModels,
    config: &FixpointConfig,
) -> Result<Step> {
    match refine_once(volume, z_prev, fine, &config.margins) {
        Err(Error::EmptyMask) => match config.empty_mask_policy {
            EmptyMaskPolicy::Terminate => Ok(Step::Terminated),
            EmptyMaskPolicy::FallbackToFullSlice => {
                segment_regions(volume, fine, &full_regions(volume)).map(Step::Mask)
            }
            EmptyMaskPolicy::FallbackToCoarseBox => {
                let regions = if z0.foreground_count() == 0 {
                    full_regions(volume)
                } else {
                    mask_regions(z0, &config.margins)
                };
                segment_regions(volume, fine, &regions).map(Step::Mask)
            }
        },
        other => other.map(Step::Mask),
    }
}

fn elapsed_ms(since: Instant) -> f64 {
    since.elapsed().as_secs_f64() * 1e3
}

fn drive(
    volume: &Volume3D,
    coarse: &ViewModels,
    fine: &ViewModels,
    config: &FixpointConfig,
    stop_at_threshold: bool,
    mut observe: impl FnMut(usize, &Mask3D),
) -> Result<(Mask3D, FixpointTrace)> {
    config.validate()?;
    let start = Instant::now();
    let z0 = coarse_segment(volume, coarse)?;
    let coarse_time_ms = elapsed_ms(start);
    observe(0, &z0);
    let mut trace = FixpointTrace {
        threshold: config.threshold,
        max_iterations: config.max_iterations,
        coarse_foreground: z0.foreground_count(),
        coarse_time_ms,
        iterations: Vec::new(),
        cause: TerminationCause::MaxIterations,
        total_time_ms: 0.0,
    };
    let mut current = z0.clone();
    for t in 1..=config.max_iterations {
        let round = Instant::now();
        let next = match refine_step(volume, &current, &z0, fine, config)? {
            Step::Mask(m) => m,
            Step::Terminated => {
                trace.cause = TerminationCause::EmptyMaskTerminated;
                break;
            }
        };
        let d = inter_iteration_dsc(&current, &next)?;
        trace.iterations.push(IterationRecord {
            t,
            d,
            foreground: next.foreground_count(),
            wall_time_ms: elapsed_ms(round),
        });
        observe(t, &next);
        current = next;
        if stop_at_threshold && d >= config.threshold {
            trace.cause = TerminationCause::ThresholdReached;
            break;
        }
    }
    trace.total_time_ms = elapsed_ms(start);
    Ok((current, trace))
}

/// Runs the coarse pass then up to `T` refinement rounds, stopping at the
/// first round whose inter-iteration DSC is at least `R`.
pub fn run_fixpoint(
    volume: &Volume3D,
    coarse: &ViewModels,
    fine: &ViewModels,
    config: &FixpointConfig,
) -> Result<(Mask3D, FixpointTrace)> {
    drive(volume, coarse, fine, config, true, |_, _| {})
}

/// [`run_fixpoint`] with a callback receiving `(t, Z(t))` for `t = 0, 1, ...`.
pub fn run_fixpoint_observed(
    volume: &Volume3D,
    coarse: &ViewModels,
    fine: &ViewModels,
    config: &FixpointConfig,
    observe: impl FnMut(usize, &Mask3D),
) -> Result<(Mask3D, FixpointTrace)> {
    drive(volume, coarse, fine, config, true, observe)
}

/// All `T` rounds regardless of the threshold (the sequence of masks does not
/// depend on `R`), reporting each mask to `observe`. Returns the per-round
/// records; the run only ends early under [`EmptyMaskPolicy::Terminate`].
pub fn trajectory(
    volume: &Volume3D,
    coarse: &ViewModels,
    fine: &ViewModels,
    config: &FixpointConfig,
    observe: impl FnMut(usize, &Mask3D),
) -> Result<Vec<IterationRecord>> {
    drive(volume, coarse, fine, config, false, observe).map(|(_, trace)| trace.iterations)
}
