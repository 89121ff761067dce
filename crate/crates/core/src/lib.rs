//! Fixed-point coarse-to-fine segmentation of small targets in 3D volumes.
//!
//! A coarse pass segments full slices along three views and fuses them by
//! majority vote. Refinement rounds then crop each slice to the framed
//! bounding box of the previous mask and re-segment with fine models until
//! successive masks agree.

pub mod error;
pub mod fixpoint;
pub mod fusion;
pub mod harness;
pub mod io;
pub mod metrics;
pub mod model;
pub mod region;
pub mod seed;
pub mod volume;

pub use error::{Error, Result};
pub use fixpoint::{
    coarse_segment, refine_once, run_fixpoint, run_with_oracle_box, EmptyMaskPolicy,
    FixpointConfig, FixpointTrace, IterationRecord, TerminationCause,
};
pub use fusion::{majority_vote, ViewPredictions};
pub use metrics::{
    dsc, inter_iteration_dsc, soft_dsc_gradient, soft_dsc_loss, GradientField, LossValue,
};
pub use model::{ModelConfig, SegModel, SliceContext, ViewModels};
pub use region::{MarginSpec, Region2D, RegionSet};
pub use volume::{Axis, Dims, Mask3D, MaskMode, Slice2D, Volume3D, VoxelGrid};
