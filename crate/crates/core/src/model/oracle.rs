//! Noisy ground-truth oracle standing in for a trained network.
//!
//! The oracle sees the true labels of its input patch and corrupts them with
//! boundary jitter followed by independent label flips. The flip rate grows
//! with the patch's background fraction, so a tighter input region yields a
//! cleaner prediction.

use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{digest, ModelDescriptor, SegModel, SliceContext};
use crate::error::{Error, Result};
use crate::region;
use crate::seed;
use crate::volume::{self, Mask3D, Slice2D, VoxelGrid, BINARY_THRESHOLD};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleParams {
    /// Flip rate per unit background fraction.
    pub noise_coefficient: f64,
    /// Maximum displacement, in pixels, when sampling jittered labels.
    pub boundary_jitter: usize,
    #[serde(skip)]
    pub seed: u64,
}

impl OracleParams {
    pub fn new(noise_coefficient: f64, boundary_jitter: usize, seed: u64) -> Self {
        Self {
            noise_coefficient,
            boundary_jitter,
            seed,
        }
    }

    pub fn perfect(seed: u64) -> Self {
        Self::new(0.0, 0, seed)
    }

    pub fn validate(&self) -> Result<()> {
        if self.noise_coefficient < 0.0 || !self.noise_coefficient.is_finite() {
            return Err(Error::InvalidModel(format!(
                "noise coefficient must be a finite value >= 0, got {}",
                self.noise_coefficient
            )));
        }
        Ok(())
    }

    /// `min(0.5, k * background_fraction)`.
    pub fn flip_probability(&self, background_fraction: f64) -> f64 {
        (self.noise_coefficient * background_fraction).clamp(0.0, 0.5)
    }
}

/// Corrupts `truth` (aligned with `slice`) deterministically from the seed and
/// the slice's axis, index and size.
pub fn oracle_predict(slice: &Slice2D, truth: &Slice2D, params: &OracleParams) -> Result<Slice2D> {
    params.validate()?;
    if (slice.height, slice.width) != (truth.height, truth.width) {
        return Err(Error::DimMismatch(format!(
            "intensity {}x{} vs truth {}x{}",
            slice.height, slice.width, truth.height, truth.width
        )));
    }
    let (rows, cols) = (truth.height, truth.width);
    let area = truth.len();
    let background_fraction = if area == 0 {
        0.0
    } else {
        1.0 - truth.foreground_count() as f64 / area as f64
    };
    let p = params.flip_probability(background_fraction);
    let mut rng = seed::rng(
        params.seed,
        &[
            slice.axis.ordinal(),
            slice.index as u64,
            rows as u64,
            cols as u64,
        ],
    );
    let radius = params.boundary_jitter as i64;
    let mut out = Slice2D::zeros(slice.axis, slice.index, rows, cols);
    for r in 0..rows {
        for c in 0..cols {
            let (sr, sc) = if radius > 0 {
                let dr = rng.random_range(-radius..=radius);
                let dc = rng.random_range(-radius..=radius);
                (
                    (r as i64 + dr).clamp(0, rows as i64 - 1) as usize,
                    (c as i64 + dc).clamp(0, cols as i64 - 1) as usize,
                )
            } else {
                (r, c)
            };
            let mut label = truth.at(sr, sc) >= BINARY_THRESHOLD;
            if p > 0.0 && rng.random_bool(p) {
                label = !label;
            }
            out.set(r, c, if label { 1.0 } else { 0.0 });
        }
    }
    Ok(out)
}

/// An oracle bound to one case's ground truth.
pub struct OracleModel {
    params: OracleParams,
    truth: Arc<Mask3D>,
}

impl OracleModel {
    pub fn new(params: OracleParams, truth: Arc<Mask3D>) -> Result<Self> {
        params.validate()?;
        truth.require_binary()?;
        Ok(Self { params, truth })
    }

    pub fn params(&self) -> &OracleParams {
        &self.params
    }
}

impl SegModel for OracleModel {
    fn predict(&self, input: &Slice2D, ctx: &SliceContext) -> Result<Slice2D> {
        let reg = &ctx.region;
        if self.truth.dims().plane(reg.axis) != ctx.plane {
            return Err(Error::DimMismatch(format!(
                "oracle truth {} does not match {}x{} {} slices",
                self.truth.dims(),
                ctx.plane.0,
                ctx.plane.1,
                reg.axis
            )));
        }
        let full = volume::slice(self.truth.as_ref(), reg.axis, reg.index)?;
        let truth = region::crop(&full, reg)?;
        // Crops at different offsets draw different noise.
        let params = OracleParams {
            seed: seed::derive(self.params.seed, &[reg.top as u64, reg.left as u64]),
            ..self.params
        };
        oracle_predict(input, &truth, &params)
    }

    fn descriptor(&self) -> ModelDescriptor {
        let json = serde_json::to_vec(&(self.params, self.params.seed)).unwrap_or_default();
        ModelDescriptor {
            backend: "oracle".into(),
            digest: digest(&json),
        }
    }
}
