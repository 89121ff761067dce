//! Overlap metrics: hard DSC, the soft DSC loss with its analytic gradient,
//! and the inter-iteration DSC used as the fixed-point convergence measure.
//!
//! Everything accumulates in `f64` whatever the storage type.

use crate::error::{Error, Result};
use crate::volume::{Mask3D, VoxelGrid};

/// Soft DSC loss value in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct LossValue(pub f64);

impl LossValue {
    pub fn value(self) -> f64 {
        self.0
    }
}

/// Per-voxel `dL/dz_j`, aligned with the prediction.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientField(pub Vec<f64>);

impl GradientField {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

fn check_len(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::DimMismatch(format!("{a} voxels vs {b} voxels")));
    }
    Ok(())
}

fn check_binary<T: Copy + Into<f64>>(values: &[T]) -> Result<()> {
    match values
        .iter()
        .map(|&v| v.into())
        .enumerate()
        .find(|(_, v)| *v != 0.0 && *v != 1.0)
    {
        Some((index, value)) => Err(Error::NotBinary { index, value }),
        None => Ok(()),
    }
}

fn check_probability<T: Copy + Into<f64>>(values: &[T]) -> Result<()> {
    match values
        .iter()
        .map(|&v| v.into())
        .enumerate()
        .find(|(_, v)| !(0.0..=1.0).contains(v))
    {
        Some((index, value)) => Err(Error::InvalidVolume(format!(
            "prediction voxel {index} = {value} outside [0, 1]"
        ))),
        None => Ok(()),
    }
}

/// `(sum z*y, sum z, sum y)`.
fn overlap_sums<Z: Copy + Into<f64>, Y: Copy + Into<f64>>(z: &[Z], y: &[Y]) -> (f64, f64, f64) {
    let mut inter = 0.0;
    let mut sz = 0.0;
    let mut sy = 0.0;
    for (&zi, &yi) in z.iter().zip(y) {
        let (zi, yi) = (zi.into(), yi.into());
        inter += zi * yi;
        sz += zi;
        sy += yi;
    }
    (inter, sz, sy)
}

/// `2|A ∩ B| / (|A| + |B|)` over binary voxel sets. Two empty sets score 1.
pub fn dsc<A: Copy + Into<f64>, B: Copy + Into<f64>>(a: &[A], b: &[B]) -> Result<f64> {
    check_len(a.len(), b.len())?;
    check_binary(a)?;
    check_binary(b)?;
    let (inter, na, nb) = overlap_sums(a, b);
    if na + nb == 0.0 {
        return Ok(1.0);
    }
    Ok(2.0 * inter / (na + nb))
}

pub fn mask_dsc(a: &Mask3D, b: &Mask3D) -> Result<f64> {
    if a.dims() != b.dims() {
        return Err(Error::DimMismatch(format!("{} vs {}", a.dims(), b.dims())));
    }
    dsc(a.data(), b.data())
}

/// `1 - 2 Σ z_i y_i / (Σ z_i + Σ y_i)` for probabilities `z` against binary `y`.
pub fn soft_dsc_loss<Z: Copy + Into<f64>, Y: Copy + Into<f64>>(
    z: &[Z],
    y: &[Y],
) -> Result<LossValue> {
    let (inter, sz, sy) = checked_sums(z, y)?;
    Ok(LossValue(1.0 - 2.0 * inter / (sz + sy)))
}

/// `dL/dz_j = -2 (y_j S - I) / S^2` with `S = Σz + Σy` and `I = Σzy`.
pub fn soft_dsc_gradient<Z: Copy + Into<f64>, Y: Copy + Into<f64>>(
    z: &[Z],
    y: &[Y],
) -> Result<GradientField> {
    soft_dsc_loss_and_gradient(z, y).map(|(_, g)| g)
}

pub fn soft_dsc_loss_and_gradient<Z: Copy + Into<f64>, Y: Copy + Into<f64>>(
    z: &[Z],
    y: &[Y],
) -> Result<(LossValue, GradientField)> {
    let (inter, sz, sy) = checked_sums(z, y)?;
    let s = sz + sy;
    let s2 = s * s;
    let grad = y
        .iter()
        .map(|&yj| -2.0 * (yj.into() * s - inter) / s2)
        .collect();
    Ok((LossValue(1.0 - 2.0 * inter / s), GradientField(grad)))
}

fn checked_sums<Z: Copy + Into<f64>, Y: Copy + Into<f64>>(
    z: &[Z],
    y: &[Y],
) -> Result<(f64, f64, f64)> {
    check_len(z.len(), y.len())?;
    check_probability(z)?;
    check_binary(y)?;
    let sums = overlap_sums(z, y);
    if sums.1 + sums.2 == 0.0 {
        return Err(Error::DegenerateLoss);
    }
    Ok(sums)
}

/// `d(t) = DSC(Z(t-1), Z(t))` between successive binary iteration masks.
pub fn inter_iteration_dsc(prev: &Mask3D, cur: &Mask3D) -> Result<f64> {
    prev.require_binary()?;
    cur.require_binary()?;
    mask_dsc(prev, cur)
}
