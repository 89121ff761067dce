//! Volume and mask containers plus tri-axial slicing.
//!
//! Voxels are stored in canonical `(coronal, sagittal, axial)` order with the
//! axial index fastest: the voxel at `(w, h, l)` lives at `(w * H + h) * L + l`.
//!
//! In-plane orientation of each view:
//!
//! | axis     | slice index | rows | cols |
//! |----------|-------------|------|------|
//! | coronal  | `w`         | `h`  | `l`  |
//! | sagittal | `h`         | `w`  | `l`  |
//! | axial    | `l`         | `w`  | `h`  |

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Threshold used for every probability to binary conversion.
pub const BINARY_THRESHOLD: f32 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    Coronal,
    Sagittal,
    Axial,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::Coronal, Axis::Sagittal, Axis::Axial];

    pub fn name(self) -> &'static str {
        match self {
            Axis::Coronal => "coronal",
            Axis::Sagittal => "sagittal",
            Axis::Axial => "axial",
        }
    }

    pub(crate) fn ordinal(self) -> u64 {
        match self {
            Axis::Coronal => 0,
            Axis::Sagittal => 1,
            Axis::Axial => 2,
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Voxel counts `(W, H, L)` along the coronal, sagittal and axial axes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Dims {
    pub w: usize,
    pub h: usize,
    pub l: usize,
}

impl Dims {
    pub fn new(w: usize, h: usize, l: usize) -> Self {
        Self { w, h, l }
    }

    pub fn len(&self) -> usize {
        self.w * self.h * self.l
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn as_array(&self) -> [usize; 3] {
        [self.w, self.h, self.l]
    }

    pub fn extent(&self, axis: Axis) -> usize {
        match axis {
            Axis::Coronal => self.w,
            Axis::Sagittal => self.h,
            Axis::Axial => self.l,
        }
    }

    /// `(rows, cols)` of a slice taken along `axis`.
    pub fn plane(&self, axis: Axis) -> (usize, usize) {
        match axis {
            Axis::Coronal => (self.h, self.l),
            Axis::Sagittal => (self.w, self.l),
            Axis::Axial => (self.w, self.h),
        }
    }

    #[inline]
    pub fn offset(&self, w: usize, h: usize, l: usize) -> usize {
        (w * self.h + h) * self.l + l
    }

    /// Linear offset of in-plane pixel `(row, col)` of slice `index` along `axis`.
    #[inline]
    pub fn plane_offset(&self, axis: Axis, index: usize, row: usize, col: usize) -> usize {
        match axis {
            Axis::Coronal => self.offset(index, row, col),
            Axis::Sagittal => self.offset(row, index, col),
            Axis::Axial => self.offset(row, col, index),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.w == 0 || self.h == 0 || self.l == 0 {
            return Err(Error::InvalidVolume(format!(
                "dims must be positive, got {:?}",
                self.as_array()
            )));
        }
        Ok(())
    }
}

impl fmt::Display for Dims {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}x{}", self.w, self.h, self.l)
    }
}

/// Anything laid out as a dense canonical-order voxel grid.
pub trait VoxelGrid {
    fn dims(&self) -> Dims;
    fn data(&self) -> &[f32];
}

/// Scalar intensity volume with voxel spacing in millimeters.
#[derive(Debug, Clone, PartialEq)]
pub struct Volume3D {
    dims: Dims,
    spacing: [f64; 3],
    data: Vec<f32>,
}

impl Volume3D {
    pub fn new(dims: Dims, spacing: [f64; 3], data: Vec<f32>) -> Result<Self> {
        dims.validate()?;
        if spacing.iter().any(|s| *s <= 0.0 || !s.is_finite()) {
            return Err(Error::InvalidVolume(format!(
                "spacing must be positive, got {spacing:?}"
            )));
        }
        if data.len() != dims.len() {
            return Err(Error::InvalidVolume(format!(
                "data length {} does not match dims {dims} ({} voxels)",
                data.len(),
                dims.len()
            )));
        }
        Ok(Self {
            dims,
            spacing,
            data,
        })
    }

    pub fn from_fn(
        dims: Dims,
        spacing: [f64; 3],
        mut f: impl FnMut(usize, usize, usize) -> f32,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(dims.len());
        for w in 0..dims.w {
            for h in 0..dims.h {
                for l in 0..dims.l {
                    data.push(f(w, h, l));
                }
            }
        }
        Self::new(dims, spacing, data)
    }

    pub fn spacing(&self) -> [f64; 3] {
        self.spacing
    }

    pub fn get(&self, w: usize, h: usize, l: usize) -> f32 {
        self.data[self.dims.offset(w, h, l)]
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    /// Rebuilds a volume from a complete, ordered set of slices along `axis`.
    pub fn from_slices(slices: &[Slice2D], axis: Axis, spacing: [f64; 3]) -> Result<Self> {
        let (dims, data) = stack(slices, axis)?;
        Self::new(dims, spacing, data)
    }
}

impl VoxelGrid for Volume3D {
    fn dims(&self) -> Dims {
        self.dims
    }
    fn data(&self) -> &[f32] {
        &self.data
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaskMode {
    Binary,
    Probability,
}

/// Segmentation volume aligned with a [`Volume3D`].
#[derive(Debug, Clone, PartialEq)]
pub struct Mask3D {
    dims: Dims,
    mode: MaskMode,
    data: Vec<f32>,
}

impl Mask3D {
    pub fn new(dims: Dims, mode: MaskMode, data: Vec<f32>) -> Result<Self> {
        dims.validate()?;
        if data.len() != dims.len() {
            return Err(Error::InvalidVolume(format!(
                "mask length {} does not match dims {dims}",
                data.len()
            )));
        }
        check_mode(&data, mode)?;
        Ok(Self { dims, mode, data })
    }

    pub fn zeros(dims: Dims) -> Self {
        Self {
            dims,
            mode: MaskMode::Binary,
            data: vec![0.0; dims.len()],
        }
    }

    pub fn from_fn(dims: Dims, mut f: impl FnMut(usize, usize, usize) -> bool) -> Result<Self> {
        let mut data = Vec::with_capacity(dims.len());
        for w in 0..dims.w {
            for h in 0..dims.h {
                for l in 0..dims.l {
                    data.push(if f(w, h, l) { 1.0 } else { 0.0 });
                }
            }
        }
        Self::new(dims, MaskMode::Binary, data)
    }

    pub fn mode(&self) -> MaskMode {
        self.mode
    }

    pub fn is_binary(&self) -> bool {
        self.mode == MaskMode::Binary
    }

    pub fn get(&self, w: usize, h: usize, l: usize) -> f32 {
        self.data[self.dims.offset(w, h, l)]
    }

    pub fn foreground_count(&self) -> usize {
        self.data.iter().filter(|&&v| v >= BINARY_THRESHOLD).count()
    }

    /// Probability masks become binary at [`BINARY_THRESHOLD`]; binary masks are returned as is.
    pub fn binarize(&self) -> Mask3D {
        Mask3D {
            dims: self.dims,
            mode: MaskMode::Binary,
            data: self.data.iter().map(|&v| threshold(v)).collect(),
        }
    }

    pub fn require_binary(&self) -> Result<()> {
        if !self.is_binary() {
            return Err(Error::InvalidVolume(
                "expected a binary mask, got a probability mask".into(),
            ));
        }
        Ok(())
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn from_slices(slices: &[Slice2D], axis: Axis, mode: MaskMode) -> Result<Self> {
        let (dims, data) = stack(slices, axis)?;
        Self::new(dims, mode, data)
    }
}

impl VoxelGrid for Mask3D {
    fn dims(&self) -> Dims {
        self.dims
    }
    fn data(&self) -> &[f32] {
        &self.data
    }
}

#[inline]
pub fn threshold(v: f32) -> f32 {
    if v >= BINARY_THRESHOLD {
        1.0
    } else {
        0.0
    }
}

fn check_mode(data: &[f32], mode: MaskMode) -> Result<()> {
    let bad = match mode {
        MaskMode::Binary => data.iter().position(|&v| v != 0.0 && v != 1.0),
        MaskMode::Probability => data.iter().position(|&v| !(0.0..=1.0).contains(&v)),
    };
    match bad {
        Some(index) => Err(Error::NotBinary {
            index,
            value: data[index] as f64,
        }),
        None => Ok(()),
    }
}

/// A planar cross-section, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Slice2D {
    pub axis: Axis,
    pub index: usize,
    pub height: usize,
    pub width: usize,
    pub data: Vec<f32>,
}

impl Slice2D {
    pub fn new(
        axis: Axis,
        index: usize,
        height: usize,
        width: usize,
        data: Vec<f32>,
    ) -> Result<Self> {
        if height * width != data.len() {
            return Err(Error::DimMismatch(format!(
                "slice {height}x{width} needs {} values, got {}",
                height * width,
                data.len()
            )));
        }
        Ok(Self {
            axis,
            index,
            height,
            width,
            data,
        })
    }

    pub fn zeros(axis: Axis, index: usize, height: usize, width: usize) -> Self {
        Self {
            axis,
            index,
            height,
            width,
            data: vec![0.0; height * width],
        }
    }

    #[inline]
    pub fn at(&self, row: usize, col: usize) -> f32 {
        self.data[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: f32) {
        self.data[row * self.width + col] = value;
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn foreground_count(&self) -> usize {
        self.data.iter().filter(|&&v| v >= BINARY_THRESHOLD).count()
    }

    pub fn binarize(&self) -> Slice2D {
        Slice2D {
            data: self.data.iter().map(|&v| threshold(v)).collect(),
            ..self.clone()
        }
    }
}

/// Extracts slice `index` along `axis`.
pub fn slice<G: VoxelGrid + ?Sized>(grid: &G, axis: Axis, index: usize) -> Result<Slice2D> {
    let dims = grid.dims();
    let extent = dims.extent(axis);
    if index >= extent {
        return Err(Error::SliceBounds {
            axis,
            index,
            extent,
        });
    }
    let (rows, cols) = dims.plane(axis);
    let src = grid.data();
    let mut data = Vec::with_capacity(rows * cols);
    match axis {
        // Axial-fastest layout makes coronal rows contiguous runs of length L.
        Axis::Coronal => {
            let start = dims.offset(index, 0, 0);
            data.extend_from_slice(&src[start..start + rows * cols]);
        }
        Axis::Sagittal => {
            for w in 0..rows {
                let start = dims.offset(w, index, 0);
                data.extend_from_slice(&src[start..start + cols]);
            }
        }
        Axis::Axial => {
            for w in 0..rows {
                for h in 0..cols {
                    data.push(src[dims.offset(w, h, index)]);
                }
            }
        }
    }
    Ok(Slice2D {
        axis,
        index,
        height: rows,
        width: cols,
        data,
    })
}

/// All slices along `axis`, in index order.
pub fn slices<G: VoxelGrid + ?Sized>(grid: &G, axis: Axis) -> Vec<Slice2D> {
    (0..grid.dims().extent(axis))
        .map(|i| slice(grid, axis, i).expect("index within extent"))
        .collect()
}

/// Inverse of [`slices`]: assembles canonical-order voxel data from a full
/// set of slices along `axis`, which must be indexed `0..n` without gaps.
pub fn stack(slices: &[Slice2D], axis: Axis) -> Result<(Dims, Vec<f32>)> {
    let first = slices
        .first()
        .ok_or_else(|| Error::Assembly("no slices to stack".into()))?;
    let (rows, cols) = (first.height, first.width);
    if rows == 0 || cols == 0 {
        return Err(Error::Assembly("slices have zero area".into()));
    }
    let mut ordered: Vec<Option<&Slice2D>> = vec![None; slices.len()];
    for s in slices {
        if s.axis != axis {
            return Err(Error::Assembly(format!(
                "slice {} is {} but stacking along {axis}",
                s.index, s.axis
            )));
        }
        if s.height != rows || s.width != cols || s.data.len() != rows * cols {
            return Err(Error::Assembly(format!(
                "slice {} is {}x{}, expected {rows}x{cols}",
                s.index, s.height, s.width
            )));
        }
        match ordered.get_mut(s.index) {
            Some(slot @ None) => *slot = Some(s),
            Some(Some(_)) => {
                return Err(Error::Assembly(format!(
                    "duplicate slice index {}",
                    s.index
                )))
            }
            None => {
                return Err(Error::Assembly(format!(
                    "slice index {} outside 0..{}",
                    s.index,
                    slices.len()
                )))
            }
        }
    }
    let n = slices.len();
    let dims = match axis {
        Axis::Coronal => Dims::new(n, rows, cols),
        Axis::Sagittal => Dims::new(rows, n, cols),
        Axis::Axial => Dims::new(rows, cols, n),
    };
    let mut data = vec![0.0f32; dims.len()];
    for (index, s) in ordered.into_iter().enumerate() {
        let s = s.ok_or_else(|| Error::Assembly(format!("missing slice index {index}")))?;
        for r in 0..rows {
            for c in 0..cols {
                data[dims.plane_offset(axis, index, r, c)] = s.data[r * cols + c];
            }
        }
    }
    Ok((dims, data))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ramp(dims: Dims) -> Volume3D {
        let data = (0..dims.len()).map(|i| i as f32).collect();
        Volume3D::new(dims, [1.0; 3], data).unwrap()
    }

    #[test]
    fn degenerate_volume_slices_to_single_value() {
        let v = Volume3D::new(Dims::new(1, 1, 1), [1.0; 3], vec![7.0]).unwrap();
        for axis in Axis::ALL {
            let s = slice(&v, axis, 0).unwrap();
            assert_eq!((s.height, s.width), (1, 1));
            assert_eq!(s.data, vec![7.0]);
        }
    }

    #[test]
    fn axial_slices_partition_a_2x2x2_ramp() {
        let v = ramp(Dims::new(2, 2, 2));
        let a = slice(&v, Axis::Axial, 0).unwrap();
        let b = slice(&v, Axis::Axial, 1).unwrap();
        // Axial index is the fastest-varying coordinate: even offsets at l=0.
        assert_eq!(a.data, vec![0.0, 2.0, 4.0, 6.0]);
        assert_eq!(b.data, vec![1.0, 3.0, 5.0, 7.0]);
        let mut all: Vec<f32> = a.data.iter().chain(&b.data).copied().collect();
        all.sort_by(f32::total_cmp);
        assert_eq!(all, (0..8).map(|i| i as f32).collect::<Vec<_>>());
    }

    #[test]
    fn slice_pixels_follow_documented_orientation() {
        let dims = Dims::new(3, 4, 5);
        let v = ramp(dims);
        let s = slice(&v, Axis::Sagittal, 2).unwrap();
        assert_eq!((s.height, s.width), (3, 5));
        assert_eq!(s.at(1, 4), v.get(1, 2, 4));
        let s = slice(&v, Axis::Axial, 3).unwrap();
        assert_eq!((s.height, s.width), (3, 4));
        assert_eq!(s.at(2, 1), v.get(2, 1, 3));
        let s = slice(&v, Axis::Coronal, 1).unwrap();
        assert_eq!((s.height, s.width), (4, 5));
        assert_eq!(s.at(3, 2), v.get(1, 3, 2));
    }

    #[test]
    fn out_of_range_index_names_axis_and_extent() {
        let v = ramp(Dims::new(2, 3, 4));
        let err = slice(&v, Axis::Sagittal, 3).unwrap_err();
        assert!(matches!(
            err,
            Error::SliceBounds {
                axis: Axis::Sagittal,
                index: 3,
                extent: 3
            }
        ));
        assert!(err.to_string().contains("sagittal"));
    }

    #[test]
    fn single_slice_stacks_to_unit_volume() {
        let s = Slice2D::new(Axis::Axial, 0, 1, 1, vec![3.0]).unwrap();
        let v = Volume3D::from_slices(&[s], Axis::Axial, [1.0; 3]).unwrap();
        assert_eq!(v.dims(), Dims::new(1, 1, 1));
        assert_eq!(v.data(), &[3.0]);
    }

    #[test]
    fn random_volume_round_trips_on_every_axis() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let dims = Dims::new(4, 5, 6);
        let v = Volume3D::from_fn(dims, [0.5, 0.7, 1.2], |_, _, _| rng.random()).unwrap();
        for axis in Axis::ALL {
            let rebuilt = Volume3D::from_slices(&slices(&v, axis), axis, v.spacing()).unwrap();
            assert_eq!(rebuilt, v, "{axis}");
        }
    }

    #[test]
    fn stacking_rejects_mismatched_widths_and_gaps() {
        let a = Slice2D::zeros(Axis::Axial, 0, 2, 2);
        let b = Slice2D::zeros(Axis::Axial, 1, 2, 3);
        assert!(matches!(
            stack(&[a.clone(), b], Axis::Axial),
            Err(Error::Assembly(_))
        ));
        let c = Slice2D::zeros(Axis::Axial, 2, 2, 2);
        assert!(matches!(
            stack(&[a.clone(), c], Axis::Axial),
            Err(Error::Assembly(_))
        ));
        let dup = a.clone();
        assert!(matches!(
            stack(&[a.clone(), dup], Axis::Axial),
            Err(Error::Assembly(_))
        ));
        assert!(matches!(
            stack(&[a], Axis::Coronal),
            Err(Error::Assembly(_))
        ));
    }

    #[test]
    fn invalid_containers_are_rejected() {
        assert!(Volume3D::new(Dims::new(0, 1, 1), [1.0; 3], vec![]).is_err());
        assert!(Volume3D::new(Dims::new(1, 1, 1), [0.0, 1.0, 1.0], vec![1.0]).is_err());
        assert!(Volume3D::new(Dims::new(1, 1, 2), [1.0; 3], vec![1.0]).is_err());
        assert!(Mask3D::new(Dims::new(1, 1, 2), MaskMode::Binary, vec![0.0, 0.5]).is_err());
        assert!(Mask3D::new(Dims::new(1, 1, 2), MaskMode::Probability, vec![0.0, 0.5]).is_ok());
        assert!(Mask3D::new(Dims::new(1, 1, 2), MaskMode::Probability, vec![0.0, 1.5]).is_err());
    }

    #[test]
    fn slice_families_partition_voxels() {
        let dims = Dims::new(3, 4, 2);
        let v = ramp(dims);
        for axis in Axis::ALL {
            let mut seen = vec![0usize; dims.len()];
            for s in slices(&v, axis) {
                for &x in &s.data {
                    seen[x as usize] += 1;
                }
            }
            assert!(seen.iter().all(|&n| n == 1), "{axis}");
        }
    }
}
