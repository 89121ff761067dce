//! The input-shrinking transform: per-slice minimal bounding boxes of a mask,
//! frame expansion, cropping of the original intensities, and paste-back of
//! patch predictions into full-slice coordinates.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;
use crate::volume::{self, Axis, Mask3D, Slice2D, Volume3D, VoxelGrid, BINARY_THRESHOLD};

/// Inclusive in-plane box on slice `index` along `axis`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Region2D {
    pub axis: Axis,
    pub index: usize,
    pub top: usize,
    pub bottom: usize,
    pub left: usize,
    pub right: usize,
}

impl Region2D {
    pub fn full(axis: Axis, index: usize, rows: usize, cols: usize) -> Self {
        Self {
            axis,
            index,
            top: 0,
            bottom: rows - 1,
            left: 0,
            right: cols - 1,
        }
    }

    pub fn height(&self) -> usize {
        self.bottom - self.top + 1
    }

    pub fn width(&self) -> usize {
        self.right - self.left + 1
    }

    pub fn area(&self) -> usize {
        self.height() * self.width()
    }

    pub fn contains(&self, row: usize, col: usize) -> bool {
        (self.top..=self.bottom).contains(&row) && (self.left..=self.right).contains(&col)
    }

    pub fn contains_region(&self, other: &Region2D) -> bool {
        self.top <= other.top
            && self.bottom >= other.bottom
            && self.left <= other.left
            && self.right >= other.right
    }

    pub fn validate(&self, rows: usize, cols: usize) -> Result<()> {
        if self.top > self.bottom
            || self.bottom >= rows
            || self.left > self.right
            || self.right >= cols
        {
            return Err(Error::DimMismatch(format!(
                "region rows {}..={} cols {}..={} invalid for {rows}x{cols} slice",
                self.top, self.bottom, self.left, self.right
            )));
        }
        Ok(())
    }
}

/// Regions keyed by `(axis, index)`; slices without foreground have no entry.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(from = "Vec<Region2D>", into = "Vec<Region2D>")]
pub struct RegionSet {
    regions: BTreeMap<(Axis, usize), Region2D>,
}

impl RegionSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, region: Region2D) {
        self.regions.insert((region.axis, region.index), region);
    }

    pub fn get(&self, axis: Axis, index: usize) -> Option<&Region2D> {
        self.regions.get(&(axis, index))
    }

    pub fn len(&self) -> usize {
        self.regions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.regions.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Region2D> {
        self.regions.values()
    }

    pub fn axis(&self, axis: Axis) -> impl Iterator<Item = &Region2D> {
        self.regions
            .range((axis, 0)..=(axis, usize::MAX))
            .map(|(_, r)| r)
    }
}

impl From<Vec<Region2D>> for RegionSet {
    fn from(v: Vec<Region2D>) -> Self {
        let mut set = RegionSet::new();
        v.into_iter().for_each(|r| set.insert(r));
        set
    }
}

impl From<RegionSet> for Vec<Region2D> {
    fn from(set: RegionSet) -> Self {
        set.regions.into_values().collect()
    }
}

/// Frame widths added around a bounding box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum MarginSpec {
    /// Same width on every side.
    Fixed { pixels: usize },
    /// Independent uniform draws from `lo..=hi` per side and per slice.
    Random { lo: usize, hi: usize, seed: u64 },
}

impl MarginSpec {
    pub fn fixed(pixels: usize) -> Self {
        MarginSpec::Fixed { pixels }
    }

    pub fn random(lo: usize, hi: usize, seed: u64) -> Self {
        MarginSpec::Random { lo, hi, seed }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            MarginSpec::Random { lo, hi, .. } if lo > hi => Err(Error::InvalidConfig(format!(
                "random margin range {lo}..={hi} is empty"
            ))),
            _ => Ok(()),
        }
    }

    /// Margins for one slice; random draws depend only on `(seed, axis, index)`.
    pub fn margins_for(&self, axis: Axis, index: usize) -> Margins {
        match *self {
            MarginSpec::Fixed { pixels } => Margins {
                top: pixels,
                bottom: pixels,
                left: pixels,
                right: pixels,
            },
            MarginSpec::Random { lo, hi, seed } => {
                let mut rng = seed::rng(seed, &[axis.ordinal(), index as u64]);
                Margins {
                    top: rng.random_range(lo..=hi),
                    bottom: rng.random_range(lo..=hi),
                    left: rng.random_range(lo..=hi),
                    right: rng.random_range(lo..=hi),
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Margins {
    pub top: usize,
    pub bottom: usize,
    pub left: usize,
    pub right: usize,
}

/// Smallest box covering every foreground pixel, or `None` for an empty slice.
pub fn min_bbox(mask: &Slice2D) -> Option<Region2D> {
    let mut bounds: Option<(usize, usize, usize, usize)> = None;
    for r in 0..mask.height {
        let row = &mask.data[r * mask.width..(r + 1) * mask.width];
        let Some(first) = row.iter().position(|&v| v >= BINARY_THRESHOLD) else {
            continue;
        };
        let last = row
            .iter()
            .rposition(|&v| v >= BINARY_THRESHOLD)
            .unwrap_or(first);
        bounds = Some(match bounds {
            None => (r, r, first, last),
            Some((top, _, left, right)) => (top, r, left.min(first), right.max(last)),
        });
    }
    bounds.map(|(top, bottom, left, right)| Region2D {
        axis: mask.axis,
        index: mask.index,
        top,
        bottom,
        left,
        right,
    })
}

/// Moves each side outward by its margin, clamped to the slice.
pub fn expand(region: &Region2D, margins: &MarginSpec, plane: (usize, usize)) -> Region2D {
    let m = margins.margins_for(region.axis, region.index);
    let (rows, cols) = plane;
    Region2D {
        top: region.top.saturating_sub(m.top),
        bottom: (region.bottom + m.bottom).min(rows - 1),
        left: region.left.saturating_sub(m.left),
        right: (region.right + m.right).min(cols - 1),
        ..*region
    }
}

/// Expanded per-slice boxes of `mask` along `axis`, indexed by slice.
pub fn view_regions(mask: &Mask3D, axis: Axis, margins: &MarginSpec) -> Vec<Option<Region2D>> {
    let plane = mask.dims().plane(axis);
    (0..mask.dims().extent(axis))
        .map(|i| {
            let s = volume::slice(mask, axis, i).expect("index within extent");
            min_bbox(&s).map(|b| expand(&b, margins, plane))
        })
        .collect()
}

/// Copies the region's pixels out of `slice` as a new patch.
pub fn crop(slice: &Slice2D, region: &Region2D) -> Result<Slice2D> {
    region.validate(slice.height, slice.width)?;
    let mut data = Vec::with_capacity(region.area());
    for r in region.top..=region.bottom {
        let start = r * slice.width;
        data.extend_from_slice(&slice.data[start + region.left..=start + region.right]);
    }
    Slice2D::new(
        slice.axis,
        slice.index,
        region.height(),
        region.width(),
        data,
    )
}

/// A region together with the original intensities it covers.
#[derive(Debug, Clone, PartialEq)]
pub struct Crop {
    pub region: Region2D,
    pub patch: Slice2D,
}

/// Generates input regions from the current segmentation: for every view and
/// slice where `mask` has foreground, the expanded minimal box and the
/// matching intensity patch.
pub fn transform_r(
    volume: &Volume3D,
    mask: &Mask3D,
    margins: &MarginSpec,
) -> Result<(RegionSet, Vec<Crop>)> {
    mask.require_binary()?;
    if volume.dims() != mask.dims() {
        return Err(Error::DimMismatch(format!(
            "volume {} vs mask {}",
            volume.dims(),
            mask.dims()
        )));
    }
    margins.validate()?;
    if mask.foreground_count() == 0 {
        return Err(Error::EmptyMask);
    }
    let mut set = RegionSet::new();
    let mut crops = Vec::new();
    for axis in Axis::ALL {
        for region in view_regions(mask, axis, margins).into_iter().flatten() {
            let s = volume::slice(volume, axis, region.index)?;
            crops.push(Crop {
                region,
                patch: crop(&s, &region)?,
            });
            set.insert(region);
        }
    }
    Ok((set, crops))
}

/// Places a patch prediction on a zero canvas of `plane` size at the region.
pub fn paste(region: &Region2D, patch: &Slice2D, plane: (usize, usize)) -> Result<Slice2D> {
    let (rows, cols) = plane;
    region.validate(rows, cols)?;
    if patch.height != region.height() || patch.width != region.width() {
        return Err(Error::DimMismatch(format!(
            "patch {}x{} does not fit region {}x{}",
            patch.height,
            patch.width,
            region.height(),
            region.width()
        )));
    }
    let mut canvas = Slice2D::zeros(region.axis, region.index, rows, cols);
    for r in 0..patch.height {
        let dst = (region.top + r) * cols + region.left;
        canvas.data[dst..dst + patch.width]
            .copy_from_slice(&patch.data[r * patch.width..(r + 1) * patch.width]);
    }
    Ok(canvas)
}

/// Slice indices along `axis` whose foreground count is at least `min_pixels`.
pub fn select_training_slices(mask: &Mask3D, axis: Axis, min_pixels: usize) -> Vec<usize> {
    (0..mask.dims().extent(axis))
        .filter(|&i| {
            volume::slice(mask, axis, i)
                .map(|s| s.foreground_count() >= min_pixels)
                .unwrap_or(false)
        })
        .collect()
}

/// Default minimum foreground size for coarse training slices.
pub const MIN_TRAINING_PIXELS: usize = 100;
