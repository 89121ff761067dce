//! Two-of-three majority vote over the per-view binary predictions.

use crate::error::{Error, Result};
use crate::volume::{Axis, Mask3D, MaskMode, VoxelGrid};

#[derive(Debug, Clone, PartialEq)]
pub struct ViewPredictions {
    pub coronal: Mask3D,
    pub sagittal: Mask3D,
    pub axial: Mask3D,
}

impl ViewPredictions {
    pub fn new(coronal: Mask3D, sagittal: Mask3D, axial: Mask3D) -> Result<Self> {
        let views = Self {
            coronal,
            sagittal,
            axial,
        };
        views.validate()?;
        Ok(views)
    }

    pub fn get(&self, axis: Axis) -> &Mask3D {
        match axis {
            Axis::Coronal => &self.coronal,
            Axis::Sagittal => &self.sagittal,
            Axis::Axial => &self.axial,
        }
    }

    fn validate(&self) -> Result<()> {
        let dims = self.coronal.dims();
        for axis in Axis::ALL {
            let m = self.get(axis);
            m.require_binary()?;
            if m.dims() != dims {
                return Err(Error::DimMismatch(format!(
                    "{axis} prediction is {} but coronal is {dims}",
                    m.dims()
                )));
            }
        }
        Ok(())
    }
}

/// A voxel is foreground iff at least two views mark it.
pub fn majority_vote(views: &ViewPredictions) -> Result<Mask3D> {
    views.validate()?;
    let data = views
        .coronal
        .data()
        .iter()
        .zip(views.sagittal.data())
        .zip(views.axial.data())
        .map(|((&c, &s), &a)| if c + s + a >= 2.0 { 1.0 } else { 0.0 })
        .collect();
    Mask3D::new(views.coronal.dims(), MaskMode::Binary, data)
}
