//! Synthetic ellipsoid phantoms with known ground truth.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;
use crate::volume::{Dims, Mask3D, Volume3D, VoxelGrid};

fn default_fraction() -> f64 {
    0.005
}
fn default_fg() -> f32 {
    1.0
}
fn default_sigma() -> f32 {
    0.25
}
fn default_spacing() -> [f64; 3] {
    [1.0; 3]
}

/// Phantom description. When `radii` is absent the ellipsoid is scaled to
/// `target_fraction` of the volume; when `center` is absent it is drawn from
/// the seed so that the ellipsoid fits inside the volume.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhantomSpec {
    pub dims: [usize; 3],
    #[serde(default)]
    pub center: Option<[f64; 3]>,
    #[serde(default)]
    pub radii: Option<[f64; 3]>,
    #[serde(default = "default_fraction")]
    pub target_fraction: f64,
    #[serde(default = "default_fg")]
    pub foreground_mean: f32,
    #[serde(default)]
    pub background_mean: f32,
    #[serde(default = "default_sigma")]
    pub noise_sigma: f32,
    #[serde(default = "default_spacing")]
    pub spacing: [f64; 3],
    #[serde(default)]
    pub seed: u64,
}

impl PhantomSpec {
    pub fn new(dims: [usize; 3], seed: u64) -> Self {
        Self {
            dims,
            center: None,
            radii: None,
            target_fraction: default_fraction(),
            foreground_mean: default_fg(),
            background_mean: 0.0,
            noise_sigma: default_sigma(),
            spacing: default_spacing(),
            seed,
        }
    }

    /// The spec for case `i` of a dataset: same shape, derived seed.
    pub fn case(&self, i: usize) -> Self {
        Self {
            seed: seed::derive(self.seed, &[i as u64]),
            ..self.clone()
        }
    }

    pub fn resolved_radii(&self) -> [f64; 3] {
        self.radii.unwrap_or_else(|| {
            let scale = (3.0 * self.target_fraction / (4.0 * PI)).cbrt();
            self.dims.map(|d| d as f64 * scale)
        })
    }

    fn validate(&self) -> Result<()> {
        if self.dims.contains(&0) {
            return Err(Error::InvalidConfig(format!(
                "phantom dims {:?} must be positive",
                self.dims
            )));
        }
        if !(self.target_fraction > 0.0 && self.target_fraction <= 0.05) {
            return Err(Error::InvalidConfig(format!(
                "target fraction {} outside (0, 0.05]",
                self.target_fraction
            )));
        }
        if self.noise_sigma.is_nan() || self.noise_sigma < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "noise sigma {} must be >= 0",
                self.noise_sigma
            )));
        }
        let radii = self.resolved_radii();
        for (r, d) in radii.iter().zip(self.dims) {
            if r.is_nan() || *r <= 0.0 || 2.0 * r > (d - 1) as f64 {
                return Err(Error::InvalidConfig(format!(
                    "ellipsoid radii {radii:?} do not fit inside dims {:?}",
                    self.dims
                )));
            }
        }
        if let Some(c) = self.center {
            for ((ci, r), d) in c.iter().zip(radii).zip(self.dims) {
                if ci - r < 0.0 || ci + r > (d - 1) as f64 {
                    return Err(Error::InvalidConfig(format!(
                        "ellipsoid at {c:?} with radii {radii:?} leaves dims {:?}",
                        self.dims
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Phantom {
    pub volume: Volume3D,
    pub mask: Mask3D,
    pub center: [f64; 3],
    pub radii: [f64; 3],
}

/// Voxels with `sum(((x - c) / r)^2) <= 1` are foreground; intensities are
/// Gaussian around the foreground or background mean.
pub fn gen_phantom(spec: &PhantomSpec) -> Result<Phantom> {
    spec.validate()?;
    let radii = spec.resolved_radii();
    let center = spec.center.unwrap_or_else(|| {
        let mut rng = seed::rng(spec.seed, &[0]);
        [0, 1, 2].map(|i| {
            let (lo, hi) = (radii[i], (spec.dims[i] - 1) as f64 - radii[i]);
            if hi > lo {
                rng.random_range(lo..=hi)
            } else {
                lo
            }
        })
    });
    let dims = Dims::new(spec.dims[0], spec.dims[1], spec.dims[2]);
    let mask = Mask3D::from_fn(dims, |w, h, l| {
        let p = [w as f64, h as f64, l as f64];
        (0..3)
            .map(|i| ((p[i] - center[i]) / radii[i]).powi(2))
            .sum::<f64>()
            <= 1.0
    })?;
    let mut rng = seed::rng(spec.seed, &[1]);
    let sample = |mean: f32, rng: &mut rand_chacha::ChaCha8Rng| -> f32 {
        if spec.noise_sigma == 0.0 {
            mean
        } else {
            Normal::new(mean, spec.noise_sigma)
                .expect("finite sigma")
                .sample(rng)
        }
    };
    let data = mask
        .data()
        .iter()
        .map(|&fg| {
            if fg == 1.0 {
                sample(spec.foreground_mean, &mut rng)
            } else {
                sample(spec.background_mean, &mut rng)
            }
        })
        .collect();
    let volume = Volume3D::new(dims, spec.spacing, data)?;
    Ok(Phantom {
        volume,
        mask,
        center,
        radii,
    })
}
