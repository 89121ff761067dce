//! On-disk volume format: a `<name>.json` header next to a `<name>.raw`
//! little-endian payload in canonical voxel order.
//!
//! ```json
//! { "dims": [W, H, L], "dtype": "f32", "spacing": [sx, sy, sz], "kind": "intensity" }
//! ```
//!
//! `dtype` is `"f32"` or `"u8"`, `kind` is `"intensity"` or `"mask"`.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::volume::{Dims, Mask3D, MaskMode, Volume3D, VoxelGrid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DType {
    F32,
    U8,
}

impl DType {
    pub fn bytes_per_voxel(self) -> usize {
        match self {
            DType::F32 => 4,
            DType::U8 => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VolumeKind {
    Intensity,
    Mask,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VolumeHeader {
    pub dims: [usize; 3],
    pub dtype: DType,
    pub spacing: [f64; 3],
    pub kind: VolumeKind,
}

impl VolumeHeader {
    pub fn payload_len(&self) -> usize {
        self.dims.iter().product::<usize>() * self.dtype.bytes_per_voxel()
    }

    pub fn parse(text: &str) -> Result<Self> {
        let value: Value = serde_json::from_str(text).map_err(|e| Error::Format {
            field: "header",
            message: e.to_string(),
        })?;
        let obj = value.as_object().ok_or_else(|| Error::Format {
            field: "header",
            message: "expected a JSON object".into(),
        })?;
        let field = |name: &'static str| {
            obj.get(name).ok_or_else(|| Error::Format {
                field: name,
                message: "missing".into(),
            })
        };
        let dims: [usize; 3] =
            serde_json::from_value(field("dims")?.clone()).map_err(|e| Error::Format {
                field: "dims",
                message: e.to_string(),
            })?;
        if dims.contains(&0) {
            return Err(Error::Format {
                field: "dims",
                message: format!("every dimension must be positive, got {dims:?}"),
            });
        }
        let dtype = match field("dtype")?.as_str() {
            Some("f32") => DType::F32,
            Some("u8") => DType::U8,
            other => {
                return Err(Error::Format {
                    field: "dtype",
                    message: format!("unknown dtype {other:?}, expected \"f32\" or \"u8\""),
                })
            }
        };
        let spacing: [f64; 3] =
            serde_json::from_value(field("spacing")?.clone()).map_err(|e| Error::Format {
                field: "spacing",
                message: e.to_string(),
            })?;
        if spacing.iter().any(|s| s.is_nan() || *s <= 0.0) {
            return Err(Error::Format {
                field: "spacing",
                message: format!("spacing must be positive, got {spacing:?}"),
            });
        }
        let kind = match field("kind")?.as_str() {
            Some("intensity") => VolumeKind::Intensity,
            Some("mask") => VolumeKind::Mask,
            other => {
                return Err(Error::Format {
                    field: "kind",
                    message: format!("unknown kind {other:?}, expected \"intensity\" or \"mask\""),
                })
            }
        };
        Ok(Self {
            dims,
            dtype,
            spacing,
            kind,
        })
    }

    fn dims(&self) -> Dims {
        Dims::new(self.dims[0], self.dims[1], self.dims[2])
    }
}

/// Resolves `name`, `name.json` or `name.raw` to the header/payload pair.
pub fn file_pair(path: impl AsRef<Path>) -> (PathBuf, PathBuf) {
    let path = path.as_ref();
    let base = match path.extension().and_then(|e| e.to_str()) {
        Some("json") | Some("raw") => path.with_extension(""),
        _ => path.to_path_buf(),
    };
    let mut json = base.clone().into_os_string();
    json.push(".json");
    let mut raw = base.into_os_string();
    raw.push(".raw");
    (json.into(), raw.into())
}

pub fn read_header(path: impl AsRef<Path>) -> Result<VolumeHeader> {
    let (json, _) = file_pair(path);
    VolumeHeader::parse(&fs::read_to_string(json)?)
}

fn read_payload(path: impl AsRef<Path>) -> Result<(VolumeHeader, Vec<f32>)> {
    let (json, raw) = file_pair(path);
    let header = VolumeHeader::parse(&fs::read_to_string(json)?)?;
    let bytes = fs::read(raw)?;
    let expected = header.payload_len();
    if bytes.len() != expected {
        return Err(Error::Format {
            field: "payload",
            message: format!("expected {expected} bytes, found {}", bytes.len()),
        });
    }
    let values = match header.dtype {
        DType::F32 => bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect(),
        DType::U8 => bytes.iter().map(|&b| b as f32).collect(),
    };
    Ok((header, values))
}

fn write_pair(path: impl AsRef<Path>, header: &VolumeHeader, payload: &[u8]) -> Result<()> {
    let (json, raw) = file_pair(path);
    if let Some(parent) = json.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    let mut text = serde_json::to_string_pretty(header)?;
    text.push('\n');
    fs::write(json, text)?;
    fs::write(raw, payload)?;
    Ok(())
}

/// Reads any volume file as intensities; `u8` payloads are widened to `f32`.
pub fn read_volume(path: impl AsRef<Path>) -> Result<Volume3D> {
    let (header, values) = read_payload(path)?;
    Volume3D::new(header.dims(), header.spacing, values)
}

pub fn write_volume(volume: &Volume3D, path: impl AsRef<Path>) -> Result<()> {
    let header = VolumeHeader {
        dims: volume.dims().as_array(),
        dtype: DType::F32,
        spacing: volume.spacing(),
        kind: VolumeKind::Intensity,
    };
    let payload: Vec<u8> = volume.data().iter().flat_map(|v| v.to_le_bytes()).collect();
    write_pair(path, &header, &payload)
}

/// Reads a mask; `u8` payloads load as binary masks, `f32` payloads as probability masks.
pub fn read_mask(path: impl AsRef<Path>) -> Result<(Mask3D, [f64; 3])> {
    let (header, values) = read_payload(path)?;
    let mode = match header.dtype {
        DType::U8 => MaskMode::Binary,
        DType::F32 => MaskMode::Probability,
    };
    let mask = Mask3D::new(header.dims(), mode, values).map_err(|e| Error::Format {
        field: "payload",
        message: e.to_string(),
    })?;
    Ok((mask, header.spacing))
}

/// Binary masks are stored as `u8`, probability masks as `f32`.
pub fn write_mask(mask: &Mask3D, spacing: [f64; 3], path: impl AsRef<Path>) -> Result<()> {
    let (dtype, payload): (DType, Vec<u8>) = match mask.mode() {
        MaskMode::Binary => (DType::U8, mask.data().iter().map(|&v| v as u8).collect()),
        MaskMode::Probability => (
            DType::F32,
            mask.data().iter().flat_map(|v| v.to_le_bytes()).collect(),
        ),
    };
    let header = VolumeHeader {
        dims: mask.dims().as_array(),
        dtype,
        spacing,
        kind: VolumeKind::Mask,
    };
    write_pair(path, &header, &payload)
}
