use crate::volume::Axis;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{axis} slice index {index} out of range (extent {extent})")]
    SliceBounds {
        axis: Axis,
        index: usize,
        extent: usize,
    },

    #[error("slice assembly failed: {0}")]
    Assembly(String),

    #[error("invalid volume: {0}")]
    InvalidVolume(String),

    #[error("volume format error in `{field}`: {message}")]
    Format {
        field: &'static str,
        message: String,
    },

    #[error("dimension mismatch: {0}")]
    DimMismatch(String),

    #[error("mask is not binary: voxel {index} has value {value}")]
    NotBinary { index: usize, value: f64 },

    #[error("soft DSC loss undefined: prediction and ground truth both sum to zero")]
    DegenerateLoss,

    #[error("mask has no foreground")]
    EmptyMask,

    #[error("model failed on {axis} slice {index}: {source}")]
    Model {
        axis: Axis,
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid model parameters: {0}")]
    InvalidModel(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("report error: {0}")]
    Report(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
