//! Submap registry and ICP-based recovery from tracking loss.
//!
//! When the upstream tracker loses the camera it opens a new submap whose
//! frame is unrelated to the old one. Aligning the full depth cloud of the
//! last keyframe localized in the old submap with that of the new submap's
//! origin keyframe yields the camera motion across the gap, which anchors
//! the new submap in the old one's frame.

mod icp;
mod registry;

pub use icp::{best_rigid_fit, icp_align, IcpParams, IcpResult, MIN_ICP_POINTS};
pub use registry::{
    FrameStore, Keyframe, LossEvent, MapRegistry, MergeOutcome, MergeRecord, MergeStrategy,
};

use thiserror::Error;

use crate::geometry::GeometryError;

#[derive(Debug, Error)]
pub enum MapError {
    #[error("too few points for ICP (source {source_points}, target {target_points})")]
    InsufficientPoints {
        source_points: usize,
        target_points: usize,
    },
    #[error("no correspondences within the gating distance at the initial estimate")]
    NoCorrespondences,
    #[error("submap {0} has no anchor")]
    UnanchoredOldMap(u32),
    #[error("submap {0} does not exist")]
    UnknownMap(u32),
    #[error("keyframe {0} does not exist")]
    UnknownKeyframe(u32),
    #[error("keyframe id {0} appears twice")]
    DuplicateKeyframe(u32),
    #[error("keyframes exist but submap 0 is missing")]
    MissingRootMap,
    #[error("loss event stays inside submap {0}")]
    SameMap(u32),
    #[error("no depth frame for keyframe {0}")]
    MissingFrame(u32),
    #[error("alignment residual {rms:.4} m exceeds {max:.4} m")]
    PoorAlignment { rms: f64, max: f64 },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("{0}")]
    Io(String),
}
