//! From a detection bounding box to a localized, labeled observation.
//!
//! The depth pixels under the box are backprojected and a wall plane is
//! fitted with RANSAC, which yields the placard's position and facing. The
//! matching colour region is warped to a head-on view, split into text lines,
//! binarized at every sweep threshold and transcribed; the most frequent
//! transcription that passes the label grammar becomes the label.

mod label;
mod plane;
mod read;
mod rectify;
mod text;

pub use label::{validate_label, CanonicalLabel, LabelKind};
pub use plane::{
    fit_plane, placard_pose, PlacardPose, PlanarPatch, RansacParams, MAX_VERTICAL_NORMAL,
};
pub use read::{line_combinations, transcribe_placard, vote, PlacardReader, ReadParams};
pub use rectify::{incidence_angle, plane_homography, rectify_roi, MAX_INCIDENCE_DEG};
pub use text::{
    binarize, binarize_sweep, sweep_thresholds, ExternalFileTranscriber, LineSegmenter,
    MockSegmenter, MockTranscriber, NullSegmenter, NullTranscriber, OcrContext, Transcriber,
    SWEEP_END, SWEEP_START, SWEEP_STEP,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{GeometryError, PixelRect};

/// Detector output in depth-image pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Detection {
    pub bbox: PixelRect,
    pub confidence: f64,
}

/// Detections with `confidence ≥ threshold`, in input order.
pub fn filter_detections(dets: &[Detection], threshold: f64) -> Vec<Detection> {
    dets.iter()
        .filter(|d| d.confidence >= threshold)
        .copied()
        .collect()
}

/// One sighting of a placard in the map frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlacardObservation {
    pub keyframe_id: u32,
    pub detection_index: usize,
    pub position: [f64; 3],
    /// Heading of the outward normal, `(-π, π]`.
    pub theta: f64,
    /// Canonical label, or empty when nothing validated.
    pub label: String,
    pub confidence: f64,
    /// Result of the wall test, once aggregation has run.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub on_wall: Option<bool>,
}

#[derive(Debug, Error, PartialEq)]
pub enum PlacardError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("points are too few or collinear for a plane fit")]
    DegenerateCloud,
    #[error("best plane explains only {:.0}% of the points", fraction * 100.0)]
    NoConsensus { fraction: f64 },
    #[error("plane is horizontal (map normal z = {nz:.3})")]
    HorizontalPlane { nz: f64 },
    #[error("view is {degrees:.1}° off the plane normal")]
    GrazingAngle { degrees: f64 },
    #[error("colour frame {width}x{height} is not an integer multiple of the depth frame")]
    ColorSize { width: u32, height: u32 },
}

#[cfg(test)]
mod tests {
    use super::*;

    fn det(c: f64) -> Detection {
        Detection {
            bbox: PixelRect::new(0, 0, 4, 4),
            confidence: c,
        }
    }

    #[test]
    fn filter_keeps_boundary() {
        let dets = [det(0.95), det(0.89), det(0.9)];
        let kept = filter_detections(&dets, 0.9);
        assert_eq!(kept, vec![dets[0], dets[2]]);
        assert!(filter_detections(&[], 0.9).is_empty());
        assert_eq!(filter_detections(&dets, 0.0), dets.to_vec());
    }

    #[test]
    fn detection_json_shape() {
        let d: Detection =
            serde_json::from_str(r#"{"bbox":[1,2,30,40],"confidence":0.93}"#).unwrap();
        assert_eq!(d.bbox, PixelRect::new(1, 2, 30, 40));
        assert_eq!(
            serde_json::to_string(&d).unwrap(),
            r#"{"bbox":[1,2,30,40],"confidence":0.93}"#
        );
    }
}
