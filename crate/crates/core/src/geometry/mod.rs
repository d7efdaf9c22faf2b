//! Rigid-body math, the pinhole depth camera, and depth → point cloud
//! conversion shared by the rest of the crate.

mod camera;
mod image;
mod pose;

pub use camera::{
    backproject, project, CameraIntrinsics, DepthImage, PixelRect, DEFAULT_DEPTH_MAX,
    DEFAULT_DEPTH_MIN,
};
pub use image::{luminance, GrayImage};
pub use pose::Pose3;

use nalgebra::Vector3;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("no pixel in the region has a valid depth")]
    EmptyCloud,
    #[error("point is behind the camera")]
    BehindCamera,
    #[error("region {0:?} lies outside the image")]
    RoiOutOfBounds(PixelRect),
    #[error("invalid intrinsics: {0}")]
    InvalidIntrinsics(String),
}

/// Coordinate frame a cloud is expressed in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Frame {
    Camera,
    Map,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Vector3<f64>>,
    pub frame: Frame,
}

impl PointCloud {
    pub fn new(points: Vec<Vector3<f64>>, frame: Frame) -> Self {
        Self { points, frame }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn centroid(&self) -> Option<Vector3<f64>> {
        if self.points.is_empty() {
            return None;
        }
        let sum: Vector3<f64> = self.points.iter().sum();
        Some(sum / self.points.len() as f64)
    }
}

/// Maps every point through `pose`; a camera-frame cloud becomes a map-frame
/// cloud.
pub fn transform_cloud(pose: &Pose3, cloud: &PointCloud) -> PointCloud {
    let r = pose.rotation_matrix();
    let t = pose.translation;
    PointCloud {
        points: cloud.points.iter().map(|p| r * p + t).collect(),
        frame: Frame::Map,
    }
}
