//! Offline semantic mapping of door placards from RGB-D keyframe recordings.
//!
//! The crate turns a recorded keyframe sequence (poses grouped into submaps
//! by tracking losses, depth frames, grayscale colour frames and placard
//! detections) into a navigable occupancy map annotated with the pose and
//! transcribed label of every door placard. Stages:
//!
//! 1. [`mapgraph`] re-anchors submaps created by tracking loss with
//!    point-to-point ICP on the depth clouds around each loss.
//! 2. [`placards`] localizes each confident detection by fitting the wall
//!    plane behind it, rectifies the ROI to a head-on view, sweeps binarization
//!    thresholds, transcribes and validates the label.
//! 3. [`reconstruction`] integrates keyframes into a voxel grid and projects
//!    a 2D map between floor and ceiling cuts.
//! 4. [`aggregation`] drops off-wall observations, clusters the rest and
//!    votes on labels.
//! 5. [`evaluation`] scores landmarks against ground truth or a hand-made
//!    correspondence file.
//!
//! [`simulator`] generates fully ground-truthed corridor datasets in the same
//! on-disk layout ([`io`]) as real recordings, and [`pipeline`] chains the
//! stages the same way the `signmap` binary does.

pub mod aggregation;
pub mod codematrix;
pub mod config;
pub mod evaluation;
pub mod geometry;
pub mod io;
pub mod mapgraph;
pub mod pipeline;
pub mod placards;
pub mod reconstruction;
pub mod render;
pub mod simulator;
pub mod spatial;

pub use geometry::{CameraIntrinsics, DepthImage, GrayImage, PixelRect, PointCloud, Pose3};

/// Wraps an angle into `(-π, π]`.
pub fn wrap_angle(a: f64) -> f64 {
    use std::f64::consts::PI;
    if a > -PI && a <= PI {
        return a;
    }
    let mut w = a.rem_euclid(2.0 * PI);
    if w > PI {
        w -= 2.0 * PI;
    }
    if w <= -PI {
        w += 2.0 * PI;
    }
    w
}

#[cfg(test)]
mod tests {
    use super::wrap_angle;
    use std::f64::consts::PI;

    #[test]
    fn wrap_angle_range() {
        assert_eq!(wrap_angle(-PI), PI);
        assert_eq!(wrap_angle(PI), PI);
        assert_eq!(wrap_angle(0.25), 0.25);
        assert!((wrap_angle(3.0 * PI) - PI).abs() < 1e-12);
        assert!((wrap_angle(-0.5 - 2.0 * PI) + 0.5).abs() < 1e-12);
    }
}
