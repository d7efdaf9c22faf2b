use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::PlacardError;
use crate::geometry::{PointCloud, Pose3};
use crate::wrap_angle;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RansacParams {
    /// Point-to-plane distance counted as an inlier, metres.
    pub inlier_tol: f64,
    pub iterations: u32,
    /// Fits supported by a smaller share of the cloud are rejected.
    pub min_inlier_fraction: f64,
    pub seed: u64,
}

impl Default for RansacParams {
    fn default() -> Self {
        Self {
            inlier_tol: 0.01,
            iterations: 200,
            min_inlier_fraction: 0.5,
            seed: 0x5EED,
        }
    }
}

impl RansacParams {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.inlier_tol > 0.0) {
            return Err("ransac.inlier_tol must be positive".into());
        }
        if self.iterations == 0 {
            return Err("ransac.iterations must be positive".into());
        }
        if !(self.min_inlier_fraction > 0.0 && self.min_inlier_fraction <= 1.0) {
            return Err("ransac.min_inlier_fraction must lie in (0, 1]".into());
        }
        Ok(())
    }
}

/// Plane fitted behind a placard, in the camera frame.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanarPatch {
    /// Unit normal pointing toward the camera (`normal · centroid < 0`).
    pub normal: Vector3<f64>,
    pub centroid: Vector3<f64>,
    pub inlier_indices: Vec<usize>,
    pub rms_residual: f64,
}

/// Centroid and unit normal (eigenvector of the smallest covariance
/// eigenvalue) of a point subset, plus all three eigenvalues ascending.
fn least_squares_plane(
    points: &[Vector3<f64>],
    idx: &[usize],
) -> (Vector3<f64>, Vector3<f64>, [f64; 3]) {
    let n = idx.len() as f64;
    let centroid = idx.iter().map(|&i| points[i]).sum::<Vector3<f64>>() / n;
    let mut cov = Matrix3::zeros();
    for &i in idx {
        let d = points[i] - centroid;
        cov += d * d.transpose();
    }
    cov /= n;
    let eig = SymmetricEigen::new(cov);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let normal = eig.eigenvectors.column(order[0]).normalize();
    (
        centroid,
        normal,
        [
            eig.eigenvalues[order[0]],
            eig.eigenvalues[order[1]],
            eig.eigenvalues[order[2]],
        ],
    )
}

/// RANSAC plane search followed by a least-squares refit on the winning
/// inlier set. The result is deterministic for a given `params.seed`.
pub fn fit_plane(cloud: &PointCloud, params: &RansacParams) -> Result<PlanarPatch, PlacardError> {
    let pts = &cloud.points;
    if pts.len() < 3 {
        return Err(PlacardError::DegenerateCloud);
    }
    let all: Vec<usize> = (0..pts.len()).collect();
    let (_, _, spread) = least_squares_plane(pts, &all);
    if spread[1] <= 1e-12 * spread[2].max(1e-300) {
        return Err(PlacardError::DegenerateCloud);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut best: Option<(usize, Vector3<f64>, Vector3<f64>)> = None;
    for _ in 0..params.iterations {
        let i = rng.random_range(0..pts.len());
        let j = rng.random_range(0..pts.len());
        let k = rng.random_range(0..pts.len());
        let (a, b, c) = (pts[i], pts[j], pts[k]);
        let cross = (b - a).cross(&(c - a));
        let norm = cross.norm();
        if norm < 1e-12 {
            continue;
        }
        let n = cross / norm;
        let count = pts
            .iter()
            .filter(|p| n.dot(&(*p - a)).abs() <= params.inlier_tol)
            .count();
        if best.as_ref().is_none_or(|(bc, _, _)| count > *bc) {
            best = Some((count, n, a));
        }
    }
    let (_, n, a) = best.ok_or(PlacardError::DegenerateCloud)?;
    let inliers: Vec<usize> = all
        .into_iter()
        .filter(|&i| n.dot(&(pts[i] - a)).abs() <= params.inlier_tol)
        .collect();
    let fraction = inliers.len() as f64 / pts.len() as f64;
    if fraction < params.min_inlier_fraction || inliers.len() < 3 {
        return Err(PlacardError::NoConsensus { fraction });
    }

    let (centroid, mut normal, _) = least_squares_plane(pts, &inliers);
    if normal.dot(&centroid) > 0.0 {
        normal = -normal;
    }
    let ss: f64 = inliers
        .iter()
        .map(|&i| normal.dot(&(pts[i] - centroid)).powi(2))
        .sum();
    Ok(PlanarPatch {
        normal,
        centroid,
        rms_residual: (ss / inliers.len() as f64).sqrt(),
        inlier_indices: inliers,
    })
}

/// Map-frame placard position and heading of its outward normal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlacardPose {
    pub position: Vector3<f64>,
    /// Angle of the outward normal's xy projection from the map x axis, in
    /// `(-π, π]`.
    pub theta: f64,
    pub normal: Vector3<f64>,
}

/// Normals steeper than this (|n_z| in the map frame) are floors/ceilings.
pub const MAX_VERTICAL_NORMAL: f64 = 0.95;

/// Transforms a camera-frame patch into the map through `global_from_camera`.
pub fn placard_pose(patch: &PlanarPatch, cam_pose: &Pose3) -> Result<PlacardPose, PlacardError> {
    let position = cam_pose.transform_point(&patch.centroid);
    let normal = cam_pose.rotate(&patch.normal);
    if normal.z.abs() > MAX_VERTICAL_NORMAL {
        return Err(PlacardError::HorizontalPlane { nz: normal.z });
    }
    Ok(PlacardPose {
        position,
        theta: wrap_angle(normal.y.atan2(normal.x)),
        normal,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{transform_cloud, Frame};
    use nalgebra::UnitQuaternion;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn grid_on_plane(
        origin: Vector3<f64>,
        e1: Vector3<f64>,
        e2: Vector3<f64>,
        n: usize,
    ) -> Vec<Vector3<f64>> {
        let mut out = Vec::new();
        for i in 0..n {
            for j in 0..n {
                let a = i as f64 / (n - 1) as f64 - 0.5;
                let b = j as f64 / (n - 1) as f64 - 0.5;
                out.push(origin + e1 * a + e2 * b);
            }
        }
        out
    }

    #[test]
    fn frontal_plane() {
        let pts = grid_on_plane(Vector3::new(0.0, 0.0, 2.0), Vector3::x(), Vector3::y(), 10);
        let p = fit_plane(
            &PointCloud::new(pts, Frame::Camera),
            &RansacParams::default(),
        )
        .unwrap();
        assert!((p.normal - Vector3::new(0.0, 0.0, -1.0)).norm() < 1e-9);
        assert!((p.centroid.z - 2.0).abs() < 1e-12);
        assert!(p.rms_residual < 1e-12);
        assert_eq!(p.inlier_indices.len(), 100);
    }

    #[test]
    fn oblique_plane_matches_analytic_normal() {
        // x + z = 3
        let e1 = Vector3::new(1.0, 0.0, -1.0).normalize();
        let pts = grid_on_plane(Vector3::new(1.0, 0.0, 2.0), e1, Vector3::y(), 12);
        let p = fit_plane(
            &PointCloud::new(pts, Frame::Camera),
            &RansacParams::default(),
        )
        .unwrap();
        let expect = -Vector3::new(1.0, 0.0, 1.0) / 2f64.sqrt();
        assert!((p.normal - expect).norm() < 1e-9);
    }

    #[test]
    fn robust_to_twenty_percent_outliers() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let e1 = Vector3::new(1.0, 0.0, -0.3).normalize();
        let e2 = Vector3::new(0.0, 1.0, 0.2).normalize();
        let mut pts = Vec::new();
        for _ in 0..400 {
            let (a, b) = (rng.random_range(-0.4..0.4), rng.random_range(-0.4..0.4));
            let noise = rng.random_range(-0.003..0.003);
            pts.push(Vector3::new(0.1, 0.0, 1.8) + e1 * a + e2 * b + e1.cross(&e2) * noise);
        }
        let clean = pts.clone();
        for _ in 0..100 {
            pts.push(Vector3::new(
                rng.random_range(-0.5..0.5),
                rng.random_range(-0.5..0.5),
                rng.random_range(1.0..2.6),
            ));
        }
        // oracle: least squares on the known inliers only
        let idx: Vec<usize> = (0..clean.len()).collect();
        let (_, oracle, _) = least_squares_plane(&clean, &idx);
        let p = fit_plane(
            &PointCloud::new(pts, Frame::Camera),
            &RansacParams::default(),
        )
        .unwrap();
        let angle = p.normal.dot(&oracle).abs().min(1.0).acos();
        assert!(angle.to_degrees() < 1.0, "angle {}", angle.to_degrees());
    }

    #[test]
    fn degenerate_inputs() {
        let two = PointCloud::new(vec![Vector3::zeros(), Vector3::x()], Frame::Camera);
        assert!(matches!(
            fit_plane(&two, &RansacParams::default()),
            Err(PlacardError::DegenerateCloud)
        ));
        let line: Vec<_> = (0..20)
            .map(|i| Vector3::new(i as f64 * 0.1, 0.0, 1.0))
            .collect();
        assert!(matches!(
            fit_plane(
                &PointCloud::new(line, Frame::Camera),
                &RansacParams::default()
            ),
            Err(PlacardError::DegenerateCloud)
        ));
    }

    #[test]
    fn scattered_cloud_has_no_consensus() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let pts: Vec<_> = (0..300)
            .map(|_| {
                Vector3::new(
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                    rng.random_range(1.0..3.0),
                )
            })
            .collect();
        assert!(matches!(
            fit_plane(
                &PointCloud::new(pts, Frame::Camera),
                &RansacParams::default()
            ),
            Err(PlacardError::NoConsensus { .. })
        ));
    }

    #[test]
    fn fit_commutes_with_rigid_motion() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let e1 = Vector3::new(1.0, 0.1, -0.4).normalize();
        let e2 = e1.cross(&Vector3::new(0.2, 0.3, 1.0)).normalize();
        let pts: Vec<_> = (0..300)
            .map(|_| {
                Vector3::new(0.0, 0.0, 2.0)
                    + e1 * rng.random_range(-0.5..0.5)
                    + e2 * rng.random_range(-0.5..0.5)
                    + e1.cross(&e2) * rng.random_range(-0.002..0.002)
            })
            .collect();
        let cloud = PointCloud::new(pts, Frame::Camera);
        let base = fit_plane(&cloud, &RansacParams::default()).unwrap();
        for s in 0..10u64 {
            let motion = Pose3::new(
                UnitQuaternion::from_euler_angles(0.1 * s as f64, -0.2, 0.3 * s as f64),
                Vector3::new(0.1, -0.05 * s as f64, 0.02),
            );
            let moved = transform_cloud(&motion, &cloud);
            let fit = fit_plane(&moved, &RansacParams::default()).unwrap();
            let back = motion.inverse().rotate(&fit.normal);
            let angle = back.dot(&base.normal).abs().min(1.0).acos();
            assert!(angle < 1e-6, "angle {angle}");
        }
    }

    #[test]
    fn pose_heading_cases() {
        let patch = |n: Vector3<f64>| PlanarPatch {
            normal: n,
            centroid: Vector3::new(0.0, 0.0, 1.0),
            inlier_indices: vec![],
            rms_residual: 0.0,
        };
        let p = placard_pose(&patch(Vector3::new(-1.0, 0.0, 0.0)), &Pose3::identity()).unwrap();
        assert_eq!(p.theta, PI);
        let p = placard_pose(
            &patch(Vector3::new(-1.0, 0.0, 0.0)),
            &Pose3::rot_z(FRAC_PI_2),
        )
        .unwrap();
        assert!((p.theta + FRAC_PI_2).abs() < 1e-12);
        assert!(matches!(
            placard_pose(&patch(Vector3::new(0.0, 0.0, -1.0)), &Pose3::identity()),
            Err(PlacardError::HorizontalPlane { .. })
        ));
    }
}
