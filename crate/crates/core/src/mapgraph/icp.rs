use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::MapError;
use crate::geometry::{PointCloud, Pose3};
use crate::spatial::{voxel_subsample, KdTree};

/// Minimum number of source points (after subsampling) and target points.
pub const MIN_ICP_POINTS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IcpParams {
    pub max_iterations: u32,
    /// Stop once an update moves the estimate less than this, metres.
    pub convergence_translation: f64,
    /// Stop once an update rotates the estimate less than this, radians.
    pub convergence_rotation: f64,
    pub max_correspondence_dist: f64,
    /// Voxel edge used to thin the source cloud. The target is indexed at
    /// full resolution.
    pub subsample_voxel: f64,
}

impl Default for IcpParams {
    fn default() -> Self {
        Self {
            max_iterations: 50,
            convergence_translation: 1e-4,
            convergence_rotation: 1e-4,
            max_correspondence_dist: 0.5,
            subsample_voxel: 0.05,
        }
    }
}

impl IcpParams {
    pub fn validate(&self) -> Result<(), String> {
        if self.max_iterations == 0 {
            return Err("icp.max_iterations must be positive".into());
        }
        for (name, v) in [
            ("icp.convergence_translation", self.convergence_translation),
            ("icp.convergence_rotation", self.convergence_rotation),
            ("icp.max_correspondence_dist", self.max_correspondence_dist),
            ("icp.subsample_voxel", self.subsample_voxel),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(format!("{name} must be positive"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct IcpResult {
    /// Estimate of `target_from_source`.
    pub pose: Pose3,
    /// RMS distance over final correspondences within the gating distance.
    pub rms_residual: f64,
    pub iterations: u32,
    pub correspondences: usize,
    /// Truncated RMS `sqrt(mean(min(d², d_max²)))` over all source points at
    /// every visited estimate, starting with `init`. Point-to-point ICP with
    /// gated correspondences never increases this quantity.
    pub cost_history: Vec<f64>,
}

/// Point-to-point ICP: alternates nearest-neighbour association against a
/// kd-tree over `target` with the closed-form SVD rigid fit, starting from
/// `init`, until an update falls below the convergence tolerances or the
/// iteration budget runs out. Returns `target_from_source`.
pub fn icp_align(
    source: &PointCloud,
    target: &PointCloud,
    init: &Pose3,
    params: &IcpParams,
) -> Result<IcpResult, MapError> {
    let src = voxel_subsample(&source.points, params.subsample_voxel);
    if src.len() < MIN_ICP_POINTS || target.len() < MIN_ICP_POINTS {
        return Err(MapError::InsufficientPoints {
            source_points: src.len(),
            target_points: target.len(),
        });
    }
    let tree = KdTree::build(&target.points);
    let gate2 = params.max_correspondence_dist * params.max_correspondence_dist;

    let mut pose = *init;
    let mut history = Vec::new();
    let mut iterations = 0;
    let mut pairs = associate(&tree, &src, &pose, gate2, &mut history);
    if pairs.is_empty() {
        return Err(MapError::NoCorrespondences);
    }

    while iterations < params.max_iterations {
        if pairs.len() < 3 {
            break;
        }
        let next = best_rigid_fit(&pairs);
        let delta = pose.inverse().compose(&next);
        pose = next;
        iterations += 1;
        pairs = associate(&tree, &src, &pose, gate2, &mut history);
        if delta.translation.norm() < params.convergence_translation
            && delta.rotation_angle() < params.convergence_rotation
        {
            break;
        }
    }

    let rms = if pairs.is_empty() {
        f64::INFINITY
    } else {
        let sum: f64 = pairs
            .iter()
            .map(|(s, t)| (pose.transform_point(s) - t).norm_squared())
            .sum();
        (sum / pairs.len() as f64).sqrt()
    };
    Ok(IcpResult {
        pose,
        rms_residual: rms,
        iterations,
        correspondences: pairs.len(),
        cost_history: history,
    })
}

/// Nearest-neighbour pairs `(source point, target point)` within the gate
/// at the current estimate; pushes the truncated cost onto `history`.
fn associate(
    tree: &KdTree,
    src: &[Vector3<f64>],
    pose: &Pose3,
    gate2: f64,
    history: &mut Vec<f64>,
) -> Vec<(Vector3<f64>, Vector3<f64>)> {
    let r = pose.rotation_matrix();
    let t = pose.translation;
    let mut pairs = Vec::with_capacity(src.len());
    let mut cost = 0.0;
    for s in src {
        let q = r * s + t;
        let (idx, d2) = tree.nearest(&q).expect("non-empty tree");
        if d2 <= gate2 {
            pairs.push((*s, *tree.point(idx)));
            cost += d2;
        } else {
            cost += gate2;
        }
    }
    history.push((cost / src.len() as f64).sqrt());
    pairs
}

/// Least-squares rigid transform mapping the first element of each pair
/// onto the second (Kabsch / Arun SVD solution with reflection guard).
pub fn best_rigid_fit(pairs: &[(Vector3<f64>, Vector3<f64>)]) -> Pose3 {
    let n = pairs.len() as f64;
    let (mut cs, mut ct) = (Vector3::zeros(), Vector3::zeros());
    for (s, t) in pairs {
        cs += s;
        ct += t;
    }
    cs /= n;
    ct /= n;
    let mut h = Matrix3::zeros();
    for (s, t) in pairs {
        h += (s - cs) * (t - ct).transpose();
    }
    let svd = h.svd(true, true);
    let u = svd.u.expect("svd u");
    let v_t = svd.v_t.expect("svd v_t");
    let v = v_t.transpose();
    let d = (v * u.transpose()).determinant().signum();
    let fix = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, d));
    let r = v * fix * u.transpose();
    Pose3::from_matrix(&r, ct - r * cs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{transform_cloud, Frame};
    use nalgebra::UnitQuaternion;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn corner_cloud(seed: u64, n: usize) -> PointCloud {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts = (0..n)
            .map(|i| {
                let a = rng.random_range(0.0..2.0);
                let h = rng.random_range(0.0..1.5);
                if i % 3 == 0 {
                    Vector3::new(a, 0.0, h)
                } else if i % 3 == 1 {
                    Vector3::new(0.0, a, h)
                } else {
                    Vector3::new(rng.random_range(0.0..2.0), a, 0.0)
                }
            })
            .collect();
        PointCloud::new(pts, Frame::Camera)
    }

    #[test]
    fn identical_clouds_give_identity() {
        let c = corner_cloud(1, 300);
        let r = icp_align(&c, &c, &Pose3::identity(), &IcpParams::default()).unwrap();
        assert!(r.pose.rotation_angle() < 1e-9);
        assert!(r.pose.translation.norm() < 1e-9);
        assert!(r.rms_residual < 1e-9);
    }

    #[test]
    fn recovers_known_transform() {
        let src = corner_cloud(2, 400);
        let truth = Pose3::new(
            UnitQuaternion::from_euler_angles(0.0, 0.0, 5f64.to_radians()),
            Vector3::new(0.2, 0.0, 0.0),
        );
        let tgt = transform_cloud(&truth, &src);
        let r = icp_align(&src, &tgt, &Pose3::identity(), &IcpParams::default()).unwrap();
        let (ang, dist) = r.pose.distance_to(&truth);
        assert!(dist < 1e-3, "translation error {dist}");
        assert!(
            ang.to_degrees() < 0.1,
            "rotation error {}",
            ang.to_degrees()
        );
        for w in r.cost_history.windows(2) {
            assert!(w[1] <= w[0] + 1e-12);
        }
    }

    #[test]
    fn far_apart_clouds_have_no_correspondences() {
        let src = corner_cloud(3, 100);
        let tgt = transform_cloud(&Pose3::from_translation(10.0, 0.0, 0.0), &src);
        assert!(matches!(
            icp_align(&src, &tgt, &Pose3::identity(), &IcpParams::default()),
            Err(MapError::NoCorrespondences)
        ));
    }

    #[test]
    fn tiny_cloud_is_rejected() {
        let src = corner_cloud(4, 5);
        let tgt = corner_cloud(4, 100);
        assert!(matches!(
            icp_align(&src, &tgt, &Pose3::identity(), &IcpParams::default()),
            Err(MapError::InsufficientPoints { .. })
        ));
    }

    #[test]
    fn rigid_fit_is_exact_on_clean_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let truth = Pose3::new(
            UnitQuaternion::from_euler_angles(0.3, -0.2, 1.1),
            Vector3::new(1.0, -2.0, 0.5),
        );
        let pairs: Vec<_> = (0..20)
            .map(|_| {
                let s = Vector3::new(
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                );
                (s, truth.transform_point(&s))
            })
            .collect();
        let fit = best_rigid_fit(&pairs);
        let (ang, dist) = fit.distance_to(&truth);
        assert!(ang < 1e-9 && dist < 1e-9);
    }

    #[test]
    fn params_must_be_positive() {
        assert!(IcpParams::default().validate().is_ok());
        let p = IcpParams {
            max_correspondence_dist: 0.0,
            ..IcpParams::default()
        };
        assert!(p.validate().is_err());
    }
}
