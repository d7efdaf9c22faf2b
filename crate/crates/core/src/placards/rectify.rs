use nalgebra::{Matrix3, Vector3};

use super::{PlacardError, PlanarPatch};
use crate::geometry::{CameraIntrinsics, GrayImage, PixelRect};

/// Views more oblique than this (angle between the plane normal and the
/// viewing ray to the patch centroid) are not rectified.
pub const MAX_INCIDENCE_DEG: f64 = 85.0;

/// Angle between the patch normal and the viewing ray through its centroid.
pub fn incidence_angle(patch: &PlanarPatch) -> f64 {
    let ray = patch.centroid.normalize();
    (-patch.normal.dot(&ray)).clamp(-1.0, 1.0).acos()
}

/// Homography taking pixels of a virtual fronto-parallel camera to pixels of
/// the real camera `k`. The virtual camera sits on the patch normal at the
/// centroid's range, looks along `-normal`, keeps the real camera's x axis
/// as far as the plane allows, and shares `k`'s focal lengths with its
/// principal point at the origin.
pub fn plane_homography(patch: &PlanarPatch, k: &CameraIntrinsics) -> Matrix3<f64> {
    let n = patch.normal;
    let range = patch.centroid.norm();
    let z_v = -n;
    let x_ref = Vector3::x();
    let mut x_v = x_ref - z_v * x_ref.dot(&z_v);
    if x_v.norm() < 1e-9 {
        let y_ref = Vector3::y();
        x_v = y_ref.cross(&z_v);
    }
    let x_v = x_v.normalize();
    let y_v = z_v.cross(&x_v);
    let real_from_virtual = Matrix3::from_columns(&[x_v, y_v, z_v]);
    let center = patch.centroid + n * range;

    let kmat = Matrix3::new(k.fx, 0.0, k.cx, 0.0, k.fy, k.cy, 0.0, 0.0, 1.0);
    let kv_inv = Matrix3::new(1.0 / k.fx, 0.0, 0.0, 0.0, 1.0 / k.fy, 0.0, 0.0, 0.0, 1.0);
    // X = C - range * d / (n·d) for virtual ray d; projective form:
    let plane_map = center * n.transpose() - Matrix3::identity() * range;
    kmat * plane_map * real_from_virtual * kv_inv
}

fn apply(h: &Matrix3<f64>, x: f64, y: f64) -> Option<[f64; 2]> {
    let p = h * Vector3::new(x, y, 1.0);
    if p.z.abs() < 1e-12 {
        return None;
    }
    Some([p.x / p.z, p.y / p.z])
}

/// Warps the `roi` of `color` (intrinsics `k`) to approximate a head-on
/// view of the fitted plane. The output keeps the ROI's longer edge length
/// in pixels and is resampled bilinearly.
pub fn rectify_roi(
    color: &GrayImage,
    roi: PixelRect,
    patch: &PlanarPatch,
    k: &CameraIntrinsics,
) -> Result<GrayImage, PlacardError> {
    let incidence = incidence_angle(patch);
    if incidence.to_degrees() > MAX_INCIDENCE_DEG {
        return Err(PlacardError::GrazingAngle {
            degrees: incidence.to_degrees(),
        });
    }
    if roi.is_empty() {
        return Ok(GrayImage::new(0, 0));
    }
    let h = plane_homography(patch, k);
    let h_inv = h.try_inverse().ok_or(PlacardError::GrazingAngle {
        degrees: incidence.to_degrees(),
    })?;

    // footprint of the ROI's outer pixel edges in the virtual image
    let (u0, v0) = (roi.u0 as f64 - 0.5, roi.v0 as f64 - 0.5);
    let (u1, v1) = (roi.u1 as f64 - 0.5, roi.v1 as f64 - 0.5);
    let mut min = [f64::INFINITY; 2];
    let mut max = [f64::NEG_INFINITY; 2];
    for (x, y) in [(u0, v0), (u1, v0), (u0, v1), (u1, v1)] {
        let ray = k.ray(x, y);
        if patch.normal.dot(&ray) >= 0.0 {
            // corner ray never meets the plane in front of the camera
            return Err(PlacardError::GrazingAngle {
                degrees: incidence.to_degrees(),
            });
        }
        let p = apply(&h_inv, x, y).ok_or(PlacardError::GrazingAngle {
            degrees: incidence.to_degrees(),
        })?;
        for i in 0..2 {
            min[i] = min[i].min(p[i]);
            max[i] = max[i].max(p[i]);
        }
    }
    let extent = [max[0] - min[0], max[1] - min[1]];
    let long_edge = roi.width().max(roi.height()) as f64;
    let step = extent[0].max(extent[1]) / long_edge;
    let out_w = ((extent[0] / step).round() as u32).max(1);
    let out_h = ((extent[1] / step).round() as u32).max(1);

    let mut out = GrayImage::new(out_w, out_h);
    for j in 0..out_h {
        for i in 0..out_w {
            let x = min[0] + (i as f64 + 0.5) * step;
            let y = min[1] + (j as f64 + 0.5) * step;
            let value = match apply(&h, x, y) {
                Some([u, v]) => color.sample_bilinear(u, v),
                None => 0.0,
            };
            out.set(i, j, value.round().clamp(0.0, 255.0) as u8);
        }
    }
    Ok(out)
}
