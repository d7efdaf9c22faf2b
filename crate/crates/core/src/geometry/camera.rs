use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::{Frame, GeometryError, PointCloud};

/// Default valid depth range of a wide-field time-of-flight sensor, metres.
pub const DEFAULT_DEPTH_MIN: f64 = 0.25;
pub const DEFAULT_DEPTH_MAX: f64 = 2.88;

/// Pinhole intrinsics of the depth camera plus its raw-unit scale and
/// valid range. Pixel coordinates are integer indices: pixel `(u, v)` is the
/// ray through `((u - cx) / fx, (v - cy) / fy, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
    /// Metres per stored depth unit.
    pub depth_scale: f64,
    pub depth_min: f64,
    pub depth_max: f64,
}

impl Default for CameraIntrinsics {
    /// 128×128 desk-scale depth camera, ~65° field of view, millimetre units.
    fn default() -> Self {
        Self {
            fx: 100.0,
            fy: 100.0,
            cx: 63.5,
            cy: 63.5,
            width: 128,
            height: 128,
            depth_scale: 0.001,
            depth_min: DEFAULT_DEPTH_MIN,
            depth_max: DEFAULT_DEPTH_MAX,
        }
    }
}

impl CameraIntrinsics {
    pub fn validate(&self) -> Result<(), GeometryError> {
        let bad = |msg: &str| Err(GeometryError::InvalidIntrinsics(msg.to_string()));
        if !(self.fx > 0.0 && self.fy > 0.0) {
            return bad("fx and fy must be positive");
        }
        if self.width == 0 || self.height == 0 {
            return bad("image dimensions must be non-zero");
        }
        if !(self.cx >= 0.0 && self.cx < self.width as f64) {
            return bad("cx outside [0, width)");
        }
        if !(self.cy >= 0.0 && self.cy < self.height as f64) {
            return bad("cy outside [0, height)");
        }
        if !(self.depth_scale > 0.0) {
            return bad("depth_scale must be positive");
        }
        if !(self.depth_min < self.depth_max) || self.depth_min < 0.0 {
            return bad("need 0 <= depth_min < depth_max");
        }
        Ok(())
    }

    /// Intrinsics of a co-registered camera with `factor` times the
    /// resolution and the same field of view. Pixel `u` of this camera covers
    /// pixels `factor*u .. factor*u + factor` of the scaled one.
    pub fn scaled(&self, factor: u32) -> CameraIntrinsics {
        let s = factor as f64;
        CameraIntrinsics {
            fx: self.fx * s,
            fy: self.fy * s,
            cx: (self.cx + 0.5) * s - 0.5,
            cy: (self.cy + 0.5) * s - 0.5,
            width: self.width * factor,
            height: self.height * factor,
            ..*self
        }
    }

    pub fn in_range(&self, z: f64) -> bool {
        z >= self.depth_min && z <= self.depth_max
    }

    /// Unnormalized viewing ray of pixel coordinate `(u, v)` (z component 1).
    pub fn ray(&self, u: f64, v: f64) -> Vector3<f64> {
        Vector3::new((u - self.cx) / self.fx, (v - self.cy) / self.fy, 1.0)
    }

    pub fn full_frame(&self) -> PixelRect {
        PixelRect::new(0, 0, self.width, self.height)
    }
}

/// Half-open pixel rectangle `[u0, u1) × [v0, v1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "[u32; 4]", into = "[u32; 4]")]
pub struct PixelRect {
    pub u0: u32,
    pub v0: u32,
    pub u1: u32,
    pub v1: u32,
}

impl From<[u32; 4]> for PixelRect {
    fn from(a: [u32; 4]) -> Self {
        PixelRect::new(a[0], a[1], a[2], a[3])
    }
}

impl From<PixelRect> for [u32; 4] {
    fn from(r: PixelRect) -> Self {
        [r.u0, r.v0, r.u1, r.v1]
    }
}

impl PixelRect {
    pub fn new(u0: u32, v0: u32, u1: u32, v1: u32) -> Self {
        Self { u0, v0, u1, v1 }
    }

    pub fn width(&self) -> u32 {
        self.u1.saturating_sub(self.u0)
    }

    pub fn height(&self) -> u32 {
        self.v1.saturating_sub(self.v0)
    }

    pub fn area(&self) -> u64 {
        self.width() as u64 * self.height() as u64
    }

    pub fn is_empty(&self) -> bool {
        self.width() == 0 || self.height() == 0
    }

    pub fn within(&self, width: u32, height: u32) -> bool {
        self.u0 <= self.u1 && self.v0 <= self.v1 && self.u1 <= width && self.v1 <= height
    }

    pub fn scaled(&self, factor: u32) -> PixelRect {
        PixelRect::new(
            self.u0 * factor,
            self.v0 * factor,
            self.u1 * factor,
            self.v1 * factor,
        )
    }

    /// Shrinks each side by `fraction` of the rectangle's extent (total
    /// shrink `2 * fraction`), never below one pixel.
    pub fn shrunk(&self, fraction: f64) -> PixelRect {
        if fraction <= 0.0 {
            return *self;
        }
        let du = ((self.width() as f64) * fraction).floor() as u32;
        let dv = ((self.height() as f64) * fraction).floor() as u32;
        let du = du.min(self.width().saturating_sub(1) / 2);
        let dv = dv.min(self.height().saturating_sub(1) / 2);
        PixelRect::new(self.u0 + du, self.v0 + dv, self.u1 - du, self.v1 - dv)
    }
}

/// Raw 16-bit depth frame. A stored value of 0 means "no return".
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DepthImage {
    pub width: u32,
    pub height: u32,
    pub data: Vec<u16>,
}

impl DepthImage {
    pub fn new(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            data: vec![0; (width * height) as usize],
        }
    }

    pub fn get(&self, u: u32, v: u32) -> u16 {
        self.data[(v * self.width + u) as usize]
    }

    pub fn set(&mut self, u: u32, v: u32, d: u16) {
        let w = self.width;
        self.data[(v * w + u) as usize] = d;
    }
}

/// Back-projects every valid-depth pixel of `roi` (or the whole frame) into
/// a camera-frame cloud. Pixels with depth 0 or outside the valid range are
/// skipped.
pub fn backproject(
    depth: &DepthImage,
    k: &CameraIntrinsics,
    roi: Option<PixelRect>,
) -> Result<PointCloud, GeometryError> {
    let roi = roi.unwrap_or_else(|| PixelRect::new(0, 0, depth.width, depth.height));
    if !roi.within(depth.width, depth.height) {
        return Err(GeometryError::RoiOutOfBounds(roi));
    }
    let mut points = Vec::with_capacity(roi.area() as usize);
    for v in roi.v0..roi.v1 {
        for u in roi.u0..roi.u1 {
            let raw = depth.get(u, v);
            if raw == 0 {
                continue;
            }
            let z = raw as f64 * k.depth_scale;
            if !k.in_range(z) {
                continue;
            }
            points.push(Vector3::new(
                (u as f64 - k.cx) * z / k.fx,
                (v as f64 - k.cy) * z / k.fy,
                z,
            ));
        }
    }
    if points.is_empty() {
        return Err(GeometryError::EmptyCloud);
    }
    Ok(PointCloud::new(points, Frame::Camera))
}

/// Pinhole projection of a camera-frame point to pixel coordinates.
pub fn project(point: &Vector3<f64>, k: &CameraIntrinsics) -> Result<[f64; 2], GeometryError> {
    if point.z <= 0.0 {
        return Err(GeometryError::BehindCamera);
    }
    Ok([
        k.fx * point.x / point.z + k.cx,
        k.fy * point.y / point.z + k.cy,
    ])
}
