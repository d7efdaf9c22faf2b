use nalgebra::{Matrix3, Rotation3, Unit, Vector3};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};

use super::spec::{NoiseSpec, PlacardSpec, Side, Wall, WorldSpec};
use super::SimError;
use crate::codematrix::{CodeMatrix, DARK, LIGHT};
use crate::geometry::{project, CameraIntrinsics, DepthImage, GrayImage, PixelRect, Pose3};
use crate::placards::{Detection, MAX_INCIDENCE_DEG};

/// Grey levels of untextured surfaces in colour frames.
pub const WALL_SHADE: u8 = 170;
pub const FLOOR_SHADE: u8 = 90;
pub const CEILING_SHADE: u8 = 215;

/// Colour samples per pixel side inside placard regions.
const SUPERSAMPLE: usize = 3;

/// `world_from_camera` for a level camera at (x, y, height) whose optical
/// axis points along `yaw`.
pub fn camera_pose(x: f64, y: f64, yaw: f64, height: f64) -> Pose3 {
    let (s, c) = yaw.sin_cos();
    let r = Matrix3::from_columns(&[
        Vector3::new(s, -c, 0.0),
        Vector3::new(0.0, 0.0, -1.0),
        Vector3::new(c, s, 0.0),
    ]);
    Pose3::from_matrix(&r, Vector3::new(x, y, height))
}

pub(crate) fn placard_center(w: &Wall, p: &PlacardSpec) -> [f64; 3] {
    let d = w.direction();
    [
        w.start[0] + d[0] * p.offset,
        w.start[1] + d[1] * p.offset,
        p.height,
    ]
}

/// Outward unit normal of a wall face.
pub fn face_normal(w: &Wall, side: Side) -> Vector3<f64> {
    let d = w.direction();
    let left = Vector3::new(-d[1], d[0], 0.0);
    match side {
        Side::Left => left,
        Side::Right => -left,
    }
}

#[derive(Debug, Clone)]
pub struct PlacardGeom {
    pub center: Vector3<f64>,
    pub normal: Vector3<f64>,
    /// Rightward direction for a viewer facing the placard.
    pub right: Vector3<f64>,
    pub half_size: f64,
    pub wall: usize,
    pub code: CodeMatrix,
    pub damaged: CodeMatrix,
}

impl PlacardGeom {
    pub fn theta(&self) -> f64 {
        self.normal.y.atan2(self.normal.x)
    }

    pub fn corners(&self) -> [Vector3<f64>; 4] {
        let (r, u) = (self.right * self.half_size, Vector3::z() * self.half_size);
        [
            self.center - r + u,
            self.center + r + u,
            self.center + r - u,
            self.center - r - u,
        ]
    }

    /// Face coordinates (rightward, downward) in `[0, 1)` of a point on the
    /// placard plane, if it lies on the placard.
    fn face_coords(&self, p: &Vector3<f64>) -> Option<(f64, f64)> {
        let d = p - self.center;
        let s = (d.dot(&self.right) + self.half_size) / (2.0 * self.half_size);
        let t = (self.half_size - d.z) / (2.0 * self.half_size);
        ((0.0..1.0).contains(&s) && (0.0..1.0).contains(&t)).then_some((s, t))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Surface {
    Wall(usize),
    Floor,
    Ceiling,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit {
    /// Ray parameter; with rays `R·(x, y, 1)` this is the camera-frame z.
    pub t: f64,
    pub point: Vector3<f64>,
    pub surface: Surface,
}

/// Raycasting view of a world.
#[derive(Debug, Clone)]
pub struct Scene {
    pub walls: Vec<Wall>,
    pub ceiling: f64,
    pub placards: Vec<PlacardGeom>,
    by_wall: Vec<Vec<usize>>,
}

impl Scene {
    pub fn new(spec: &WorldSpec) -> Result<Scene, SimError> {
        let mut by_wall = vec![Vec::new(); spec.walls.len()];
        let mut placards = Vec::with_capacity(spec.placards.len());
        for (i, p) in spec.placards.iter().enumerate() {
            let w = &spec.walls[p.wall];
            let normal = face_normal(w, p.side);
            placards.push(PlacardGeom {
                center: Vector3::from(placard_center(w, p)),
                normal,
                right: (-normal).cross(&Vector3::z()),
                half_size: p.half_size,
                wall: p.wall,
                code: p.code()?,
                damaged: p.code()?.corrupted(),
            });
            by_wall[p.wall].push(i);
        }
        Ok(Scene {
            walls: spec.walls.clone(),
            ceiling: spec.ceiling_height,
            placards,
            by_wall,
        })
    }

    /// Nearest surface along `o + t·d`, `t > 0`.
    pub fn cast(&self, o: &Vector3<f64>, d: &Vector3<f64>) -> Option<Hit> {
        let mut best: Option<Hit> = None;
        let mut consider = |t: f64, surface: Surface| {
            if t > 1e-9 && best.is_none_or(|b| t < b.t) {
                best = Some(Hit {
                    t,
                    point: o + d * t,
                    surface,
                });
            }
        };
        for (i, w) in self.walls.iter().enumerate() {
            // axis-aligned: either x or y is constant along the wall
            let (axis, other) = if w.start[0] == w.end[0] {
                (0, 1)
            } else {
                (1, 0)
            };
            if d[axis].abs() < 1e-12 {
                continue;
            }
            let t = (w.start[axis] - o[axis]) / d[axis];
            if t <= 1e-9 {
                continue;
            }
            let q = o[other] + t * d[other];
            let z = o.z + t * d.z;
            let (lo, hi) = if w.start[other] < w.end[other] {
                (w.start[other], w.end[other])
            } else {
                (w.end[other], w.start[other])
            };
            if q >= lo && q <= hi && z >= 0.0 && z <= w.height {
                consider(t, Surface::Wall(i));
            }
        }
        if d.z < -1e-12 {
            consider(-o.z / d.z, Surface::Floor);
        } else if d.z > 1e-12 {
            consider((self.ceiling - o.z) / d.z, Surface::Ceiling);
        }
        best
    }

    /// Grey level seen along a ray that hit `hit`.
    fn shade(&self, hit: &Hit, d: &Vector3<f64>, damaged: &[bool]) -> f64 {
        match hit.surface {
            Surface::Floor => FLOOR_SHADE as f64,
            Surface::Ceiling => CEILING_SHADE as f64,
            Surface::Wall(w) => {
                for &pi in &self.by_wall[w] {
                    let p = &self.placards[pi];
                    if d.dot(&p.normal) >= 0.0 {
                        continue;
                    }
                    if let Some((s, t)) = p.face_coords(&hit.point) {
                        let code = if damaged[pi] { &p.damaged } else { &p.code };
                        return if code.is_light(s, t) { LIGHT } else { DARK } as f64;
                    }
                }
                WALL_SHADE as f64
            }
        }
    }
}

fn surface_shade(s: Option<Surface>) -> u8 {
    match s {
        Some(Surface::Wall(_)) => WALL_SHADE,
        Some(Surface::Floor) => FLOOR_SHADE,
        Some(Surface::Ceiling) => CEILING_SHADE,
        None => 0,
    }
}

/// Camera-frame depth of the nearest surface per pixel, row-major; 0 where
/// nothing lies within the sensor range. No noise, no quantization.
pub fn raycast_range(scene: &Scene, pose: &Pose3, k: &CameraIntrinsics) -> Vec<f64> {
    let r = pose.rotation_matrix();
    let o = pose.translation;
    let mut out = Vec::with_capacity((k.width * k.height) as usize);
    for v in 0..k.height {
        for u in 0..k.width {
            let d = r * k.ray(u as f64, v as f64);
            out.push(match scene.cast(&o, &d) {
                Some(h) if k.in_range(h.t) => h.t,
                _ => 0.0,
            });
        }
    }
    out
}

fn quantize(z: f64, k: &CameraIntrinsics) -> u16 {
    (z / k.depth_scale).round().clamp(0.0, u16::MAX as f64) as u16
}

/// Noiseless depth frame of `scene` seen from `world_from_camera`.
pub fn raycast_depth(scene: &Scene, pose: &Pose3, k: &CameraIntrinsics) -> DepthImage {
    let mut img = DepthImage::new(k.width, k.height);
    for (px, z) in img.data.iter_mut().zip(raycast_range(scene, pose, k)) {
        *px = quantize(z, k);
    }
    img
}

/// Ground-truth view of one placard before detector noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlacardView {
    pub placard: usize,
    /// Pixels whose centres fall inside the projected placard.
    pub bbox: PixelRect,
    /// In-frame share of the projected placard area.
    pub visible_fraction: f64,
}

/// Placards a detector can see from `pose`: centre in front of the camera,
/// inside the frame, within depth range, not occluded and viewed less
/// obliquely than the rectification limit.
pub fn visible_placards(
    scene: &Scene,
    pose: &Pose3,
    k: &CameraIntrinsics,
    min_px: u32,
) -> Vec<PlacardView> {
    let inv = pose.inverse();
    let o = pose.translation;
    let mut out = Vec::new();
    for (i, p) in scene.placards.iter().enumerate() {
        let c = inv.transform_point(&p.center);
        if c.z <= 0.0 || !k.in_range(c.z) {
            continue;
        }
        let Ok(uv) = project(&c, k) else { continue };
        let (w, h) = (k.width as f64, k.height as f64);
        if uv[0] < -0.5 || uv[0] >= w - 0.5 || uv[1] < -0.5 || uv[1] >= h - 0.5 {
            continue;
        }
        let to = p.center - o;
        let incidence = (-p.normal.dot(&to.normalize())).clamp(-1.0, 1.0).acos();
        if incidence.to_degrees() >= MAX_INCIDENCE_DEG {
            continue;
        }
        match scene.cast(&o, &(to / c.z)) {
            Some(hit)
                if hit.surface == Surface::Wall(p.wall) && (hit.t - 1.0 * c.z).abs() < 1e-6 => {}
            _ => continue,
        }
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        let mut behind = false;
        for corner in p.corners() {
            match project(&inv.transform_point(&corner), k) {
                Ok(q) => {
                    for a in 0..2 {
                        lo[a] = lo[a].min(q[a]);
                        hi[a] = hi[a].max(q[a]);
                    }
                }
                Err(_) => behind = true,
            }
        }
        if behind {
            continue;
        }
        let full = (hi[0] - lo[0]) * (hi[1] - lo[1]);
        let cw = (hi[0].min(w - 0.5) - lo[0].max(-0.5)).max(0.0);
        let ch = (hi[1].min(h - 0.5) - lo[1].max(-0.5)).max(0.0);
        let visible_fraction = if full > 0.0 {
            (cw * ch / full).min(1.0)
        } else {
            0.0
        };
        let u0 = lo[0].ceil().max(0.0) as u32;
        let v0 = lo[1].ceil().max(0.0) as u32;
        let u1 = ((hi[0].floor() + 1.0).max(0.0) as u32).min(k.width);
        let v1 = ((hi[1].floor() + 1.0).max(0.0) as u32).min(k.height);
        if u1 < u0 + min_px.max(1) || v1 < v0 + min_px.max(1) {
            continue;
        }
        out.push(PlacardView {
            placard: i,
            bbox: PixelRect::new(u0, v0, u1, v1),
            visible_fraction,
        });
    }
    out
}

/// Everything recorded at one keyframe.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub depth: DepthImage,
    pub color: GrayImage,
    pub detections: Vec<Detection>,
    /// Placard index of each detection; `None` for spurious ones.
    pub sources: Vec<Option<usize>>,
}

struct Tilt {
    bbox: PixelRect,
    wall: usize,
    center: Vector3<f64>,
    normal: Vector3<f64>,
}

fn jitter(rng: &mut ChaCha8Rng, j: u32) -> i64 {
    if j == 0 {
        0
    } else {
        rng.random_range(-(j as i64)..=j as i64)
    }
}

/// Renders depth, colour and detections for one keyframe. All randomness
/// comes from `rng`, drawn in a fixed order.
pub fn render_frame(
    scene: &Scene,
    pose: &Pose3,
    k: &CameraIntrinsics,
    color_scale: u32,
    min_detection_px: u32,
    noise: &NoiseSpec,
    rng: &mut ChaCha8Rng,
) -> Frame {
    let views = visible_placards(scene, pose, k, min_detection_px);
    let mut detections = Vec::new();
    let mut sources = Vec::new();
    let mut damaged = vec![false; scene.placards.len()];
    let mut tilts = Vec::new();
    let [clo, chi] = noise.confidence_range;
    let tilt_dist = Normal::new(0.0, noise.normal_sigma_deg.to_radians()).unwrap();
    for view in &views {
        let conf: f64 = if chi > clo {
            rng.random_range(clo..=chi)
        } else {
            clo
        };
        let b = view.bbox;
        let j = noise.detection_jitter;
        let u0 = (b.u0 as i64 + jitter(rng, j)).clamp(0, k.width as i64);
        let v0 = (b.v0 as i64 + jitter(rng, j)).clamp(0, k.height as i64);
        let u1 = (b.u1 as i64 + jitter(rng, j)).clamp(0, k.width as i64);
        let v1 = (b.v1 as i64 + jitter(rng, j)).clamp(0, k.height as i64);
        if noise.ocr_corruption_prob > 0.0 && rng.random_bool(noise.ocr_corruption_prob) {
            damaged[view.placard] = true;
        }
        let p = &scene.placards[view.placard];
        let mut normal = p.normal;
        if noise.normal_sigma_deg > 0.0 {
            let phi: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            let angle = tilt_dist.sample(rng);
            let axis = Unit::new_normalize(p.right * phi.cos() + Vector3::z() * phi.sin());
            normal = Rotation3::from_axis_angle(&axis, angle) * p.normal;
        }
        if u1 <= u0 || v1 <= v0 {
            continue;
        }
        let bbox = PixelRect::new(u0 as u32, v0 as u32, u1 as u32, v1 as u32);
        if noise.normal_sigma_deg > 0.0 {
            tilts.push(Tilt {
                bbox,
                wall: p.wall,
                center: p.center,
                normal,
            });
        }
        detections.push(Detection {
            bbox,
            confidence: conf * view.visible_fraction,
        });
        sources.push(Some(view.placard));
    }
    if noise.false_positive_rate > 0.0 {
        let n = Poisson::new(noise.false_positive_rate).unwrap().sample(rng) as usize;
        for _ in 0..n {
            let w = rng.random_range(6..=20u32).min(k.width);
            let h = rng.random_range(6..=20u32).min(k.height);
            let u0 = rng.random_range(0..=k.width - w);
            let v0 = rng.random_range(0..=k.height - h);
            let conf: f64 = if chi > clo {
                rng.random_range(clo..=chi)
            } else {
                clo
            };
            detections.push(Detection {
                bbox: PixelRect::new(u0, v0, u0 + w, v0 + h),
                confidence: conf,
            });
            sources.push(None);
        }
    }

    // depth
    let r = pose.rotation_matrix();
    let o = pose.translation;
    let depth_noise = Normal::new(0.0, noise.depth_sigma).unwrap();
    let mut depth = DepthImage::new(k.width, k.height);
    let mut classes = vec![None; (k.width * k.height) as usize];
    for v in 0..k.height {
        for u in 0..k.width {
            let d = r * k.ray(u as f64, v as f64);
            let Some(hit) = scene.cast(&o, &d) else {
                continue;
            };
            let i = (v * k.width + u) as usize;
            classes[i] = Some(hit.surface);
            let mut z = hit.t;
            if let Surface::Wall(w) = hit.surface {
                let inside = |b: &PixelRect| u >= b.u0 && u < b.u1 && v >= b.v0 && v < b.v1;
                if let Some(t) = tilts.iter().find(|t| t.wall == w && inside(&t.bbox)) {
                    let denom = d.dot(&t.normal);
                    if denom.abs() > 1e-9 {
                        let tt = (t.center - o).dot(&t.normal) / denom;
                        if tt > 0.0 {
                            z = tt;
                        }
                    }
                }
            }
            if !k.in_range(z) {
                continue;
            }
            if noise.depth_sigma > 0.0 {
                z += depth_noise.sample(rng);
            }
            depth.set(u, v, quantize(z, k));
        }
    }

    // colour: flat shading from the depth pass, placards supersampled
    let kc = k.scaled(color_scale);
    let mut color = GrayImage::new(kc.width, kc.height);
    for v in 0..kc.height {
        for u in 0..kc.width {
            let i = ((v / color_scale) * k.width + u / color_scale) as usize;
            color.set(u, v, surface_shade(classes[i]));
        }
    }
    let inv = pose.inverse();
    for p in &scene.placards {
        if (p.center - o).dot(&p.normal) >= 0.0 {
            continue;
        }
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        let mut ok = true;
        for corner in p.corners() {
            match project(&inv.transform_point(&corner), &kc) {
                Ok(q) => {
                    for a in 0..2 {
                        lo[a] = lo[a].min(q[a]);
                        hi[a] = hi[a].max(q[a]);
                    }
                }
                Err(_) => ok = false,
            }
        }
        if !ok
            || hi[0] < -1.0
            || hi[1] < -1.0
            || lo[0] > kc.width as f64
            || lo[1] > kc.height as f64
        {
            continue;
        }
        let u0 = (lo[0].floor() - 1.0).max(0.0) as u32;
        let v0 = (lo[1].floor() - 1.0).max(0.0) as u32;
        let u1 = ((hi[0].ceil() + 2.0).max(0.0) as u32).min(kc.width);
        let v1 = ((hi[1].ceil() + 2.0).max(0.0) as u32).min(kc.height);
        let n = SUPERSAMPLE as f64;
        for v in v0..v1 {
            for u in u0..u1 {
                let mut acc = 0.0;
                for sy in 0..SUPERSAMPLE {
                    for sx in 0..SUPERSAMPLE {
                        let du = u as f64 + (sx as f64 + 0.5) / n - 0.5;
                        let dv = v as f64 + (sy as f64 + 0.5) / n - 0.5;
                        let d = r * kc.ray(du, dv);
                        acc += match scene.cast(&o, &d) {
                            Some(hit) => scene.shade(&hit, &d, &damaged),
                            None => 0.0,
                        };
                    }
                }
                color.set(u, v, (acc / (n * n)).round() as u8);
            }
        }
    }

    Frame {
        depth,
        color,
        detections,
        sources,
    }
}
