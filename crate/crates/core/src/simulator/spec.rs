use serde::{Deserialize, Serialize};

use super::SimError;
use crate::codematrix::{text_lines, CodeMatrix};
use crate::geometry::CameraIntrinsics;

/// Vertical wall rectangle standing on the floor between two plan points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Wall {
    pub start: [f64; 2],
    pub end: [f64; 2],
    pub height: f64,
}

impl Wall {
    pub fn length(&self) -> f64 {
        (self.end[0] - self.start[0]).hypot(self.end[1] - self.start[1])
    }

    pub fn direction(&self) -> [f64; 2] {
        let l = self.length();
        [
            (self.end[0] - self.start[0]) / l,
            (self.end[1] - self.start[1]) / l,
        ]
    }
}

/// Which face of a wall a placard hangs on, looking from `start` to `end`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

fn default_half_size() -> f64 {
    0.15
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlacardSpec {
    pub wall: usize,
    pub side: Side,
    /// Distance of the placard centre from the wall's start point.
    pub offset: f64,
    /// Height of the placard centre above the floor.
    pub height: f64,
    #[serde(default = "default_half_size")]
    pub half_size: f64,
    pub label: String,
    /// Extra text lines printed below the label.
    #[serde(default)]
    pub caption: Vec<String>,
    /// Printed with a damaged code that never decodes.
    #[serde(default)]
    pub unreadable: bool,
}

impl PlacardSpec {
    pub fn code(&self) -> Result<CodeMatrix, SimError> {
        let m = CodeMatrix::encode(&text_lines(&self.label, &self.caption))
            .map_err(|e| SimError::InvalidSpec(format!("placard {:?}: {e}", self.label)))?;
        Ok(if self.unreadable { m.corrupted() } else { m })
    }
}

/// Camera position in the plan and heading of the optical axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimedPose {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub yaw: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectorySpec {
    pub camera_height: f64,
    pub poses: Vec<TimedPose>,
}

fn default_confidence_range() -> [f64; 2] {
    [0.92, 0.99]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseSpec {
    /// Gaussian depth noise, metres.
    pub depth_sigma: f64,
    /// Each bbox edge moves by a uniform integer in `[-jitter, jitter]` px.
    pub detection_jitter: u32,
    /// Chance that a detected placard's code is damaged in that frame.
    pub ocr_corruption_prob: f64,
    /// Expected spurious detections per keyframe.
    pub false_positive_rate: f64,
    /// Per-keyframe random-walk steps of the recorded poses.
    pub drift_translation_sigma: f64,
    pub drift_yaw_sigma: f64,
    /// Constant yaw added per keyframe on top of the random walk, radians.
    pub drift_yaw_bias: f64,
    /// Tilt of the depth surface under each detection, degrees.
    pub normal_sigma_deg: f64,
    /// Detector confidence is uniform in this range, scaled by the visible
    /// fraction of the placard.
    #[serde(default = "default_confidence_range")]
    pub confidence_range: [f64; 2],
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self {
            depth_sigma: 0.0,
            detection_jitter: 0,
            ocr_corruption_prob: 0.0,
            false_positive_rate: 0.0,
            drift_translation_sigma: 0.0,
            drift_yaw_sigma: 0.0,
            drift_yaw_bias: 0.0,
            normal_sigma_deg: 0.0,
            confidence_range: default_confidence_range(),
        }
    }
}

fn default_min_detection_px() -> u32 {
    6
}

fn default_ceiling() -> f64 {
    2.6
}

fn default_color_scale() -> u32 {
    4
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorldSpec {
    pub walls: Vec<Wall>,
    #[serde(default = "default_ceiling")]
    pub ceiling_height: f64,
    pub placards: Vec<PlacardSpec>,
    pub trajectory: TrajectorySpec,
    /// Keyframe index ranges `[a, b)` tracked in a fresh submap.
    #[serde(default)]
    pub loss_segments: Vec<[usize; 2]>,
    #[serde(default)]
    pub noise: NoiseSpec,
    #[serde(default)]
    pub camera: CameraIntrinsics,
    /// Colour frames are this many times the depth resolution.
    #[serde(default = "default_color_scale")]
    pub color_scale: u32,
    /// Placards whose box is narrower or shorter than this many depth
    /// pixels go undetected.
    #[serde(default = "default_min_detection_px")]
    pub min_detection_px: u32,
    /// Plan rectangles `[x0, y0, x1, y1]` declared free of placards.
    #[serde(default)]
    pub free_regions: Vec<[f64; 4]>,
}

impl WorldSpec {
    pub fn from_json(text: &str) -> Result<WorldSpec, SimError> {
        serde_json::from_str(text).map_err(|e| SimError::InvalidSpec(e.to_string()))
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::InvalidSpec(m));
        self.camera
            .validate()
            .map_err(|e| SimError::InvalidSpec(format!("camera: {e}")))?;
        if self.color_scale == 0 || self.color_scale > 16 {
            return bad("color_scale must lie in 1..=16".into());
        }
        if !(self.ceiling_height > 0.0) {
            return bad("ceiling_height must be positive".into());
        }
        for (i, w) in self.walls.iter().enumerate() {
            let coords = [w.start[0], w.start[1], w.end[0], w.end[1], w.height];
            if !coords.iter().all(|c| c.is_finite()) {
                return bad(format!("wall {i}: non-finite coordinate"));
            }
            if w.start[0] != w.end[0] && w.start[1] != w.end[1] {
                return bad(format!(
                    "wall {i}: walls must be axis-aligned (right angles only)"
                ));
            }
            if !(w.length() > 0.0) || !(w.height > 0.0) {
                return bad(format!("wall {i}: zero length or height"));
            }
        }
        for (i, p) in self.placards.iter().enumerate() {
            let Some(w) = self.walls.get(p.wall) else {
                return bad(format!("placard {i}: wall {} does not exist", p.wall));
            };
            if !(p.half_size > 0.0) {
                return bad(format!("placard {i}: half_size must be positive"));
            }
            if p.offset - p.half_size < 0.0 || p.offset + p.half_size > w.length() {
                return bad(format!("placard {i}: offset outside the wall extent"));
            }
            if p.height - p.half_size < 0.0 || p.height + p.half_size > w.height {
                return bad(format!("placard {i}: height outside the wall extent"));
            }
            p.code()?;
            let c = super::scene::placard_center(w, p);
            for r in &self.free_regions {
                if c[0] >= r[0] && c[0] <= r[2] && c[1] >= r[1] && c[1] <= r[3] {
                    return bad(format!("placard {i}: inside a placard-free region"));
                }
            }
        }
        let t = &self.trajectory;
        if t.poses.is_empty() {
            return bad("trajectory has no poses".into());
        }
        if !t.camera_height.is_finite() {
            return bad("camera_height must be finite".into());
        }
        for (i, p) in t.poses.iter().enumerate() {
            if ![p.t, p.x, p.y, p.yaw].iter().all(|v| v.is_finite()) {
                return bad(format!("trajectory pose {i}: non-finite value"));
            }
            if i > 0 && p.t <= t.poses[i - 1].t {
                return bad(format!("trajectory pose {i}: time does not increase"));
            }
        }
        let mut prev_end = 0;
        for (i, s) in self.loss_segments.iter().enumerate() {
            if s[0] == 0 || s[0] >= s[1] || s[1] > t.poses.len() {
                return bad(format!(
                    "loss segment {i}: need 1 <= a < b <= keyframe count"
                ));
            }
            if s[0] <= prev_end && i > 0 {
                return bad(format!(
                    "loss segment {i}: segments must be ordered and disjoint"
                ));
            }
            prev_end = s[1];
        }
        let n = &self.noise;
        for (name, v) in [
            ("depth_sigma", n.depth_sigma),
            ("false_positive_rate", n.false_positive_rate),
            ("drift_translation_sigma", n.drift_translation_sigma),
            ("drift_yaw_sigma", n.drift_yaw_sigma),
            ("normal_sigma_deg", n.normal_sigma_deg),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("noise.{name} must be finite and non-negative"));
            }
        }
        if !n.drift_yaw_bias.is_finite() {
            return bad("noise.drift_yaw_bias must be finite".into());
        }
        if !(0.0..=1.0).contains(&n.ocr_corruption_prob) {
            return bad("noise.ocr_corruption_prob must lie in [0, 1]".into());
        }
        let [lo, hi] = n.confidence_range;
        if !(0.0 <= lo && lo <= hi && hi <= 1.0) {
            return bad("noise.confidence_range must satisfy 0 <= lo <= hi <= 1".into());
        }
        Ok(())
    }
}
