//! Synthetic corridor worlds and the datasets a robot would record in them.
//!
//! A [`WorldSpec`] describes axis-aligned walls, code-matrix placards and a
//! camera path. [`simulate_run`] raycasts depth, renders grayscale colour
//! frames with the placard codes composited in, emits detections, injects
//! tracking losses and odometric drift, and attaches full ground truth.

mod scene;
mod spec;
mod template;

pub use scene::{
    camera_pose, face_normal, raycast_depth, raycast_range, render_frame, visible_placards, Frame,
    Hit, PlacardGeom, PlacardView, Scene, Surface, CEILING_SHADE, FLOOR_SHADE, WALL_SHADE,
};
pub use spec::{NoiseSpec, PlacardSpec, Side, TimedPose, TrajectorySpec, Wall, WorldSpec};
pub use template::{template_world, ANNEX_REGION};

use std::collections::BTreeMap;

use nalgebra::Vector3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use thiserror::Error;

use crate::evaluation::ReferencePlacard;
use crate::geometry::Pose3;
use crate::io::{Dataset, GroundTruth, KeyframeRecord};
use crate::mapgraph::LossEvent;
use crate::placards::validate_label;

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("invalid world spec: {0}")]
    InvalidSpec(String),
}

/// A simulated dataset plus the bookkeeping that never reaches disk.
#[derive(Debug, Clone, PartialEq)]
pub struct Simulation {
    pub dataset: Dataset,
    /// Placard index behind each detection, per keyframe; `None` marks a
    /// spurious detection.
    pub sources: BTreeMap<u32, Vec<Option<usize>>>,
}

/// Ground-truth camera poses of the trajectory.
pub fn ground_truth_poses(spec: &WorldSpec) -> Vec<Pose3> {
    let h = spec.trajectory.camera_height;
    spec.trajectory
        .poses
        .iter()
        .map(|p| camera_pose(p.x, p.y, p.yaw, h))
        .collect()
}

/// Ground-truth placard poses and canonical labels.
pub fn reference_placards(spec: &WorldSpec) -> Vec<ReferencePlacard> {
    spec.placards
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let w = &spec.walls[p.wall];
            let c = scene::placard_center(w, p);
            let n = face_normal(w, p.side);
            ReferencePlacard {
                id: i as u32,
                x: c[0],
                y: c[1],
                z: c[2],
                theta_rad: n.y.atan2(n.x),
                label: validate_label(&p.label).map_or_else(|| p.label.clone(), |l| l.text),
            }
        })
        .collect()
}

/// Recorded poses: ground truth perturbed by a random walk in translation
/// and a biased random walk in yaw about the first camera position, so the error grows with the
/// distance travelled.
fn drifted_poses(gt: &[Pose3], noise: &NoiseSpec, seed: u64) -> Vec<Pose3> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(0);
    let step = Normal::new(0.0, noise.drift_translation_sigma).unwrap();
    let turn = Normal::new(0.0, noise.drift_yaw_sigma).unwrap();
    let p0 = gt
        .first()
        .map(|p| p.translation)
        .unwrap_or_else(Vector3::zeros);
    let about_p0 = |psi: f64| {
        Pose3::from_translation(p0.x, p0.y, p0.z)
            .compose(&Pose3::rot_z(psi))
            .compose(&Pose3::from_translation(-p0.x, -p0.y, -p0.z))
    };
    let mut tau = Vector3::zeros();
    let mut psi = 0.0;
    gt.iter()
        .enumerate()
        .map(|(k, g)| {
            if k > 0 {
                for a in 0..3 {
                    tau[a] += step.sample(&mut rng);
                }
                psi += noise.drift_yaw_bias + turn.sample(&mut rng);
            }
            if k == 0 || (tau == Vector3::zeros() && psi == 0.0) {
                return *g;
            }
            Pose3::from_translation(tau.x, tau.y, tau.z)
                .compose(&about_p0(psi))
                .compose(g)
        })
        .collect()
}

/// Full simulation: frames, detections, submaps, drift and ground truth.
/// A pure function of `(spec, seed)`; frames render in parallel, each from
/// its own noise stream.
pub fn simulate(spec: &WorldSpec, seed: u64) -> Result<Simulation, SimError> {
    spec.validate()?;
    let scene = Scene::new(spec)?;
    let k = spec.camera;
    let gt = ground_truth_poses(spec);
    let recorded = drifted_poses(&gt, &spec.noise, seed);

    let mut keyframes = Vec::with_capacity(gt.len());
    let mut losses = Vec::new();
    let mut segments = spec.loss_segments.iter().enumerate().peekable();
    let mut current: Option<(u32, usize, usize)> = None;
    for (i, rec) in recorded.iter().enumerate() {
        if let Some(&(s, seg)) = segments.peek() {
            if i == seg[0] {
                current = Some((s as u32 + 1, seg[0], seg[1]));
                losses.push(LossEvent {
                    last_keyframe: i as u32 - 1,
                    origin_keyframe: i as u32,
                });
                segments.next();
            }
        }
        if current.is_some_and(|(_, _, b)| i >= b) {
            current = None;
        }
        let (map_id, pose) = match current {
            Some((m, a, _)) => (m, recorded[a].inverse().compose(rec)),
            None => (0, *rec),
        };
        keyframes.push(KeyframeRecord {
            id: i as u32,
            map_id,
            pose,
        });
    }

    let frames: Vec<Frame> = gt
        .par_iter()
        .enumerate()
        .map(|(i, pose)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64 + 1);
            render_frame(
                &scene,
                pose,
                &k,
                spec.color_scale,
                spec.min_detection_px,
                &spec.noise,
                &mut rng,
            )
        })
        .collect();

    let mut depth = BTreeMap::new();
    let mut color = BTreeMap::new();
    let mut detections = BTreeMap::new();
    let mut sources = BTreeMap::new();
    for (i, f) in frames.into_iter().enumerate() {
        let id = i as u32;
        depth.insert(id, f.depth);
        color.insert(id, f.color);
        detections.insert(id, f.detections);
        sources.insert(id, f.sources);
    }
    let dataset = Dataset {
        intrinsics: k,
        keyframes,
        losses,
        depth,
        color,
        detections,
        groundtruth: Some(GroundTruth {
            placards: reference_placards(spec),
            trajectory: gt.iter().enumerate().map(|(i, p)| (i as u32, *p)).collect(),
        }),
    };
    Ok(Simulation { dataset, sources })
}

/// [`simulate`] without the detection bookkeeping.
pub fn simulate_run(spec: &WorldSpec, seed: u64) -> Result<Dataset, SimError> {
    simulate(spec, seed).map(|s| s.dataset)
}
