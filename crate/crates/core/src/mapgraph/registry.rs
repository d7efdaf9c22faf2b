use std::collections::{BTreeMap, BTreeSet};

use log::{info, warn};
use serde::Serialize;

use super::icp::{icp_align, IcpParams};
use super::MapError;
use crate::geometry::{backproject, CameraIntrinsics, DepthImage, Pose3};
use crate::placards::Detection;

/// One localized RGB-D sample. `pose` is `submap_from_camera`.
#[derive(Debug, Clone)]
pub struct Keyframe {
    pub id: u32,
    pub map_id: u32,
    pub pose: Pose3,
    pub detections: Vec<Detection>,
}

/// Tracking loss: `last_keyframe` was the final keyframe localized in the
/// old submap, `origin_keyframe` starts the new one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct LossEvent {
    pub last_keyframe: u32,
    pub origin_keyframe: u32,
}

/// Source of depth frames by keyframe id.
pub trait FrameStore {
    fn depth(&self, keyframe_id: u32) -> Result<DepthImage, MapError>;
}

impl FrameStore for BTreeMap<u32, DepthImage> {
    fn depth(&self, keyframe_id: u32) -> Result<DepthImage, MapError> {
        self.get(&keyframe_id)
            .cloned()
            .ok_or(MapError::MissingFrame(keyframe_id))
    }
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum MergeOutcome {
    Merged { rms_residual: f64, iterations: u32 },
    Unmerged { reason: String },
}

#[derive(Debug, Clone, Serialize)]
pub struct MergeRecord {
    pub event: LossEvent,
    pub old_map: u32,
    pub new_map: u32,
    #[serde(flatten)]
    pub outcome: MergeOutcome,
}

/// How `resolve_losses` estimates the camera motion across a loss.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MergeStrategy {
    /// Align the two keyframes' full depth clouds with ICP.
    Icp { params: IcpParams, max_rms: f64 },
    /// Assume the camera did not move across the loss. Baseline for
    /// measuring what the ICP alignment buys.
    AssumeStationary,
}

/// Submaps created by tracking losses and their anchors in the global frame
/// (the frame of submap 0).
#[derive(Debug, Clone)]
pub struct MapRegistry {
    submaps: BTreeMap<u32, Vec<Keyframe>>,
    anchors: BTreeMap<u32, Pose3>,
    loss_events: Vec<LossEvent>,
    keyframe_map: BTreeMap<u32, (u32, usize)>,
}

impl MapRegistry {
    pub fn new(keyframes: Vec<Keyframe>, loss_events: Vec<LossEvent>) -> Result<Self, MapError> {
        let mut submaps: BTreeMap<u32, Vec<Keyframe>> = BTreeMap::new();
        let mut keyframe_map = BTreeMap::new();
        for kf in keyframes {
            let list = submaps.entry(kf.map_id).or_default();
            if keyframe_map
                .insert(kf.id, (kf.map_id, list.len()))
                .is_some()
            {
                return Err(MapError::DuplicateKeyframe(kf.id));
            }
            list.push(kf);
        }
        let mut anchors = BTreeMap::new();
        if !submaps.is_empty() {
            if !submaps.contains_key(&0) {
                return Err(MapError::MissingRootMap);
            }
            anchors.insert(0, Pose3::identity());
        }
        for ev in &loss_events {
            for id in [ev.last_keyframe, ev.origin_keyframe] {
                if !keyframe_map.contains_key(&id) {
                    return Err(MapError::UnknownKeyframe(id));
                }
            }
        }
        Ok(Self {
            submaps,
            anchors,
            loss_events,
            keyframe_map,
        })
    }

    pub fn submap_ids(&self) -> impl Iterator<Item = u32> + '_ {
        self.submaps.keys().copied()
    }

    pub fn submap(&self, map_id: u32) -> Option<&[Keyframe]> {
        self.submaps.get(&map_id).map(|v| v.as_slice())
    }

    pub fn keyframe(&self, id: u32) -> Option<&Keyframe> {
        let (map, idx) = self.keyframe_map.get(&id)?;
        self.submaps.get(map).map(|v| &v[*idx])
    }

    pub fn keyframes(&self) -> impl Iterator<Item = &Keyframe> {
        self.keyframe_map
            .values()
            .map(|(map, idx)| &self.submaps[map][*idx])
    }

    pub fn loss_events(&self) -> &[LossEvent] {
        &self.loss_events
    }

    pub fn anchor(&self, map_id: u32) -> Option<&Pose3> {
        self.anchors.get(&map_id)
    }

    pub fn unanchored(&self) -> Vec<u32> {
        self.submaps
            .keys()
            .filter(|id| !self.anchors.contains_key(id))
            .copied()
            .collect()
    }

    /// `global_from_camera` of a keyframe whose submap is anchored.
    pub fn global_pose(&self, keyframe_id: u32) -> Option<Pose3> {
        let kf = self.keyframe(keyframe_id)?;
        let anchor = self.anchors.get(&kf.map_id)?;
        Some(anchor.compose(&kf.pose))
    }

    /// Global poses of all anchored keyframes, by ascending keyframe id.
    pub fn global_trajectory(&self) -> Vec<(u32, Pose3)> {
        self.keyframe_map
            .keys()
            .filter_map(|&id| self.global_pose(id).map(|p| (id, p)))
            .collect()
    }

    /// Anchors `new_map` given `alignment = old_submap_from_new_submap`.
    /// Local keyframe poses are never touched.
    pub fn merge_maps(
        &mut self,
        old_map: u32,
        new_map: u32,
        alignment: &Pose3,
    ) -> Result<(), MapError> {
        let old_anchor = *self
            .anchors
            .get(&old_map)
            .ok_or(MapError::UnanchoredOldMap(old_map))?;
        if !self.submaps.contains_key(&new_map) {
            return Err(MapError::UnknownMap(new_map));
        }
        self.anchors.insert(new_map, old_anchor.compose(alignment));
        Ok(())
    }

    /// Processes every loss event in order: estimates the camera motion from
    /// the last old-map keyframe to the new map's origin keyframe and merges
    /// the new map. Failed events leave their submap unanchored and are
    /// reported; later events are still processed.
    pub fn resolve_losses(
        &mut self,
        store: &dyn FrameStore,
        k: &CameraIntrinsics,
        strategy: &MergeStrategy,
    ) -> Vec<MergeRecord> {
        let events = self.loss_events.clone();
        let mut records = Vec::with_capacity(events.len());
        let mut merged: BTreeSet<u32> = BTreeSet::new();
        for ev in events {
            let last = self.keyframe(ev.last_keyframe).cloned().expect("validated");
            let origin = self
                .keyframe(ev.origin_keyframe)
                .cloned()
                .expect("validated");
            let (old_map, new_map) = (last.map_id, origin.map_id);
            let outcome = match self.merge_event(&last, &origin, store, k, strategy) {
                Ok(outcome) => {
                    merged.insert(new_map);
                    info!(
                        "merged submap {new_map} into {old_map} across keyframes {} -> {}",
                        ev.last_keyframe, ev.origin_keyframe
                    );
                    outcome
                }
                Err(e) => {
                    warn!(
                        "loss {} -> {} left unmerged: {e}",
                        ev.last_keyframe, ev.origin_keyframe
                    );
                    MergeOutcome::Unmerged {
                        reason: e.to_string(),
                    }
                }
            };
            records.push(MergeRecord {
                event: ev,
                old_map,
                new_map,
                outcome,
            });
        }
        records
    }

    fn merge_event(
        &mut self,
        last: &Keyframe,
        origin: &Keyframe,
        store: &dyn FrameStore,
        k: &CameraIntrinsics,
        strategy: &MergeStrategy,
    ) -> Result<MergeOutcome, MapError> {
        if last.map_id == origin.map_id {
            return Err(MapError::SameMap(last.map_id));
        }
        if !self.anchors.contains_key(&last.map_id) {
            return Err(MapError::UnanchoredOldMap(last.map_id));
        }
        let (camera_motion, outcome) = match strategy {
            MergeStrategy::AssumeStationary => (
                Pose3::identity(),
                MergeOutcome::Merged {
                    rms_residual: f64::NAN,
                    iterations: 0,
                },
            ),
            MergeStrategy::Icp { params, max_rms } => {
                let target = backproject(&store.depth(last.id)?, k, None)?;
                let source = backproject(&store.depth(origin.id)?, k, None)?;
                let result = icp_align(&source, &target, &Pose3::identity(), params)?;
                if result.rms_residual > *max_rms {
                    return Err(MapError::PoorAlignment {
                        rms: result.rms_residual,
                        max: *max_rms,
                    });
                }
                (
                    result.pose,
                    MergeOutcome::Merged {
                        rms_residual: result.rms_residual,
                        iterations: result.iterations,
                    },
                )
            }
        };
        // old_submap <- cam_last <- cam_origin <- new_submap
        let alignment = last
            .pose
            .compose(&camera_motion)
            .compose(&origin.pose.inverse());
        self.merge_maps(last.map_id, origin.map_id, &alignment)?;
        Ok(outcome)
    }
}
