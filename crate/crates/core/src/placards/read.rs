use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::label::{validate_label, CanonicalLabel};
use super::plane::{fit_plane, placard_pose, RansacParams};
use super::rectify::rectify_roi;
use super::text::{binarize, sweep_thresholds, LineSegmenter, OcrContext, Transcriber};
use super::{Detection, PlacardError, PlacardObservation};
use crate::geometry::{backproject, CameraIntrinsics, DepthImage, GrayImage, Pose3};

/// Tunables of the per-detection reading chain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReadParams {
    pub ransac: RansacParams,
    /// Fraction of the bbox trimmed from each side before backprojection.
    pub bbox_shrink: f64,
}

impl Default for ReadParams {
    fn default() -> Self {
        Self {
            ransac: RansacParams::default(),
            bbox_shrink: 0.0,
        }
    }
}

impl ReadParams {
    pub fn validate(&self) -> Result<(), String> {
        self.ransac.validate()?;
        if !(0.0..0.5).contains(&self.bbox_shrink) {
            return Err("placards.bbox_shrink must lie in [0, 0.5)".into());
        }
        Ok(())
    }
}

/// Candidate strings for one threshold: every line alone and every run of
/// consecutive lines joined by single spaces.
pub fn line_combinations(lines: &[String]) -> Vec<String> {
    let mut out = Vec::new();
    for i in 0..lines.len() {
        for j in i..lines.len() {
            let joined = lines[i..=j]
                .iter()
                .map(|s| s.trim())
                .collect::<Vec<_>>()
                .join(" ");
            out.push(joined);
        }
    }
    out
}

/// Majority vote over proposals listed in increasing threshold order. Only
/// strings passing validation count; among equally frequent labels the one
/// proposed first (lowest threshold) wins.
pub fn vote<S: AsRef<str>>(proposals: &[S]) -> Option<CanonicalLabel> {
    let mut tally: HashMap<CanonicalLabel, (usize, usize)> = HashMap::new();
    for (order, p) in proposals.iter().enumerate() {
        if let Some(label) = validate_label(p.as_ref()) {
            tally.entry(label).or_insert((0, order)).0 += 1;
        }
    }
    tally
        .into_iter()
        .max_by(|a, b| a.1 .0.cmp(&b.1 .0).then(b.1 .1.cmp(&a.1 .1)))
        .map(|(label, _)| label)
}

/// Backends and camera models shared by every detection of a run.
pub struct PlacardReader<'a> {
    pub k_depth: &'a CameraIntrinsics,
    pub params: &'a ReadParams,
    pub segmenter: &'a dyn LineSegmenter,
    pub ocr: &'a dyn Transcriber,
}

/// Transcribes a rectified placard: segments lines, sweeps thresholds and
/// votes over all line combinations.
pub fn transcribe_placard(
    rectified: &GrayImage,
    segmenter: &dyn LineSegmenter,
    ocr: &dyn Transcriber,
    keyframe_id: u32,
    detection_index: usize,
) -> Option<CanonicalLabel> {
    let lines: Vec<GrayImage> = segmenter
        .segment(rectified)
        .into_iter()
        .map(|r| rectified.crop(r))
        .collect();
    if lines.is_empty() {
        return None;
    }
    let mut proposals = Vec::new();
    for t in sweep_thresholds() {
        let texts: Vec<String> = lines
            .iter()
            .enumerate()
            .map(|(line_index, img)| {
                let ctx = OcrContext {
                    keyframe_id,
                    detection_index,
                    line_index,
                    threshold: t,
                };
                ocr.transcribe(&binarize(img, t), &ctx)
            })
            .collect();
        proposals.extend(line_combinations(&texts));
    }
    vote(&proposals)
}

impl PlacardReader<'_> {
    /// Localizes and reads one detection. `global_pose` is the keyframe's
    /// `global_from_camera`. Grazing views keep their pose with an empty
    /// label; geometric failures drop the observation.
    pub fn read(
        &self,
        keyframe_id: u32,
        detection_index: usize,
        det: &Detection,
        depth: &DepthImage,
        color: &GrayImage,
        global_pose: &Pose3,
    ) -> Result<PlacardObservation, PlacardError> {
        let k = self.k_depth;
        let roi = det.bbox.shrunk(self.params.bbox_shrink);
        let cloud = backproject(depth, k, Some(roi))?;
        let patch = fit_plane(&cloud, &self.params.ransac)?;
        let pose = placard_pose(&patch, global_pose)?;

        let scale = color.width / k.width.max(1);
        if scale == 0 || color.width != k.width * scale || color.height != k.height * scale {
            return Err(PlacardError::ColorSize {
                width: color.width,
                height: color.height,
            });
        }
        let k_color = k.scaled(scale);
        let label = match rectify_roi(color, det.bbox.scaled(scale), &patch, &k_color) {
            Ok(rectified) => transcribe_placard(
                &rectified,
                self.segmenter,
                self.ocr,
                keyframe_id,
                detection_index,
            ),
            Err(PlacardError::GrazingAngle { .. }) => None,
            Err(e) => return Err(e),
        };
        Ok(PlacardObservation {
            keyframe_id,
            detection_index,
            position: pose.position.into(),
            theta: pose.theta,
            label: label.map(|l| l.text).unwrap_or_default(),
            confidence: det.confidence,
            on_wall: None,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn combinations_of_three_lines() {
        let lines = vec!["A".to_string(), "B".into(), "C".into()];
        assert_eq!(
            line_combinations(&lines),
            vec!["A", "A B", "A B C", "B", "B C", "C"]
        );
        assert!(line_combinations(&[]).is_empty());
    }

    #[test]
    fn vote_counts_canonical_forms() {
        let label = vote(&["3112", "3.112", "3.712", "", "garbage"]).unwrap();
        assert_eq!(label.text, "3.112");
    }

    #[test]
    fn vote_tie_goes_to_first_proposal() {
        assert_eq!(vote(&["MEN", "WOMEN", "WOMEN", "MEN"]).unwrap().text, "MEN");
        assert_eq!(vote(&["x", "WOMEN", "MEN"]).unwrap().text, "WOMEN");
    }

    #[test]
    fn vote_without_valid_proposals_is_none() {
        assert!(vote(&["", "GENDER", "31.12"]).is_none());
        assert!(vote::<&str>(&[]).is_none());
    }

    #[test]
    fn params_validation() {
        assert!(ReadParams::default().validate().is_ok());
        let p = ReadParams {
            bbox_shrink: 0.6,
            ..Default::default()
        };
        assert!(p.validate().is_err());
    }
}
