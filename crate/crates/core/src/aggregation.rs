//! Wall filtering, clustering and label voting over placard observations.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::placards::PlacardObservation;
use crate::reconstruction::Grid2D;
use crate::wrap_angle;

/// Grouping radius: observations closer than one placard radius belong to
/// the same placard.
pub const PLACARD_RADIUS: f64 = 0.151;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AggregationParams {
    pub cluster_radius: f64,
    pub max_wall_dist: f64,
}

impl Default for AggregationParams {
    fn default() -> Self {
        Self {
            cluster_radius: PLACARD_RADIUS,
            max_wall_dist: 0.10,
        }
    }
}

impl AggregationParams {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.cluster_radius > 0.0) {
            return Err("aggregation.cluster_radius must be positive".into());
        }
        if !(self.max_wall_dist >= 0.0) {
            return Err("aggregation.max_wall_dist must be non-negative".into());
        }
        Ok(())
    }
}

/// Aggregated placard.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlacardLandmark {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub theta_rad: f64,
    pub label: String,
    pub support: usize,
    /// `(keyframe_id, detection_index)` of every member observation.
    #[serde(skip)]
    pub members: Vec<(u32, usize)>,
}

/// True when an occupied map cell lies within `max_wall_dist` of the
/// observation's (x, y).
pub fn wall_filter(obs: &PlacardObservation, map: &Grid2D, max_wall_dist: f64) -> bool {
    map.nearest_occupied(obs.position[0], obs.position[1], max_wall_dist)
        .is_some()
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

/// Single-linkage groups of 3D points: two points share a group when a
/// chain of pairwise distances `≤ radius` connects them. Groups are listed
/// by their smallest member index, members ascending.
pub fn cluster_positions(points: &[[f64; 3]], radius: f64) -> Vec<Vec<usize>> {
    let n = points.len();
    let mut parent: Vec<usize> = (0..n).collect();
    let r2 = radius * radius;
    for i in 0..n {
        for j in i + 1..n {
            let d2: f64 = (0..3).map(|a| (points[i][a] - points[j][a]).powi(2)).sum();
            if d2 <= r2 {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..n {
        let root = find(&mut parent, i);
        groups.entry(root).or_default().push(i);
    }
    groups.into_values().collect()
}

pub fn cluster_observations(obs: &[PlacardObservation], radius: f64) -> Vec<Vec<usize>> {
    let points: Vec<[f64; 3]> = obs.iter().map(|o| o.position).collect();
    cluster_positions(&points, radius)
}

/// Mean of unit vectors at the given headings, wrapped to `(-π, π]`.
pub fn circular_mean(angles: &[f64]) -> f64 {
    let (s, c) = angles
        .iter()
        .fold((0.0, 0.0), |(s, c), a| (s + a.sin(), c + a.cos()));
    wrap_angle(s.atan2(c))
}

/// Most frequent non-empty label; ties go to the lexicographically
/// smallest. Empty when every label is empty.
pub fn majority_label<'a>(labels: impl IntoIterator<Item = &'a str>) -> String {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for l in labels {
        if !l.is_empty() {
            *counts.entry(l).or_insert(0) += 1;
        }
    }
    // BTreeMap order makes the first maximum the smallest string
    let mut best: Option<(&str, usize)> = None;
    for (l, n) in counts {
        if best.is_none_or(|(_, m)| n > m) {
            best = Some((l, n));
        }
    }
    best.map(|(l, _)| l.to_string()).unwrap_or_default()
}

/// Mean position, circular-mean heading and majority label of a non-empty
/// group.
pub fn aggregate_group(group: &[&PlacardObservation]) -> PlacardLandmark {
    assert!(!group.is_empty(), "cannot aggregate an empty group");
    let n = group.len() as f64;
    let mut mean = [0.0; 3];
    for o in group {
        for a in 0..3 {
            mean[a] += o.position[a];
        }
    }
    let thetas: Vec<f64> = group.iter().map(|o| o.theta).collect();
    PlacardLandmark {
        x: mean[0] / n,
        y: mean[1] / n,
        z: mean[2] / n,
        theta_rad: circular_mean(&thetas),
        label: majority_label(group.iter().map(|o| o.label.as_str())),
        support: group.len(),
        members: group
            .iter()
            .map(|o| (o.keyframe_id, o.detection_index))
            .collect(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Aggregation {
    pub landmarks: Vec<PlacardLandmark>,
    /// Observations rejected by the wall test.
    pub discarded: Vec<PlacardObservation>,
}

/// Wall-filters, clusters and aggregates a batch of observations.
pub fn aggregate(
    obs: &[PlacardObservation],
    map: &Grid2D,
    params: &AggregationParams,
) -> Aggregation {
    let mut kept = Vec::new();
    let mut discarded = Vec::new();
    for o in obs {
        let mut o = o.clone();
        let on_wall = wall_filter(&o, map, params.max_wall_dist);
        o.on_wall = Some(on_wall);
        if on_wall {
            kept.push(o);
        } else {
            discarded.push(o);
        }
    }
    let landmarks = cluster_observations(&kept, params.cluster_radius)
        .into_iter()
        .map(|g| aggregate_group(&g.iter().map(|&i| &kept[i]).collect::<Vec<_>>()))
        .collect();
    Aggregation {
        landmarks,
        discarded,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reconstruction::OccupancyGrid3D;
    use nalgebra::Vector3;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn obs(x: f64, y: f64, theta: f64, label: &str) -> PlacardObservation {
        PlacardObservation {
            keyframe_id: 0,
            detection_index: 0,
            position: [x, y, 1.0],
            theta,
            label: label.into(),
            confidence: 0.95,
            on_wall: None,
        }
    }

    fn wall_map() -> Grid2D {
        // wall face along x = 2.0, y in [0, 3]
        let mut g = OccupancyGrid3D::new(0.03, Vector3::zeros());
        for i in 0..100 {
            for k in 0..10 {
                g.insert_point(&Vector3::new(2.0, i as f64 * 0.03, 0.5 + k as f64 * 0.1));
            }
        }
        g.project_2d(0.2, 1.8, 3)
    }

    #[test]
    fn wall_filter_near_and_far() {
        let m = wall_map();
        assert!(wall_filter(&obs(1.96, 1.5, PI, ""), &m, 0.1));
        assert!(!wall_filter(&obs(1.0, 1.5, PI, ""), &m, 0.1));
    }

    #[test]
    fn spurious_mid_air_observation_is_discarded() {
        let m = wall_map();
        let batch = vec![obs(1.97, 1.0, PI, "3.112"), obs(1.2, 1.0, PI, "3.112")];
        let out = aggregate(&batch, &m, &AggregationParams::default());
        assert_eq!(out.landmarks.len(), 1);
        assert_eq!(out.discarded.len(), 1);
        assert_eq!(out.discarded[0].position[0], 1.2);
        assert_eq!(out.discarded[0].on_wall, Some(false));
    }

    #[test]
    fn radius_boundary() {
        let near = cluster_positions(&[[0.0, 0.0, 0.0], [0.10, 0.0, 0.0]], PLACARD_RADIUS);
        assert_eq!(near, vec![vec![0, 1]]);
        let far = cluster_positions(&[[0.0, 0.0, 0.0], [0.20, 0.0, 0.0]], PLACARD_RADIUS);
        assert_eq!(far, vec![vec![0], vec![1]]);
    }

    #[test]
    fn chains_link() {
        let g = cluster_positions(
            &[[0.0, 0.0, 0.0], [0.12, 0.0, 0.0], [0.24, 0.0, 0.0]],
            PLACARD_RADIUS,
        );
        assert_eq!(g, vec![vec![0, 1, 2]]);
    }

    #[test]
    fn single_observation_landmark() {
        let o = obs(1.0, 2.0, 0.3, "MEN");
        let l = aggregate_group(&[&o]);
        assert_eq!((l.x, l.y, l.z, l.theta_rad), (1.0, 2.0, 1.0, 0.3));
        assert_eq!((l.label.as_str(), l.support), ("MEN", 1));
    }

    #[test]
    fn circular_mean_wraps() {
        let m = circular_mean(&[179f64.to_radians(), -179f64.to_radians()]);
        assert!((m.abs() - PI).abs() < 1e-9, "{m}");
    }

    #[test]
    fn label_vote() {
        assert_eq!(majority_label(["3.112", "3.112", "3.712", ""]), "3.112");
        assert_eq!(majority_label(["", ""]), "");
        assert_eq!(majority_label(["WOMEN", "MEN"]), "MEN");
        assert_eq!(majority_label(["", "", "STAIR"]), "STAIR");
    }

    fn points() -> impl Strategy<Value = Vec<[f64; 3]>> {
        prop::collection::vec(
            (0.0..1.5f64, 0.0..1.5f64, 0.0..0.3f64).prop_map(|(x, y, z)| [x, y, z]),
            1..40,
        )
    }

    fn partition(groups: Vec<Vec<usize>>, order: &[usize]) -> Vec<Vec<usize>> {
        let mut p: Vec<Vec<usize>> = groups
            .into_iter()
            .map(|g| {
                let mut g: Vec<usize> = g.into_iter().map(|i| order[i]).collect();
                g.sort();
                g
            })
            .collect();
        p.sort();
        p
    }

    proptest! {
        #[test]
        fn clustering_is_permutation_invariant(pts in points(), seed in any::<u64>()) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let mut order: Vec<usize> = (0..pts.len()).collect();
            order.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let shuffled: Vec<[f64; 3]> = order.iter().map(|&i| pts[i]).collect();
            let identity: Vec<usize> = (0..pts.len()).collect();
            let a = partition(cluster_positions(&pts, PLACARD_RADIUS), &identity);
            let b = partition(cluster_positions(&shuffled, PLACARD_RADIUS), &order);
            prop_assert_eq!(a, b);
        }

        #[test]
        fn every_point_in_exactly_one_group(pts in points()) {
            let groups = cluster_positions(&pts, PLACARD_RADIUS);
            let mut seen: Vec<usize> = groups.concat();
            seen.sort();
            prop_assert_eq!(seen, (0..pts.len()).collect::<Vec<_>>());
        }

        #[test]
        fn landmark_inside_member_bounds(pts in points()) {
            let batch: Vec<PlacardObservation> =
                pts.iter().map(|p| obs(p[0], p[1], 0.0, "")).collect();
            for g in cluster_observations(&batch, PLACARD_RADIUS) {
                let members: Vec<&PlacardObservation> = g.iter().map(|&i| &batch[i]).collect();
                let l = aggregate_group(&members);
                // the mean is a convex combination; test against the bounding box
                for (a, v) in [(0, l.x), (1, l.y)] {
                    let lo = members.iter().map(|o| o.position[a]).fold(f64::INFINITY, f64::min);
                    let hi = members.iter().map(|o| o.position[a]).fold(f64::NEG_INFINITY, f64::max);
                    prop_assert!(v >= lo - 1e-12 && v <= hi + 1e-12);
                }
            }
        }
    }
}
