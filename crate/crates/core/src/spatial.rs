//! Nearest-neighbour index and voxel subsampling for 3D point sets.

use std::collections::HashMap;

use nalgebra::Vector3;

/// Static 3D kd-tree with median splits, built once per target cloud.
///
/// Nodes are stored implicitly: the subtree for `order[lo..hi]` has its split
/// point at `mid = (lo + hi) / 2` on axis `depth % 3`.
#[derive(Debug, Clone)]
pub struct KdTree {
    points: Vec<Vector3<f64>>,
    order: Vec<usize>,
}

impl KdTree {
    pub fn build(points: &[Vector3<f64>]) -> Self {
        let mut order: Vec<usize> = (0..points.len()).collect();
        build_recursive(points, &mut order, 0);
        Self {
            points: points.to_vec(),
            order,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, idx: usize) -> &Vector3<f64> {
        &self.points[idx]
    }

    /// Index of the nearest point and its squared distance.
    pub fn nearest(&self, query: &Vector3<f64>) -> Option<(usize, f64)> {
        if self.points.is_empty() {
            return None;
        }
        let mut best = (usize::MAX, f64::INFINITY);
        self.search(query, 0, self.order.len(), 0, &mut best);
        Some(best)
    }

    fn search(
        &self,
        q: &Vector3<f64>,
        lo: usize,
        hi: usize,
        depth: usize,
        best: &mut (usize, f64),
    ) {
        if lo >= hi {
            return;
        }
        let mid = (lo + hi) / 2;
        let idx = self.order[mid];
        let p = &self.points[idx];
        let d2 = (p - q).norm_squared();
        if d2 < best.1 || (d2 == best.1 && idx < best.0) {
            *best = (idx, d2);
        }
        let axis = depth % 3;
        let diff = q[axis] - p[axis];
        let (near, far) = if diff < 0.0 {
            ((lo, mid), (mid + 1, hi))
        } else {
            ((mid + 1, hi), (lo, mid))
        };
        self.search(q, near.0, near.1, depth + 1, best);
        if diff * diff <= best.1 {
            self.search(q, far.0, far.1, depth + 1, best);
        }
    }
}

fn build_recursive(points: &[Vector3<f64>], order: &mut [usize], depth: usize) {
    if order.len() <= 1 {
        return;
    }
    let axis = depth % 3;
    let mid = order.len() / 2;
    order.select_nth_unstable_by(mid, |&a, &b| {
        points[a][axis].total_cmp(&points[b][axis]).then(a.cmp(&b))
    });
    let (left, right) = order.split_at_mut(mid);
    build_recursive(points, left, depth + 1);
    build_recursive(points, &mut right[1..], depth + 1);
}

/// Integer voxel index of `p` for cubic voxels of edge `size` anchored at
/// the origin (floor division).
pub fn voxel_key(p: &Vector3<f64>, size: f64) -> [i64; 3] {
    [
        (p.x / size).floor() as i64,
        (p.y / size).floor() as i64,
        (p.z / size).floor() as i64,
    ]
}

/// Keeps the first point (in input order) falling into each voxel. The kept
/// points are original samples, not averages, and keep their input order.
pub fn voxel_subsample(points: &[Vector3<f64>], size: f64) -> Vec<Vector3<f64>> {
    let mut seen: HashMap<[i64; 3], ()> = HashMap::with_capacity(points.len());
    let mut out = Vec::new();
    for p in points {
        if seen.insert(voxel_key(p, size), ()).is_none() {
            out.push(*p);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn brute_nearest(points: &[Vector3<f64>], q: &Vector3<f64>) -> f64 {
        points
            .iter()
            .map(|p| (p - q).norm_squared())
            .fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn kdtree_agrees_with_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let pts: Vec<_> = (0..500)
            .map(|_| {
                Vector3::new(
                    rng.random_range(-3.0..3.0),
                    rng.random_range(-3.0..3.0),
                    rng.random_range(-3.0..3.0),
                )
            })
            .collect();
        let tree = KdTree::build(&pts);
        for _ in 0..300 {
            let q = Vector3::new(
                rng.random_range(-4.0..4.0),
                rng.random_range(-4.0..4.0),
                rng.random_range(-4.0..4.0),
            );
            let (idx, d2) = tree.nearest(&q).unwrap();
            assert_eq!(d2, brute_nearest(&pts, &q));
            assert_eq!((pts[idx] - q).norm_squared(), d2);
        }
    }

    #[test]
    fn empty_tree_has_no_neighbour() {
        assert!(KdTree::build(&[]).nearest(&Vector3::zeros()).is_none());
    }

    #[test]
    fn duplicate_points_are_fine() {
        let pts = vec![Vector3::new(1.0, 1.0, 1.0); 10];
        let tree = KdTree::build(&pts);
        let (_, d2) = tree.nearest(&Vector3::new(1.0, 1.0, 2.0)).unwrap();
        assert_eq!(d2, 1.0);
    }

    #[test]
    fn subsample_keeps_first_point_per_voxel() {
        let pts = vec![
            Vector3::new(0.01, 0.01, 0.01),
            Vector3::new(0.02, 0.02, 0.02),
            Vector3::new(0.06, 0.01, 0.01),
            Vector3::new(-0.01, 0.01, 0.01),
        ];
        let out = voxel_subsample(&pts, 0.05);
        assert_eq!(out, vec![pts[0], pts[2], pts[3]]);
    }

    proptest! {
        #[test]
        fn nearest_is_exact(seed in 0u64..1000, n in 1usize..80) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let pts: Vec<_> = (0..n)
                .map(|_| Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                .collect();
            let tree = KdTree::build(&pts);
            let q = Vector3::new(rng.random_range(-1.5..1.5), rng.random_range(-1.5..1.5), rng.random_range(-1.5..1.5));
            prop_assert_eq!(tree.nearest(&q).unwrap().1, brute_nearest(&pts, &q));
        }
    }
}
