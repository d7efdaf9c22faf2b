//! Hit-count voxel reconstruction and its projection to a 2D map.
//!
//! Every valid depth pixel of every keyframe lands in a voxel whose hit
//! count is incremented; there is no free-space carving. The 2D map counts,
//! per (x, y) column, the occupied voxels between a floor cut and a ceiling
//! cut.

use std::collections::HashMap;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::geometry::{backproject, CameraIntrinsics, DepthImage, Pose3};

/// Replaces the translation's z with `z_fixed`; the rotation is kept.
pub fn correct_vertical_drift(pose: &Pose3, z_fixed: f64) -> Pose3 {
    let mut out = *pose;
    out.translation.z = z_fixed;
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReconstructionParams {
    pub resolution: f64,
    /// Floor and ceiling cuts of the 2D projection, metres.
    pub z_min: f64,
    pub z_max: f64,
    pub min_column_hits: u32,
    /// Height every keyframe is pinned to before integration.
    pub z_fixed: f64,
}

impl Default for ReconstructionParams {
    fn default() -> Self {
        Self {
            resolution: 0.03,
            z_min: 0.2,
            z_max: 1.8,
            min_column_hits: 3,
            z_fixed: 1.0,
        }
    }
}

impl ReconstructionParams {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.resolution > 0.0) {
            return Err("reconstruction.resolution must be positive".into());
        }
        if !(self.z_min < self.z_max) {
            return Err("reconstruction.z_min must be below z_max".into());
        }
        if self.min_column_hits == 0 {
            return Err("reconstruction.min_column_hits must be at least 1".into());
        }
        if !self.z_fixed.is_finite() {
            return Err("reconstruction.z_fixed must be finite".into());
        }
        Ok(())
    }
}

/// Sparse voxel grid with per-voxel hit counts.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyGrid3D {
    resolution: f64,
    origin: Vector3<f64>,
    voxels: HashMap<[i64; 3], u32>,
}

impl OccupancyGrid3D {
    pub fn new(resolution: f64, origin: Vector3<f64>) -> Self {
        assert!(resolution > 0.0, "voxel resolution must be positive");
        Self {
            resolution,
            origin,
            voxels: HashMap::new(),
        }
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn origin(&self) -> Vector3<f64> {
        self.origin
    }

    pub fn voxel_index(&self, p: &Vector3<f64>) -> [i64; 3] {
        let d = (p - self.origin) / self.resolution;
        [d.x.floor() as i64, d.y.floor() as i64, d.z.floor() as i64]
    }

    pub fn voxel_center(&self, idx: [i64; 3]) -> Vector3<f64> {
        self.origin
            + Vector3::new(
                idx[0] as f64 + 0.5,
                idx[1] as f64 + 0.5,
                idx[2] as f64 + 0.5,
            ) * self.resolution
    }

    pub fn insert_point(&mut self, p: &Vector3<f64>) {
        *self.voxels.entry(self.voxel_index(p)).or_insert(0) += 1;
    }

    pub fn hits(&self, idx: [i64; 3]) -> u32 {
        self.voxels.get(&idx).copied().unwrap_or(0)
    }

    pub fn len(&self) -> usize {
        self.voxels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.voxels.is_empty()
    }

    /// Occupied voxels and their hit counts in index order.
    pub fn occupied(&self) -> Vec<([i64; 3], u32)> {
        let mut v: Vec<_> = self.voxels.iter().map(|(k, n)| (*k, *n)).collect();
        v.sort_unstable();
        v
    }

    /// Adds every valid depth pixel of a keyframe seen from
    /// `global_from_camera`. Frames without valid pixels change nothing.
    pub fn integrate_keyframe(
        &mut self,
        global_from_camera: &Pose3,
        depth: &DepthImage,
        k: &CameraIntrinsics,
    ) {
        let Ok(cloud) = backproject(depth, k, None) else {
            return;
        };
        for p in &cloud.points {
            self.insert_point(&global_from_camera.transform_point(p));
        }
    }

    /// Adds another grid's counts. Both grids must share resolution and
    /// origin.
    pub fn merge(&mut self, other: &OccupancyGrid3D) {
        assert_eq!(self.resolution, other.resolution);
        assert_eq!(self.origin, other.origin);
        for (k, n) in &other.voxels {
            *self.voxels.entry(*k).or_insert(0) += n;
        }
    }

    /// Projects voxel columns onto the xy plane. A cell is occupied when at
    /// least `min_column_hits` voxels of its column have centres within
    /// `[z_min, z_max]`, free when its column holds voxels but too few in
    /// the slab, and unknown otherwise. The grid spans every observed
    /// column.
    pub fn project_2d(&self, z_min: f64, z_max: f64, min_column_hits: u32) -> Grid2D {
        let mut columns: HashMap<[i64; 2], u32> = HashMap::new();
        for idx in self.voxels.keys() {
            let z = self.voxel_center(*idx).z;
            let slot = columns.entry([idx[0], idx[1]]).or_insert(0);
            if z >= z_min && z <= z_max {
                *slot += 1;
            }
        }
        if columns.is_empty() {
            return Grid2D {
                resolution: self.resolution,
                origin_x: self.origin.x,
                origin_y: self.origin.y,
                width: 0,
                height: 0,
                cells: Vec::new(),
            };
        }
        let (mut x0, mut y0, mut x1, mut y1) = (i64::MAX, i64::MAX, i64::MIN, i64::MIN);
        for c in columns.keys() {
            x0 = x0.min(c[0]);
            y0 = y0.min(c[1]);
            x1 = x1.max(c[0]);
            y1 = y1.max(c[1]);
        }
        let width = (x1 - x0 + 1) as usize;
        let height = (y1 - y0 + 1) as usize;
        let mut cells = vec![Cell::Unknown; width * height];
        for (c, n) in columns {
            let i = (c[1] - y0) as usize * width + (c[0] - x0) as usize;
            cells[i] = if n >= min_column_hits {
                Cell::Occupied
            } else {
                Cell::Free
            };
        }
        Grid2D {
            resolution: self.resolution,
            origin_x: self.origin.x + x0 as f64 * self.resolution,
            origin_y: self.origin.y + y0 as f64 * self.resolution,
            width,
            height,
            cells,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Cell {
    Unknown,
    Free,
    Occupied,
}

impl Cell {
    /// Grey level in exported map images.
    pub fn pgm_value(self) -> u8 {
        match self {
            Cell::Occupied => 0,
            Cell::Unknown => 205,
            Cell::Free => 254,
        }
    }

    pub fn from_pgm_value(v: u8) -> Cell {
        match v {
            0..=100 => Cell::Occupied,
            230..=255 => Cell::Free,
            _ => Cell::Unknown,
        }
    }
}

/// Map image placement: cell (0, 0) has its lower-left corner at
/// (`origin_x`, `origin_y`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapMeta {
    pub resolution: f64,
    pub origin_x: f64,
    pub origin_y: f64,
}

/// 2D map; row 0 is the southernmost row (smallest y).
#[derive(Debug, Clone, PartialEq)]
pub struct Grid2D {
    pub resolution: f64,
    pub origin_x: f64,
    pub origin_y: f64,
    pub width: usize,
    pub height: usize,
    pub cells: Vec<Cell>,
}

impl Grid2D {
    pub fn meta(&self) -> MapMeta {
        MapMeta {
            resolution: self.resolution,
            origin_x: self.origin_x,
            origin_y: self.origin_y,
        }
    }

    pub fn get(&self, col: i64, row: i64) -> Cell {
        if col < 0 || row < 0 || col >= self.width as i64 || row >= self.height as i64 {
            return Cell::Unknown;
        }
        self.cells[row as usize * self.width + col as usize]
    }

    /// Column and row containing a map point (possibly outside the grid).
    pub fn cell_of(&self, x: f64, y: f64) -> (i64, i64) {
        (
            ((x - self.origin_x) / self.resolution).floor() as i64,
            ((y - self.origin_y) / self.resolution).floor() as i64,
        )
    }

    pub fn at(&self, x: f64, y: f64) -> Cell {
        let (c, r) = self.cell_of(x, y);
        self.get(c, r)
    }

    pub fn cell_center(&self, col: i64, row: i64) -> (f64, f64) {
        (
            self.origin_x + (col as f64 + 0.5) * self.resolution,
            self.origin_y + (row as f64 + 0.5) * self.resolution,
        )
    }

    pub fn count(&self, cell: Cell) -> usize {
        self.cells.iter().filter(|&&c| c == cell).count()
    }

    /// Shortest distance from (x, y) to the square of any occupied cell,
    /// searched up to `max_dist`.
    pub fn nearest_occupied(&self, x: f64, y: f64, max_dist: f64) -> Option<f64> {
        let (c0, r0) = self.cell_of(x, y);
        let reach = (max_dist / self.resolution).ceil() as i64 + 1;
        let mut best: Option<f64> = None;
        for r in r0 - reach..=r0 + reach {
            for c in c0 - reach..=c0 + reach {
                if self.get(c, r) != Cell::Occupied {
                    continue;
                }
                let lx = self.origin_x + c as f64 * self.resolution;
                let ly = self.origin_y + r as f64 * self.resolution;
                let dx = (lx - x).max(0.0).max(x - (lx + self.resolution));
                let dy = (ly - y).max(0.0).max(y - (ly + self.resolution));
                let d = dx.hypot(dy);
                if d <= max_dist && best.is_none_or(|b| d < b) {
                    best = Some(d);
                }
            }
        }
        best
    }

    /// Rebuilds a grid from an exported image (row 0 = north) and its
    /// placement.
    pub fn from_image(meta: &MapMeta, width: usize, height: usize, pixels: &[u8]) -> Grid2D {
        let mut cells = vec![Cell::Unknown; width * height];
        for row in 0..height {
            let img_row = height - 1 - row;
            for col in 0..width {
                cells[row * width + col] = Cell::from_pgm_value(pixels[img_row * width + col]);
            }
        }
        Grid2D {
            resolution: meta.resolution,
            origin_x: meta.origin_x,
            origin_y: meta.origin_y,
            width,
            height,
            cells,
        }
    }

    /// Grey levels with north up (image row 0 is the largest y).
    pub fn to_image(&self) -> Vec<u8> {
        let mut px = Vec::with_capacity(self.cells.len());
        for img_row in 0..self.height {
            let row = self.height - 1 - img_row;
            px.extend(
                self.cells[row * self.width..(row + 1) * self.width]
                    .iter()
                    .map(|c| c.pgm_value()),
            );
        }
        px
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn vertical_drift_correction() {
        let p = Pose3::new(
            nalgebra::UnitQuaternion::from_euler_angles(0.1, 0.2, 0.3),
            Vector3::new(1.0, 2.0, 0.3),
        );
        let q = correct_vertical_drift(&p, 0.5);
        assert_eq!(q.translation, Vector3::new(1.0, 2.0, 0.5));
        assert_eq!(q.rotation, p.rotation);
        assert_eq!(correct_vertical_drift(&q, 0.5), q);
        let zs: Vec<f64> = (0..10)
            .map(|i| {
                correct_vertical_drift(&Pose3::from_translation(0.0, 0.0, i as f64 * 0.1), 1.2)
                    .translation
                    .z
            })
            .collect();
        assert!(zs.iter().all(|&z| z == 1.2));
    }

    #[test]
    fn voxel_index_floor_division() {
        let g = OccupancyGrid3D::new(0.03, Vector3::zeros());
        assert_eq!(g.voxel_index(&Vector3::new(0.10, 0.10, 1.00)), [3, 3, 33]);
        assert_eq!(g.voxel_index(&Vector3::new(-0.01, 0.0, 0.0)), [-1, 0, 0]);
    }

    #[test]
    fn integrating_twice_doubles_counts() {
        let k = CameraIntrinsics::default();
        let mut depth = DepthImage::new(k.width, k.height);
        for v in 0..k.height {
            for u in 0..k.width {
                depth.set(u, v, 1500 + (u as u16 % 7));
            }
        }
        let pose = Pose3::from_translation(0.3, -0.2, 1.0);
        let mut once = OccupancyGrid3D::new(0.03, Vector3::zeros());
        once.integrate_keyframe(&pose, &depth, &k);
        let mut twice = once.clone();
        twice.integrate_keyframe(&pose, &depth, &k);
        let a = once.occupied();
        let b = twice.occupied();
        assert_eq!(a.len(), b.len());
        for ((ia, na), (ib, nb)) in a.iter().zip(&b) {
            assert_eq!(ia, ib);
            assert_eq!(2 * na, *nb);
        }
        let mut empty = OccupancyGrid3D::new(0.03, Vector3::zeros());
        empty.integrate_keyframe(&pose, &DepthImage::new(k.width, k.height), &k);
        assert!(empty.is_empty());
    }

    #[test]
    fn empty_grid_projects_to_unknown() {
        let g = OccupancyGrid3D::new(0.03, Vector3::zeros()).project_2d(0.2, 1.8, 3);
        assert_eq!(g.count(Cell::Occupied) + g.count(Cell::Free), 0);
        assert_eq!(g.at(0.5, 0.5), Cell::Unknown);
    }

    #[test]
    fn single_voxel_in_slab() {
        let mut g = OccupancyGrid3D::new(0.03, Vector3::zeros());
        g.insert_point(&Vector3::new(1.0, 2.0, 1.0));
        let m = g.project_2d(0.2, 1.8, 1);
        assert_eq!(m.count(Cell::Occupied), 1);
        assert_eq!(m.at(1.0, 2.0), Cell::Occupied);
        // outside the slab the column is seen but not occupied
        let mut f = OccupancyGrid3D::new(0.03, Vector3::zeros());
        f.insert_point(&Vector3::new(1.0, 2.0, 0.01));
        let m = f.project_2d(0.2, 1.8, 1);
        assert_eq!(m.count(Cell::Occupied), 0);
        assert_eq!(m.at(1.0, 2.0), Cell::Free);
    }

    #[test]
    fn image_round_trip_is_north_up() {
        let mut g = OccupancyGrid3D::new(0.1, Vector3::zeros());
        for z in 0..5 {
            g.insert_point(&Vector3::new(0.05, 0.95, 0.5 + z as f64 * 0.1));
        }
        g.insert_point(&Vector3::new(0.95, 0.05, 0.0));
        let m = g.project_2d(0.2, 1.8, 3);
        assert_eq!((m.width, m.height), (10, 10));
        let img = m.to_image();
        // top-left pixel is the north-west occupied column
        assert_eq!(img[0], 0);
        assert_eq!(img[99], 254);
        assert_eq!(img[9], 205);
        let back = Grid2D::from_image(&m.meta(), m.width, m.height, &img);
        assert_eq!(back, m);
    }

    #[test]
    fn nearest_occupied_uses_cell_extent() {
        let mut g = OccupancyGrid3D::new(0.03, Vector3::zeros());
        for z in 0..5 {
            g.insert_point(&Vector3::new(2.0, 1.0, 0.5 + z as f64 * 0.03));
        }
        let m = g.project_2d(0.2, 1.8, 3);
        // the occupied column spans x in [1.98, 2.01)
        let d = m.nearest_occupied(1.96, 1.0, 0.1).unwrap();
        assert!((d - 0.02).abs() < 1e-9, "{d}");
        assert!(m.nearest_occupied(1.0, 1.0, 0.1).is_none());
    }

    fn random_points() -> impl Strategy<Value = Vec<(f64, f64, f64)>> {
        prop::collection::vec((-3.0..3.0f64, -3.0..3.0f64, 0.0..2.5f64), 1..200)
    }

    proptest! {
        #[test]
        fn voxelization_is_translation_consistent(
            cells in prop::collection::vec((-100i64..100, -100i64..100, -100i64..100, 0.05..0.95f64), 1..100),
            shift in (-20i64..20, -20i64..20, -20i64..20),
        ) {
            let res = 0.03;
            let g = OccupancyGrid3D::new(res, Vector3::zeros());
            let s = Vector3::new(shift.0 as f64, shift.1 as f64, shift.2 as f64) * res;
            for (i, j, k, f) in cells {
                let p = Vector3::new(i as f64 + f, j as f64 + f, k as f64 + f) * res;
                let a = g.voxel_index(&p);
                let b = g.voxel_index(&(p + s));
                prop_assert_eq!(b, [a[0] + shift.0, a[1] + shift.1, a[2] + shift.2]);
            }
        }

        #[test]
        fn occupied_cells_monotone_in_min_hits(pts in random_points()) {
            let mut g = OccupancyGrid3D::new(0.1, Vector3::zeros());
            for (x, y, z) in pts {
                g.insert_point(&Vector3::new(x * 0.2, y * 0.2, z));
            }
            let mut prev = usize::MAX;
            for h in 1..8 {
                let m = g.project_2d(0.2, 1.8, h);
                let n = m.count(Cell::Occupied);
                prop_assert!(n <= prev);
                prev = n;
            }
        }
    }
}
