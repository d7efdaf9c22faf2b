//! Integrates noiseless keyframes into the voxel grid and projects the
//! slab between floor and ceiling to a 2D map.
//!
//! cargo run --example occupancy_map -- /tmp/map.pgm

use signmap::io::write_file;
use signmap::reconstruction::{
    correct_vertical_drift, Cell, OccupancyGrid3D, ReconstructionParams,
};
use signmap::simulator::{ground_truth_poses, raycast_depth, template_world, Scene};

fn main() -> anyhow::Result<()> {
    let out = std::env::args().nth(1);
    let spec = template_world();
    let scene = Scene::new(&spec)?;
    let params = ReconstructionParams::default();
    let mut grid = OccupancyGrid3D::new(params.resolution, nalgebra::Vector3::zeros());
    for pose in ground_truth_poses(&spec).iter().step_by(3) {
        let pose = correct_vertical_drift(pose, params.z_fixed);
        grid.integrate_keyframe(
            &pose,
            &raycast_depth(&scene, &pose, &spec.camera),
            &spec.camera,
        );
    }
    let map = grid.project_2d(params.z_min, params.z_max, params.min_column_hits);
    println!("{} occupied voxels", grid.len());
    println!(
        "{}x{} cells of {} m: {} occupied, {} free, {} unknown",
        map.width,
        map.height,
        map.resolution,
        map.count(Cell::Occupied),
        map.count(Cell::Free),
        map.count(Cell::Unknown)
    );
    for (x, y) in [(10.0, 1.0), (19.0, 5.0), (10.0, 2.0), (18.0, 5.0)] {
        println!("cell at ({x}, {y}): {:?}", map.at(x, y));
    }
    if let Some(path) = out {
        let mut pgm = format!("P5\n{} {}\n255\n", map.width, map.height).into_bytes();
        pgm.extend(map.to_image());
        write_file(path.as_ref(), &pgm)?;
        println!("written to {path}");
    }
    Ok(())
}
