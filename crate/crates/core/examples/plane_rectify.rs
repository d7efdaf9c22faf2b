//! Fits the placard plane under a detection, places it in the map and warps
//! the colour patch to a head-on view.
//!
//! cargo run --example plane_rectify -- /tmp/rectified.pgm

use signmap::geometry::backproject;
use signmap::io::{encode_pgm8, write_file};
use signmap::placards::{fit_plane, incidence_angle, placard_pose, rectify_roi, RansacParams};
use signmap::simulator::{camera_pose, render_frame, template_world, NoiseSpec, Scene};

fn main() -> anyhow::Result<()> {
    let out = std::env::args().nth(1);
    let spec = template_world();
    let scene = Scene::new(&spec)?;
    let k = spec.camera;
    // looking diagonally along the south corridor
    let pose = camera_pose(5.8, 1.0, 150f64.to_radians(), spec.trajectory.camera_height);
    let mut rng = rand::SeedableRng::seed_from_u64(0);
    let frame = render_frame(
        &scene,
        &pose,
        &k,
        spec.color_scale,
        6,
        &NoiseSpec::default(),
        &mut rng,
    );

    for (det, src) in frame.detections.iter().zip(&frame.sources) {
        let truth = &scene.placards[src.expect("no false positives configured")];
        let cloud = backproject(&frame.depth, &k, Some(det.bbox))?;
        let patch = fit_plane(&cloud, &RansacParams::default())?;
        let p = placard_pose(&patch, &pose)?;
        println!(
            "bbox {:?}: {} inliers, incidence {:.1} deg",
            det.bbox,
            patch.inlier_indices.len(),
            incidence_angle(&patch).to_degrees()
        );
        println!(
            "  position ({:.3}, {:.3}, {:.3}) vs ({:.3}, {:.3}, {:.3}), theta {:.2} vs {:.2} deg",
            p.position.x,
            p.position.y,
            p.position.z,
            truth.center.x,
            truth.center.y,
            truth.center.z,
            p.theta.to_degrees(),
            truth.theta().to_degrees()
        );
        let s = spec.color_scale;
        let img = rectify_roi(&frame.color, det.bbox.scaled(s), &patch, &k.scaled(s))?;
        println!("  rectified patch {}x{}", img.width, img.height);
        if let Some(path) = &out {
            write_file(path.as_ref(), &encode_pgm8(&img))?;
            println!("  written to {path}");
            break;
        }
    }
    Ok(())
}
