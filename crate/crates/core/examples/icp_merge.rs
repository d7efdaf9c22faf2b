//! Aligns two depth views of the template junction with ICP, the way a
//! tracking loss is bridged.
//!
//! cargo run --example icp_merge

use signmap::geometry::{backproject, transform_cloud, Frame};
use signmap::mapgraph::{icp_align, IcpParams};
use signmap::simulator::{camera_pose, raycast_depth, template_world, Scene};
use signmap::PointCloud;

fn main() -> anyhow::Result<()> {
    let spec = template_world();
    let scene = Scene::new(&spec)?;
    let k = spec.camera;
    let h = spec.trajectory.camera_height;

    // two keyframes five degrees apart, facing the south-east corner
    let a = camera_pose(19.0, 1.0, 330f64.to_radians(), h);
    let b = camera_pose(19.0, 1.0, 335f64.to_radians(), h);
    let cloud_a = backproject(&raycast_depth(&scene, &a, &k), &k, None)?;
    let cloud_b = backproject(&raycast_depth(&scene, &b, &k), &k, None)?;

    // express both in the first camera's frame; ICP recovers a_from_b
    let target = PointCloud::new(cloud_a.points, Frame::Camera);
    let source = transform_cloud(&signmap::Pose3::identity(), &cloud_b);
    let r = icp_align(
        &source,
        &target,
        &signmap::Pose3::identity(),
        &IcpParams::default(),
    )?;

    let truth = a.inverse().compose(&b);
    let (rot, trans) = r.pose.distance_to(&truth);
    println!(
        "{} iterations, {} correspondences, rms {:.4} m",
        r.iterations, r.correspondences, r.rms_residual
    );
    println!(
        "estimated yaw {:.2} deg (true {:.2}), error {:.3} deg / {:.4} m",
        r.pose.rotation_angle().to_degrees(),
        truth.rotation_angle().to_degrees(),
        rot.to_degrees(),
        trans
    );
    Ok(())
}
