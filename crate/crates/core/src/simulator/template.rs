use std::f64::consts::{PI, TAU};

use super::spec::{NoiseSpec, PlacardSpec, Side, TimedPose, TrajectorySpec, Wall, WorldSpec};
use crate::geometry::CameraIntrinsics;
use crate::wrap_angle;

/// Dead-end annex off the south corridor that carries no placards.
pub const ANNEX_REGION: [f64; 4] = [8.2, -3.8, 11.8, -0.3];

const HEIGHT: f64 = 2.6;
const CAMERA_HEIGHT: f64 = 1.0;
const PLACARD_HEIGHT: f64 = 1.3;
const STEP: f64 = 0.2;
const SCAN_AMPLITUDE_DEG: f64 = 60.0;
const SCAN_PERIOD: usize = 9;
const TURN_STEP_DEG: f64 = 10.0;

fn wall(x0: f64, y0: f64, x1: f64, y1: f64) -> Wall {
    Wall {
        start: [x0, y0],
        end: [x1, y1],
        height: HEIGHT,
    }
}

struct PathBuilder {
    poses: Vec<TimedPose>,
    x: f64,
    y: f64,
    yaw: f64,
}

impl PathBuilder {
    fn push(&mut self) {
        let t = self.poses.len() as f64 * 0.5;
        self.poses.push(TimedPose {
            t,
            x: self.x,
            y: self.y,
            yaw: wrap_angle(self.yaw),
        });
    }

    /// Rotates in place towards `target` in bounded steps.
    fn turn_to(&mut self, target: f64) {
        let step = TURN_STEP_DEG.to_radians();
        loop {
            let d = wrap_angle(target - self.yaw);
            if d.abs() < 1e-9 {
                break;
            }
            self.yaw += d.clamp(-step, step);
            self.push();
        }
    }

    fn spin(&mut self, degrees: f64, step_deg: f64) {
        let n = (degrees.abs() / step_deg).round() as usize;
        let step = step_deg.to_radians() * degrees.signum();
        for _ in 0..n {
            self.yaw += step;
            self.push();
        }
    }

    /// Drives straight to (x, y) while sweeping the camera from side to side.
    fn drive_to(&mut self, x: f64, y: f64) {
        let (dx, dy) = (x - self.x, y - self.y);
        let heading = dy.atan2(dx);
        self.turn_to(heading);
        let (x0, y0) = (self.x, self.y);
        let n = (dx.hypot(dy) / STEP).ceil() as usize;
        let amp = SCAN_AMPLITUDE_DEG.to_radians();
        for i in 1..=n {
            let f = i as f64 / n as f64;
            self.x = x0 + f * dx;
            self.y = y0 + f * dy;
            self.yaw = heading + amp * (TAU * i as f64 / SCAN_PERIOD as f64).sin();
            self.push();
        }
        self.turn_to(heading);
    }
}

fn placard(wall: usize, side: Side, offset: f64, label: &str, caption: &[&str]) -> PlacardSpec {
    PlacardSpec {
        wall,
        side,
        offset,
        height: PLACARD_HEIGHT,
        half_size: 0.15,
        label: label.to_string(),
        caption: caption.iter().map(|s| s.to_string()).collect(),
        unreadable: false,
    }
}

/// Rectangular loop corridor around an inner block with a placard-free
/// annex on the south side. The camera sweeps every corridor, visits the
/// annex, spins once at the south-east junction (where the tracking loss
/// happens) and once in the middle of the north corridor. Noise is off.
pub fn template_world() -> WorldSpec {
    let walls = vec![
        wall(0.0, 0.0, 8.0, 0.0),
        wall(12.0, 0.0, 20.0, 0.0),
        wall(20.0, 0.0, 20.0, 10.0),
        wall(20.0, 10.0, 0.0, 10.0),
        wall(0.0, 10.0, 0.0, 0.0),
        wall(2.0, 2.0, 18.0, 2.0),
        wall(18.0, 2.0, 18.0, 8.0),
        wall(18.0, 8.0, 2.0, 8.0),
        wall(2.0, 8.0, 2.0, 2.0),
        wall(8.0, 0.0, 8.0, -4.0),
        wall(8.0, -4.0, 12.0, -4.0),
        wall(12.0, -4.0, 12.0, 0.0),
    ];
    use Side::{Left, Right};
    let placards = vec![
        placard(5, Right, 2.5, "3.101", &[]),
        placard(5, Right, 5.0, "3103", &["LAB"]),
        placard(5, Right, 7.5, "MEN", &[]),
        placard(5, Right, 10.5, "WOMEN", &[]),
        placard(5, Right, 13.0, "3.107", &[]),
        placard(0, Left, 4.0, "3.102", &[]),
        placard(0, Left, 6.5, "3.104", &["OFFICE"]),
        placard(1, Left, 2.0, "3.106", &[]),
        placard(1, Left, 4.5, "3108", &[]),
        placard(2, Left, 3.5, "STAIR", &[]),
        placard(2, Left, 6.0, "3.110", &[]),
        placard(6, Right, 1.0, "3.109", &[]),
        placard(6, Right, 3.0, "3.111", &["LAB"]),
        placard(6, Right, 5.0, "3.113", &[]),
        placard(3, Left, 3.0, "3.112", &[]),
        placard(3, Left, 5.5, "3.114", &[]),
        placard(3, Left, 8.0, "GENDER INCLUSIVE", &[]),
        placard(3, Left, 10.0, "3.116", &[]),
        placard(3, Left, 12.0, "3118", &["OFFICE"]),
        placard(3, Left, 14.5, "3.120", &[]),
        placard(3, Left, 17.0, "STAIR2", &[]),
        placard(7, Right, 1.5, "3.115", &[]),
        placard(7, Right, 4.0, "3.117", &[]),
        placard(7, Right, 6.5, "3.119", &["LAB"]),
        placard(7, Right, 8.0, "3.121", &[]),
        placard(7, Right, 9.5, "3.123", &[]),
        placard(7, Right, 12.0, "3.125", &[]),
        placard(7, Right, 14.5, "3127", &[]),
        placard(4, Left, 2.5, "3.122", &[]),
        placard(4, Left, 5.0, "3.124", &[]),
        placard(8, Right, 1.5, "3.126", &[]),
        placard(8, Right, 4.0, "3.128", &["OFFICE"]),
    ];

    let mut path = PathBuilder {
        poses: Vec::new(),
        x: 1.0,
        y: 1.0,
        yaw: 0.0,
    };
    path.push();
    path.drive_to(10.0, 1.0);
    path.drive_to(10.0, -2.5);
    path.drive_to(10.0, 1.0);
    path.drive_to(19.0, 1.0);
    path.turn_to(PI / 2.0);
    // finer steps at the junction; the loss happens while facing the corner
    let spin_start = path.poses.len();
    path.spin(360.0, 5.0);
    path.drive_to(19.0, 9.0);
    path.drive_to(10.0, 9.0);
    path.spin(-360.0, 15.0);
    path.drive_to(1.0, 9.0);
    path.drive_to(1.0, 2.0);

    let a = spin_start + 48;
    WorldSpec {
        walls,
        ceiling_height: HEIGHT,
        placards,
        trajectory: TrajectorySpec {
            camera_height: CAMERA_HEIGHT,
            poses: path.poses,
        },
        loss_segments: vec![[a, a + 30]],
        noise: NoiseSpec::default(),
        camera: CameraIntrinsics::default(),
        color_scale: 4,
        min_detection_px: 6,
        free_regions: vec![ANNEX_REGION],
    }
}
