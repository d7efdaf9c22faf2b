//! Clusters noisy observations of a few placards into landmarks, dropping
//! those that float away from any wall.
//!
//! cargo run --example aggregate_landmarks

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use signmap::aggregation::{aggregate, AggregationParams};
use signmap::placards::PlacardObservation;
use signmap::reconstruction::{Cell, Grid2D};

fn main() {
    // a 4 m wall along y = 0 in a 5×2 m map
    let (w, h) = (250, 100);
    let mut cells = vec![Cell::Free; w * h];
    for col in 0..200 {
        cells[50 * w + col] = Cell::Occupied;
    }
    let map = Grid2D {
        resolution: 0.02,
        origin_x: 0.0,
        origin_y: -1.0,
        width: w,
        height: h,
        cells,
    };

    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let placards = [(0.5, "3.101"), (1.5, "3.103"), (2.5, "MEN"), (4.6, "3.107")];
    let mut obs = Vec::new();
    for (kf, &(x, label)) in placards.iter().cycle().take(20).enumerate() {
        let misread = rng.random_bool(0.15);
        obs.push(PlacardObservation {
            keyframe_id: kf as u32,
            detection_index: 0,
            position: [x + rng.random_range(-0.03..0.03), 0.01, 1.3],
            theta: std::f64::consts::FRAC_PI_2 + rng.random_range(-0.05..0.05),
            label: if misread { String::new() } else { label.into() },
            confidence: 0.95,
            on_wall: None,
        });
    }

    let agg = aggregate(&obs, &map, &AggregationParams::default());
    for l in &agg.landmarks {
        println!(
            "{:>6} at ({:.3}, {:.3}) theta {:.1} deg from {} observations",
            l.label,
            l.x,
            l.y,
            l.theta_rad.to_degrees(),
            l.support
        );
    }
    println!("{} observations off the wall", agg.discarded.len());
}
