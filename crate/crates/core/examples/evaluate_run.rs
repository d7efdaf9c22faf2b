//! Scores landmarks against reference placards: matching, θ snapping to
//! the building's wall directions, and the summary table.
//!
//! cargo run --example evaluate_run

use signmap::aggregation::PlacardLandmark;
use signmap::evaluation::{correspond, evaluate, ReferencePlacard};

fn main() {
    let reference: Vec<ReferencePlacard> = (0..6)
        .map(|i| ReferencePlacard {
            id: i,
            x: 2.0 * i as f64,
            y: if i % 2 == 0 { 0.0 } else { 2.0 },
            z: 1.3,
            theta_rad: if i % 2 == 0 { 1.5708 } else { -1.5708 },
            label: format!("3.1{:02}", i),
        })
        .collect();
    let landmark = |x: f64, y: f64, deg: f64, label: &str| PlacardLandmark {
        x,
        y,
        z: 1.3,
        theta_rad: deg.to_radians(),
        label: label.into(),
        support: 3,
        members: Vec::new(),
    };
    let landmarks = vec![
        landmark(0.02, 0.01, 88.0, "3.100"),
        landmark(2.05, 1.98, -93.0, "3.101"),
        landmark(4.10, 0.03, 91.0, "3.102"),
        landmark(4.30, 0.02, 90.0, "3.102"),
        landmark(8.2, 0.05, 95.0, "3.104"),
        landmark(7.0, 1.0, 0.0, ""),
    ];
    let corr = correspond(&landmarks, &reference, 0.5);
    println!(
        "duplicates {:?}, false positives {:?}",
        corr.duplicates, corr.false_positives
    );
    let report = evaluate(&landmarks, &reference, &corr, [0.0, 0.0]);
    print!("{}", report.to_text());
    println!("\n{}", report.scatter_csv());
}
