//! Simulates the template world and runs mapping, semantics, aggregation
//! and evaluation in memory, with and without the ICP merge.
//!
//! cargo run --release --example full_pipeline -- 2

use signmap::config::PipelineConfig;
use signmap::pipeline::{run_all, score, TextBackend};
use signmap::simulator::{simulate_run, template_world};

fn main() -> anyhow::Result<()> {
    let seed: u64 = std::env::args()
        .nth(1)
        .map(|s| s.parse())
        .transpose()?
        .unwrap_or(1);
    let mut spec = template_world();
    spec.noise.drift_translation_sigma = 0.01;
    spec.noise.normal_sigma_deg = 2.0;
    let ds = simulate_run(&spec, seed)?;
    let gt = ds.groundtruth.as_ref().unwrap();

    for use_icp in [true, false] {
        let mut cfg = PipelineConfig::default();
        cfg.merge.use_icp = use_icp;
        let run = run_all(
            &ds.keyframes,
            &ds.losses,
            &ds,
            &ds.intrinsics,
            &cfg,
            &TextBackend::mock(),
        )?;
        let o = run.map.trajectory[0].1.translation;
        let report = score(
            &run.aggregation.landmarks,
            &gt.placards,
            None,
            [o.x, o.y],
            &cfg,
        )?;
        println!(
            "== merge {}",
            if use_icp {
                "with ICP"
            } else {
                "assuming the camera stood still"
            }
        );
        for m in &run.map.merges {
            println!("{m:?}");
        }
        println!(
            "{} observations, {} landmarks, {} discarded",
            run.observations.len(),
            run.aggregation.landmarks.len(),
            run.aggregation.discarded.len()
        );
        print!("{}", report.to_text());
    }
    Ok(())
}
