//! Writes the built-in corridor world as a dataset directory, with a little
//! sensor noise and drift.
//!
//! cargo run --release --example simulate_dataset -- /tmp/corridor 7

use signmap::io::DatasetLayout;
use signmap::simulator::{simulate, template_world};

fn main() -> anyhow::Result<()> {
    let mut args = std::env::args().skip(1);
    let out = args.next().unwrap_or_else(|| "corridor".into());
    let seed: u64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(0);

    let mut spec = template_world();
    spec.noise.depth_sigma = 0.003;
    spec.noise.detection_jitter = 1;
    spec.noise.drift_translation_sigma = 0.002;
    spec.noise.drift_yaw_sigma = 0.0005;
    spec.noise.ocr_corruption_prob = 0.05;
    let sim = simulate(&spec, seed)?;
    let ds = &sim.dataset;
    let detections: usize = ds.detections.values().map(Vec::len).sum();
    println!(
        "{} keyframes, {} loss events, {} detections of {} placards",
        ds.keyframes.len(),
        ds.losses.len(),
        detections,
        spec.placards.len()
    );
    DatasetLayout::new(&out).save(ds)?;
    println!("dataset written to {out}");
    Ok(())
}
