//! Reads every confident detection of a few simulated keyframes: plane fit,
//! rectification, line splitting, the binarization sweep and the vote.
//!
//! cargo run --example read_labels

use signmap::geometry::backproject;
use signmap::placards::fit_plane;
use signmap::placards::{
    binarize, rectify_roi, sweep_thresholds, validate_label, LineSegmenter, MockSegmenter,
    MockTranscriber, OcrContext, PlacardReader, ReadParams, Transcriber,
};
use signmap::simulator::{simulate, template_world};

fn main() -> anyhow::Result<()> {
    let mut spec = template_world();
    spec.noise.ocr_corruption_prob = 0.2;
    spec.noise.detection_jitter = 1;
    spec.trajectory.poses.truncate(40);
    spec.loss_segments.clear();
    let sim = simulate(&spec, 3)?;
    let ds = &sim.dataset;
    let gt = ds.groundtruth.as_ref().unwrap();
    let params = ReadParams::default();
    let reader = PlacardReader {
        k_depth: &ds.intrinsics,
        params: &params,
        segmenter: &MockSegmenter,
        ocr: &MockTranscriber,
    };

    for kf in &ds.keyframes {
        let pose = &gt.trajectory[kf.id as usize].1;
        for (i, det) in ds.detections[&kf.id].iter().enumerate() {
            let truth = sim.sources[&kf.id][i].map(|p| gt.placards[p].label.as_str());
            match reader.read(kf.id, i, det, &ds.depth[&kf.id], &ds.color[&kf.id], pose) {
                Ok(o) => println!(
                    "kf {:3} det {i}: read {:>18} truth {:>18}",
                    kf.id,
                    format!("{:?}", o.label),
                    format!("{truth:?}")
                ),
                Err(e) => println!("kf {:3} det {i}: dropped ({e})", kf.id),
            }
        }
    }

    // the sweep for one detection in detail
    let (id, det) = ds
        .detections
        .iter()
        .find_map(|(id, d)| d.first().map(|d| (*id, *d)))
        .expect("some detection");
    let k = ds.intrinsics;
    let patch = fit_plane(
        &backproject(&ds.depth[&id], &k, Some(det.bbox))?,
        &params.ransac,
    )?;
    let rect = rectify_roi(&ds.color[&id], det.bbox.scaled(4), &patch, &k.scaled(4))?;
    let lines = MockSegmenter.segment(&rect);
    println!("\nkeyframe {id}: {} text lines", lines.len());
    for t in sweep_thresholds().step_by(5) {
        let texts: Vec<String> = lines
            .iter()
            .enumerate()
            .map(|(line_index, r)| {
                let ctx = OcrContext {
                    keyframe_id: id,
                    detection_index: 0,
                    line_index,
                    threshold: t,
                };
                MockTranscriber.transcribe(&binarize(&rect.crop(*r), t), &ctx)
            })
            .collect();
        let joined = texts.join(" ");
        let valid = validate_label(&joined).map(|l| l.text);
        println!("  threshold {t:3}: {texts:?} -> {valid:?}");
    }
    Ok(())
}
