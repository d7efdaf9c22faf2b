//! End-to-end acceptance checks. Runs as a plain binary (`harness = false`)
//! and prints one PASS/FAIL line per criterion.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use nalgebra::{UnitQuaternion, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use signmap::aggregation::cluster_positions;
use signmap::codematrix::{decode, find_bands, text_lines, CodeMatrix, DARK, LIGHT};
use signmap::config::PipelineConfig;
use signmap::evaluation::EvalReport;
use signmap::geometry::{backproject, Frame};
use signmap::io::Dataset;
use signmap::mapgraph::{icp_align, IcpParams};
use signmap::pipeline::{run_all, score, RunProducts, TextBackend};
use signmap::placards::{
    binarize, fit_plane, rectify_roi, sweep_thresholds, validate_label, LineSegmenter,
    MockSegmenter, ReadParams,
};
use signmap::reconstruction::Cell;
use signmap::simulator::{
    simulate, simulate_run, template_world, PlacardSpec, Side, TimedPose, TrajectorySpec, Wall,
    WorldSpec, ANNEX_REGION,
};
use signmap::{PointCloud, Pose3};

type Outcome = Result<String, String>;

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

struct Run {
    dataset: Dataset,
    products: RunProducts,
    report: EvalReport,
}

fn pipeline(spec: &WorldSpec, seed: u64, cfg: &PipelineConfig) -> Run {
    let dataset = simulate_run(spec, seed).expect("simulate");
    let products = run_all(
        &dataset.keyframes,
        &dataset.losses,
        &dataset,
        &dataset.intrinsics,
        cfg,
        &TextBackend::mock(),
    )
    .expect("pipeline");
    let origin = products.map.trajectory[0].1.translation;
    let gt = dataset.groundtruth.as_ref().expect("ground truth");
    let report = score(
        &products.aggregation.landmarks,
        &gt.placards,
        None,
        [origin.x, origin.y],
        cfg,
    )
    .expect("score");
    Run {
        dataset,
        products,
        report,
    }
}

// ---------------------------------------------------------------- 1

fn wall_pair(rng: &mut ChaCha8Rng, n: usize) -> PointCloud {
    let pts = (0..n)
        .map(|i| {
            let a = rng.random_range(0.0..2.0);
            let h = rng.random_range(0.0..2.0);
            if i % 2 == 0 {
                Vector3::new(a, 0.0, h)
            } else {
                Vector3::new(0.0, a, h)
            }
        })
        .collect();
    PointCloud::new(pts, Frame::Camera)
}

fn icp_exactness() -> Outcome {
    let params = IcpParams {
        max_iterations: 200,
        convergence_translation: 1e-9,
        convergence_rotation: 1e-9,
        max_correspondence_dist: 1.0,
        subsample_voxel: 1e-3,
    };
    let (mut worst_t, mut worst_r, mut slowest) = (0.0f64, 0.0f64, 0.0f64);
    for seed in 0..50 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let src = wall_pair(&mut rng, 200);
        let axis = Vector3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        let angle = rng.random_range(0.0..15f64.to_radians());
        let dir = Vector3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        )
        .normalize();
        let truth = Pose3::new(
            UnitQuaternion::from_scaled_axis(axis.normalize() * angle),
            dir * rng.random_range(0.0..0.5),
        );
        let tgt = PointCloud::new(
            src.points
                .iter()
                .map(|p| truth.transform_point(p))
                .collect(),
            Frame::Camera,
        );
        let t0 = Instant::now();
        let r = match icp_align(&src, &tgt, &Pose3::identity(), &params) {
            Ok(r) => r,
            Err(e) => return Err(format!("seed {seed}: {e}")),
        };
        slowest = slowest.max(t0.elapsed().as_secs_f64());
        if r.cost_history.windows(2).any(|w| w[1] > w[0] + 1e-12) {
            return Err(format!("seed {seed}: residual increased"));
        }
        let (rot, trans) = r.pose.distance_to(&truth);
        worst_t = worst_t.max(trans);
        worst_r = worst_r.max(rot.to_degrees());
    }
    check(
        worst_t <= 1e-3 && worst_r <= 0.1 && slowest < 1.0,
        format!("worst {worst_t:.2e} m, {worst_r:.2e} deg, slowest {slowest:.3} s"),
    )
}

// ---------------------------------------------------------------- 2

fn occupied_near_path(run: &Run, band: f64) -> usize {
    let map = &run.products.map.map;
    let mut hits = std::collections::BTreeSet::new();
    let path: Vec<[f64; 2]> = run
        .products
        .map
        .trajectory
        .iter()
        .map(|(_, p)| [p.translation.x, p.translation.y])
        .collect();
    for w in path.windows(2) {
        let len = (w[1][0] - w[0][0]).hypot(w[1][1] - w[0][1]);
        let steps = (len / (map.resolution / 2.0)).ceil().max(1.0) as usize;
        for s in 0..=steps {
            let f = s as f64 / steps as f64;
            let x = w[0][0] + f * (w[1][0] - w[0][0]);
            let y = w[0][1] + f * (w[1][1] - w[0][1]);
            let r = (band / map.resolution).ceil() as i64;
            let (c0, r0) = map.cell_of(x, y);
            for dr in -r..=r {
                for dc in -r..=r {
                    let (cx, cy) = map.cell_center(c0 + dc, r0 + dr);
                    if (cx - x).hypot(cy - y) <= band && map.get(c0 + dc, r0 + dr) == Cell::Occupied
                    {
                        hits.insert((c0 + dc, r0 + dr));
                    }
                }
            }
        }
    }
    hits.len()
}

fn merge_efficacy() -> Outcome {
    let mut spec = template_world();
    spec.noise.drift_translation_sigma = 0.01;
    let with = PipelineConfig::default();
    let mut without = PipelineConfig::default();
    without.merge.use_icp = false;
    let mut lines = Vec::new();
    let mut ok = true;
    for seed in 1..=5 {
        let a = pipeline(&spec, seed, &with);
        let b = pipeline(&spec, seed, &without);
        let blocked = occupied_near_path(&a, 0.3);
        let merged = a.products.map.unmerged.is_empty();
        let pass = merged && a.report.duplicate_count <= b.report.duplicate_count && blocked == 0;
        ok &= pass;
        lines.push(format!(
            "seed {seed}: dup {} vs {}, blocked cells {blocked}{}",
            a.report.duplicate_count,
            b.report.duplicate_count,
            if merged { "" } else { ", unmerged" }
        ));
    }
    check(ok, lines.join("; "))
}

// ---------------------------------------------------------------- 3

fn semantic_accuracy() -> Outcome {
    let spec = template_world();
    let run = pipeline(&spec, 0, &PipelineConfig::default());
    let gt = &run.dataset.groundtruth.as_ref().unwrap().placards;
    let lms = &run.products.aggregation.landmarks;
    if gt.len() < 30 {
        return Err(format!("template has only {} placards", gt.len()));
    }
    let mut worst_pos = 0.0f64;
    let mut worst_theta = 0.0f64;
    let mut bad = Vec::new();
    let mut used = vec![false; lms.len()];
    for g in gt {
        let nearest = lms
            .iter()
            .enumerate()
            .map(|(i, l)| (i, (l.x - g.x).hypot(l.y - g.y)))
            .min_by(|a, b| a.1.total_cmp(&b.1));
        let Some((i, d)) = nearest else {
            bad.push(format!("{} missing", g.label));
            continue;
        };
        let l = &lms[i];
        let dtheta = signmap::wrap_angle(l.theta_rad - g.theta_rad)
            .abs()
            .to_degrees();
        worst_pos = worst_pos.max(d);
        worst_theta = worst_theta.max(dtheta);
        if used[i] || l.label != g.label || d > 0.06 || dtheta > 1.0 {
            bad.push(format!(
                "{} -> {:?} at {d:.3} m, {dtheta:.2} deg",
                g.label, l.label
            ));
        }
        used[i] = true;
    }
    check(
        bad.is_empty() && lms.len() == gt.len(),
        format!(
            "{} landmarks for {} placards, worst {worst_pos:.3} m, {worst_theta:.2} deg{}",
            lms.len(),
            gt.len(),
            if bad.is_empty() {
                String::new()
            } else {
                format!("; {}", bad.join(", "))
            }
        ),
    )
}

// ---------------------------------------------------------------- 4

fn theta_bound() -> Outcome {
    let mut spec = template_world();
    spec.noise.normal_sigma_deg = 3.0;
    let cfg = PipelineConfig::default();
    let means: Vec<f64> = (1..=5)
        .map(|seed| pipeline(&spec, seed, &cfg).report.theta_err_mean)
        .collect();
    let avg = means.iter().sum::<f64>() / means.len() as f64;
    check(
        avg < 6.0,
        format!("mean theta error {avg:.3} deg (per seed {means:.3?})"),
    )
}

// ---------------------------------------------------------------- 5

/// Character-level matcher for the placard grammar, without regexes.
fn reference_label(s: &str) -> Option<String> {
    let ws = |c: char| c.is_whitespace();
    let s = s.trim_matches(ws);
    let chars: Vec<char> = s.chars().collect();
    let digit = |c: &char| c.is_ascii_digit();
    match chars.len() {
        4 if chars.iter().all(digit) => {
            return Some(format!("{}.{}{}{}", chars[0], chars[1], chars[2], chars[3]))
        }
        5 if digit(&chars[0]) && chars[1] == '.' && chars[2..].iter().all(digit) => {
            return Some(s.to_string())
        }
        _ => {}
    }
    for name in ["MEN", "WOMEN", "GENDER INCLUSIVE", "STAIR"] {
        if s == name {
            return Some(s.to_string());
        }
    }
    if chars.len() == 6 && s.starts_with("STAIR") && digit(&chars[5]) {
        return Some(s.to_string());
    }
    None
}

fn grammar_oracle() -> Outcome {
    const ALPHABET: &[u8] = b"0123456789.ABCDEFGHIJKLMNOPQRSTUVWXYZ ";
    let seeds = [
        "3.112",
        "3112",
        "MEN",
        "WOMEN",
        "STAIR",
        "STAIR4",
        " 7.001",
        "GENDER INCLUSIVE",
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let n = 1_000_000;
    let mut accepted = 0usize;
    for i in 0..n {
        let s: String = if i % 2 == 0 {
            let len = rng.random_range(0..=6);
            (0..len)
                .map(|_| ALPHABET[rng.random_range(0..ALPHABET.len())] as char)
                .collect()
        } else {
            // mutate a valid label so near-misses are well represented
            let mut b: Vec<u8> = seeds[rng.random_range(0..seeds.len())].bytes().collect();
            for _ in 0..rng.random_range(0..3) {
                let at = rng.random_range(0..=b.len());
                match rng.random_range(0..3) {
                    0 if at < b.len() => b[at] = ALPHABET[rng.random_range(0..ALPHABET.len())],
                    1 if at < b.len() => {
                        b.remove(at);
                    }
                    _ => b.insert(at, ALPHABET[rng.random_range(0..ALPHABET.len())]),
                }
            }
            String::from_utf8(b).unwrap()
        };
        let got = validate_label(&s);
        let want = reference_label(&s);
        if got.as_ref().map(|l| l.text.clone()) != want {
            return Err(format!("{s:?}: validate_label {got:?}, reference {want:?}"));
        }
        if let Some(l) = got {
            accepted += 1;
            if validate_label(&l.text) != Some(l.clone()) {
                return Err(format!("{:?} is not a fixed point", l.text));
            }
        }
    }
    Ok(format!("{n} samples agree, {accepted} accepted"))
}

// ---------------------------------------------------------------- 6

fn single_placard_world(label: &str, caption: &[&str]) -> WorldSpec {
    let mut spec = template_world();
    spec.walls = vec![Wall {
        start: [0.0, 0.0],
        end: [4.0, 0.0],
        height: 2.6,
    }];
    spec.placards = vec![PlacardSpec {
        wall: 0,
        side: Side::Left,
        offset: 2.0,
        height: 1.0,
        half_size: 0.15,
        label: label.into(),
        caption: caption.iter().map(|s| s.to_string()).collect(),
        unreadable: false,
    }];
    spec.trajectory = TrajectorySpec {
        camera_height: 1.0,
        poses: vec![TimedPose {
            t: 0.0,
            x: 2.0,
            y: 1.2,
            yaw: -std::f64::consts::FRAC_PI_2,
        }],
    };
    spec.loss_segments.clear();
    spec.free_regions.clear();
    spec
}

fn threshold_sweep() -> Outcome {
    let ts: Vec<u8> = sweep_thresholds().collect();
    let expected: Vec<u8> = (1..=50).map(|i| i * 5).collect();
    if ts != expected {
        return Err(format!("thresholds {ts:?}"));
    }

    let lines = ["3.112", "LAB"];
    let direct = CodeMatrix::encode(&lines).unwrap().render(6, LIGHT, DARK);
    let spec = single_placard_world("3.112", &["LAB"]);
    let sim = simulate(&spec, 0).map_err(|e| e.to_string())?;
    let ds = &sim.dataset;
    let det = ds.detections[&0].first().ok_or("placard not detected")?;
    let k = ds.intrinsics;
    let cloud = backproject(&ds.depth[&0], &k, Some(det.bbox)).map_err(|e| e.to_string())?;
    let patch = fit_plane(&cloud, &ReadParams::default().ransac).map_err(|e| e.to_string())?;
    let k_color = k.scaled(spec.color_scale);
    let rectified = rectify_roi(
        &ds.color[&0],
        det.bbox.scaled(spec.color_scale),
        &patch,
        &k_color,
    )
    .map_err(|e| e.to_string())?;

    let want = text_lines("3.112", &["LAB".to_string()]);
    let mut failures = Vec::new();
    for t in 60..=200u8 {
        let whole = decode_line_all(&binarize(&direct, t));
        if whole != want {
            failures.push(format!("rendered@{t}: {whole:?}"));
        }
        let boxes = MockSegmenter.segment(&rectified);
        let read: Vec<String> = boxes
            .iter()
            .map(|r| decode(&binarize(&rectified.crop(*r), t)))
            .collect();
        if read != want {
            failures.push(format!("simulated@{t}: {read:?}"));
        }
    }
    check(
        failures.is_empty(),
        if failures.is_empty() {
            "50 thresholds; rendered and simulated codes read at every threshold in [60, 200]"
                .into()
        } else {
            failures.join(", ")
        },
    )
}

fn decode_line_all(binary: &signmap::GrayImage) -> Vec<String> {
    find_bands(binary)
        .into_iter()
        .filter_map(|b| b.text)
        .collect()
}

// ---------------------------------------------------------------- 7

fn clustering_constants() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for i in 0..100 {
        let dir = Vector3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        )
        .normalize();
        let base = Vector3::new(
            rng.random_range(-10.0..10.0),
            rng.random_range(-10.0..10.0),
            rng.random_range(0.0..2.0),
        );
        for (gap, groups) in [(0.150, 1), (0.152, 2)] {
            let b = base + dir * gap;
            let pts = [[base.x, base.y, base.z], [b.x, b.y, b.z]];
            let got = cluster_positions(&pts, PipelineConfig::default().aggregation.cluster_radius);
            if got.len() != groups {
                return Err(format!(
                    "orientation {i}: gap {gap} gave {} clusters",
                    got.len()
                ));
            }
        }
    }
    Ok("100 orientations: 0.150 m merges, 0.152 m splits".into())
}

// ---------------------------------------------------------------- 8

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut r = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            r[k] = avg;
        }
        i = j + 1;
    }
    r
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

fn error_trend() -> Outcome {
    let mut spec = template_world();
    spec.noise.drift_translation_sigma = 0.002;
    spec.noise.drift_yaw_sigma = 0.001;
    spec.noise.drift_yaw_bias = 0.00005;
    let cfg = PipelineConfig::default();
    let mut rhos = Vec::new();
    for seed in 1..=5 {
        let run = pipeline(&spec, seed, &cfg);
        let dist: Vec<f64> = run
            .report
            .rows
            .iter()
            .map(|r| r.distance_from_origin)
            .collect();
        let err: Vec<f64> = run
            .report
            .rows
            .iter()
            .map(|r| r.displacement_error)
            .collect();
        rhos.push(pearson(&ranks(&dist), &ranks(&err)));
    }
    check(
        rhos.iter().all(|&r| r > 0.3),
        format!("spearman per seed {rhos:.3?}"),
    )
}

// ---------------------------------------------------------------- 9

fn in_region(r: &[f64; 4], x: f64, y: f64) -> bool {
    x >= r[0] && x <= r[2] && y >= r[1] && y <= r[3]
}

fn roam_test() -> Outcome {
    let spec = template_world();
    assert_eq!(spec.noise.false_positive_rate, 0.0);
    let run = pipeline(&spec, 0, &PipelineConfig::default());
    let r = ANNEX_REGION;
    let inside = run
        .dataset
        .groundtruth
        .as_ref()
        .unwrap()
        .trajectory
        .iter()
        .filter(|(_, p)| in_region(&r, p.translation.x, p.translation.y))
        .count();
    let obs = run
        .products
        .observations
        .iter()
        .filter(|o| in_region(&r, o.position[0], o.position[1]))
        .count();
    let lms = run
        .products
        .aggregation
        .landmarks
        .iter()
        .filter(|l| in_region(&r, l.x, l.y))
        .count();
    check(
        inside > 0 && obs == 0 && lms == 0,
        format!("{inside} keyframes in the annex, {obs} observations, {lms} landmarks there"),
    )
}

// ---------------------------------------------------------------- 10

fn tree(root: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for e in std::fs::read_dir(&dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(root).unwrap().display().to_string();
                out.insert(rel, std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn cli_chain(root: &Path) -> Result<(), String> {
    let bin = env!("CARGO_BIN_EXE_signmap");
    let ds = root.join("ds");
    let w = root.join("work");
    let (ds, w) = (ds.to_str().unwrap(), w.to_str().unwrap());
    let steps: [&[&str]; 6] = [
        &["simulate", "--seed", "3", "--out", ds],
        &["map", "--dataset", ds, "--out", w],
        &["semantics", "--dataset", ds, "--out", w],
        &["aggregate", "--out", w],
        &["evaluate", "--dataset", ds, "--out", w],
        &["render", "--out", w],
    ];
    for args in steps {
        let out = Command::new(bin)
            .args(args)
            .output()
            .map_err(|e| e.to_string())?;
        if !out.status.success() {
            return Err(format!(
                "{} failed: {}",
                args[0],
                String::from_utf8_lossy(&out.stderr)
            ));
        }
    }
    Ok(())
}

fn determinism() -> Outcome {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    cli_chain(a.path())?;
    cli_chain(b.path())?;
    let (ta, tb) = (tree(a.path()), tree(b.path()));
    let differing: Vec<&String> = ta
        .iter()
        .filter(|(k, v)| tb.get(*k) != Some(v))
        .map(|(k, _)| k)
        .collect();
    check(
        differing.is_empty() && ta.len() == tb.len(),
        format!("{} files compared, differing: {differing:?}", ta.len()),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("1 icp exactness", icp_exactness),
        ("2 merge efficacy", merge_efficacy),
        ("3 end-to-end semantic accuracy", semantic_accuracy),
        ("4 noise-calibrated theta bound", theta_bound),
        ("5 label grammar oracle", grammar_oracle),
        ("6 threshold sweep", threshold_sweep),
        ("7 clustering radius", clustering_constants),
        ("8 error vs distance trend", error_trend),
        ("9 placard-free roam", roam_test),
        ("10 cli determinism", determinism),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        let t0 = Instant::now();
        let outcome = f();
        let secs = t0.elapsed().as_secs_f64();
        match outcome {
            Ok(d) => println!("PASS  {name}: {d} [{secs:.1} s]"),
            Err(d) => {
                failed += 1;
                println!("FAIL  {name}: {d} [{secs:.1} s]");
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
