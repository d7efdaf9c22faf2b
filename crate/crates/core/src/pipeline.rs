//! Stage functions over in-memory data, and the file-based commands the
//! `signmap` binary exposes. Each command reads its inputs from a dataset
//! directory and/or a work directory and writes its outputs to the work
//! directory.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use log::{debug, info, warn};
use rayon::prelude::*;
use serde::Serialize;

use crate::aggregation::{aggregate, Aggregation, PlacardLandmark};
use crate::config::PipelineConfig;
use crate::evaluation::{
    correspond, correspondence_from_csv, evaluate, EvalReport, ReferencePlacard,
};
use crate::geometry::{CameraIntrinsics, Pose3};
use crate::io::{
    encode_ppm, format_poses, parse_poses, read_json, registry_keyframes, write_file, write_json,
    DatasetLayout, DepthStore, FrameSource, KeyframeRecord,
};
use crate::mapgraph::{LossEvent, MapRegistry, MergeRecord};
use crate::placards::{
    ExternalFileTranscriber, LineSegmenter, MockSegmenter, MockTranscriber, NullSegmenter,
    NullTranscriber, PlacardObservation, PlacardReader, Transcriber,
};
use crate::reconstruction::{correct_vertical_drift, Grid2D, MapMeta, OccupancyGrid3D};
use crate::render::render_map;
use crate::simulator::{simulate_run, template_world, WorldSpec};

/// Work-directory file names.
pub mod files {
    pub const TRAJECTORY: &str = "trajectory_merged.txt";
    pub const MERGES: &str = "merges.json";
    pub const VOXELS: &str = "voxels.txt";
    pub const MAP_PGM: &str = "map.pgm";
    pub const MAP_META: &str = "map.json";
    pub const OBSERVATIONS: &str = "observations.json";
    pub const LANDMARKS: &str = "landmarks.json";
    pub const DISCARDED: &str = "discarded.json";
    pub const REPORT_TEXT: &str = "report.txt";
    pub const REPORT_JSON: &str = "report.json";
    pub const SCATTER: &str = "scatter.csv";
    pub const MAP_IMAGE: &str = "map.ppm";
}

/// Line segmentation and transcription backends.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Backend {
    /// Code-matrix band finder and decoder.
    Mock,
    /// Reads nothing; every observation gets an empty label.
    Null,
    /// Transcriptions precomputed offline, from `<dataset>/ocr/<id>.json`.
    ExternalFile,
}

/// A segmenter/transcriber pair.
pub struct TextBackend {
    pub segmenter: Box<dyn LineSegmenter>,
    pub ocr: Box<dyn Transcriber>,
}

impl TextBackend {
    pub fn mock() -> Self {
        Self {
            segmenter: Box::new(MockSegmenter),
            ocr: Box::new(MockTranscriber),
        }
    }

    pub fn open(backend: Backend, dataset: &DatasetLayout) -> Result<Self> {
        Ok(match backend {
            Backend::Mock => Self::mock(),
            Backend::Null => Self {
                segmenter: Box::new(NullSegmenter),
                ocr: Box::new(NullTranscriber),
            },
            Backend::ExternalFile => Self {
                segmenter: Box::new(NullSegmenter),
                ocr: Box::new(ExternalFileTranscriber::load(&dataset.ocr_dir())?),
            },
        })
    }
}

/// Everything the mapping phase produces.
#[derive(Debug, Clone)]
pub struct MapProducts {
    /// Global `world_from_camera` of every keyframe in an anchored submap,
    /// with the height pinned.
    pub trajectory: Vec<(u32, Pose3)>,
    pub merges: Vec<MergeRecord>,
    /// Submaps no loss event could anchor; their keyframes are left out.
    pub unmerged: Vec<u32>,
    pub voxels: OccupancyGrid3D,
    pub map: Grid2D,
}

/// Merges submaps, pins the camera height and builds the voxel and 2D maps.
pub fn build_map(
    keyframes: &[KeyframeRecord],
    losses: &[LossEvent],
    frames: &dyn FrameSource,
    k: &CameraIntrinsics,
    cfg: &PipelineConfig,
) -> Result<MapProducts> {
    let mut registry = MapRegistry::new(registry_keyframes(keyframes, frames)?, losses.to_vec())?;
    let merges = registry.resolve_losses(&DepthStore(frames), k, &cfg.merge.strategy());
    let unmerged = registry.unanchored();
    if !unmerged.is_empty() {
        warn!("submaps left unmerged: {unmerged:?}");
    }
    let rc = &cfg.reconstruction;
    let trajectory: Vec<(u32, Pose3)> = registry
        .global_trajectory()
        .into_iter()
        .map(|(id, p)| (id, correct_vertical_drift(&p, rc.z_fixed)))
        .collect();
    let empty = || OccupancyGrid3D::new(rc.resolution, nalgebra::Vector3::zeros());
    let voxels = trajectory
        .par_iter()
        .try_fold(empty, |mut grid, (id, pose)| {
            grid.integrate_keyframe(pose, &frames.depth(*id)?, k);
            Ok::<_, anyhow::Error>(grid)
        })
        .try_reduce(empty, |mut a, b| {
            a.merge(&b);
            Ok(a)
        })?;
    let map = voxels.project_2d(rc.z_min, rc.z_max, rc.min_column_hits);
    info!(
        "map: {} keyframes, {} voxels, {}x{} cells",
        trajectory.len(),
        voxels.len(),
        map.width,
        map.height
    );
    Ok(MapProducts {
        trajectory,
        merges,
        unmerged,
        voxels,
        map,
    })
}

/// Reads every confident detection of every keyframe on `trajectory`.
/// Observations come out ordered by keyframe, then detection index (the
/// index into the keyframe's full detection list).
pub fn extract_observations(
    trajectory: &[(u32, Pose3)],
    frames: &dyn FrameSource,
    k: &CameraIntrinsics,
    cfg: &PipelineConfig,
    text: &TextBackend,
) -> Result<Vec<PlacardObservation>> {
    let reader = PlacardReader {
        k_depth: k,
        params: &cfg.placards,
        segmenter: text.segmenter.as_ref(),
        ocr: text.ocr.as_ref(),
    };
    let per_keyframe: Vec<Vec<PlacardObservation>> = trajectory
        .par_iter()
        .map(|(id, pose)| {
            let dets = frames.detections(*id)?;
            let confident: Vec<usize> = (0..dets.len())
                .filter(|&i| dets[i].confidence >= cfg.confidence_threshold)
                .collect();
            if confident.is_empty() {
                return Ok(Vec::new());
            }
            let depth = frames.depth(*id)?;
            let color = frames.color(*id)?;
            let mut out = Vec::new();
            for i in confident {
                match reader.read(*id, i, &dets[i], &depth, &color, pose) {
                    Ok(o) => out.push(o),
                    Err(e) => debug!("keyframe {id} detection {i} dropped: {e}"),
                }
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    Ok(per_keyframe.into_iter().flatten().collect())
}

/// Scores landmarks; `correspondence` is the text of a hand-made CSV that
/// replaces automatic matching. `origin` is where the trajectory starts.
pub fn score(
    landmarks: &[PlacardLandmark],
    reference: &[ReferencePlacard],
    correspondence: Option<&str>,
    origin: [f64; 2],
    cfg: &PipelineConfig,
) -> Result<EvalReport> {
    let corr = match correspondence {
        Some(text) => correspondence_from_csv(text, landmarks.len(), reference)?,
        None => correspond(landmarks, reference, cfg.evaluation.max_match_dist),
    };
    Ok(evaluate(landmarks, reference, &corr, origin))
}

/// Landmarks and discarded observations of a whole dataset, in memory.
#[derive(Debug, Clone)]
pub struct RunProducts {
    pub map: MapProducts,
    pub observations: Vec<PlacardObservation>,
    pub aggregation: Aggregation,
}

/// Mapping, semantics and aggregation back to back.
pub fn run_all(
    keyframes: &[KeyframeRecord],
    losses: &[LossEvent],
    frames: &dyn FrameSource,
    k: &CameraIntrinsics,
    cfg: &PipelineConfig,
    text: &TextBackend,
) -> Result<RunProducts> {
    let map = build_map(keyframes, losses, frames, k, cfg)?;
    let observations = extract_observations(&map.trajectory, frames, k, cfg, text)?;
    let aggregation = aggregate(&observations, &map.map, &cfg.aggregation);
    Ok(RunProducts {
        map,
        observations,
        aggregation,
    })
}

fn out_path(out: &Path, name: &str) -> PathBuf {
    out.join(name)
}

/// Voxel dump: two header comments, then `i j k hits` per occupied voxel in
/// index order.
pub fn format_voxels(grid: &OccupancyGrid3D) -> String {
    let o = grid.origin();
    let mut s = format!(
        "# resolution {}\n# origin {} {} {}\n",
        grid.resolution(),
        o.x,
        o.y,
        o.z
    );
    for (idx, hits) in grid.occupied() {
        s.push_str(&format!("{} {} {} {hits}\n", idx[0], idx[1], idx[2]));
    }
    s
}

pub fn write_map(out: &Path, grid: &Grid2D) -> Result<()> {
    let header = format!("P5\n{} {}\n255\n", grid.width, grid.height);
    let mut bytes = header.into_bytes();
    bytes.extend(grid.to_image());
    write_file(&out_path(out, files::MAP_PGM), &bytes)?;
    write_json(&out_path(out, files::MAP_META), &grid.meta())
}

pub fn read_map(out: &Path) -> Result<Grid2D> {
    let meta: MapMeta = read_json(&out_path(out, files::MAP_META))?;
    let path = out_path(out, files::MAP_PGM);
    let bytes = fs::read(&path).with_context(|| format!("reading {}", path.display()))?;
    match crate::io::decode_pnm(&bytes).with_context(|| format!("decoding {}", path.display()))? {
        crate::io::Pnm::Gray8(img) => Ok(Grid2D::from_image(
            &meta,
            img.width as usize,
            img.height as usize,
            &img.data,
        )),
        crate::io::Pnm::Gray16(_) => bail!("{} is not an 8-bit map", path.display()),
    }
}

pub fn read_trajectory(out: &Path) -> Result<Vec<(u32, Pose3)>> {
    let path = out_path(out, files::TRAJECTORY);
    let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    parse_poses(&text).with_context(|| format!("parsing {}", path.display()))
}

/// `simulate`: writes a dataset for `spec` (the built-in template when
/// `None`).
pub fn cmd_simulate(spec: Option<&Path>, seed: u64, out: &Path) -> Result<()> {
    let world = match spec {
        Some(p) => {
            let text = fs::read_to_string(p)
                .with_context(|| format!("reading world spec {}", p.display()))?;
            WorldSpec::from_json(&text)?
        }
        None => template_world(),
    };
    let ds = simulate_run(&world, seed)?;
    info!(
        "simulated {} keyframes, {} placards",
        ds.keyframes.len(),
        world.placards.len()
    );
    DatasetLayout::new(out).save(&ds)
}

#[derive(Debug, Clone, Serialize)]
pub struct MapSummary {
    pub keyframes: usize,
    pub merges: Vec<MergeRecord>,
    pub unmerged_submaps: Vec<u32>,
}

/// `map`: merged trajectory, merge log, voxel dump and 2D map.
pub fn cmd_map(dataset: &Path, cfg: &PipelineConfig, out: &Path) -> Result<MapSummary> {
    let layout = DatasetLayout::new(dataset);
    let keyframes = layout.read_trajectory()?;
    let losses = layout.read_losses()?;
    layout.check(&keyframes, &losses)?;
    let k = layout.read_intrinsics()?;
    let m = build_map(&keyframes, &losses, &layout, &k, cfg)?;
    let summary = MapSummary {
        keyframes: m.trajectory.len(),
        merges: m.merges.clone(),
        unmerged_submaps: m.unmerged.clone(),
    };
    write_file(
        &out_path(out, files::TRAJECTORY),
        format_poses(&m.trajectory).as_bytes(),
    )?;
    write_json(&out_path(out, files::MERGES), &summary)?;
    write_file(
        &out_path(out, files::VOXELS),
        format_voxels(&m.voxels).as_bytes(),
    )?;
    write_map(out, &m.map)?;
    Ok(summary)
}

/// `semantics`: observations along the merged trajectory.
pub fn cmd_semantics(
    dataset: &Path,
    cfg: &PipelineConfig,
    backend: Backend,
    out: &Path,
) -> Result<usize> {
    let layout = DatasetLayout::new(dataset);
    let k = layout.read_intrinsics()?;
    let trajectory = read_trajectory(out)?;
    let text = TextBackend::open(backend, &layout)?;
    let obs = extract_observations(&trajectory, &layout, &k, cfg, &text)?;
    write_json(&out_path(out, files::OBSERVATIONS), &obs)?;
    Ok(obs.len())
}

/// `aggregate`: landmarks and wall-rejected observations.
pub fn cmd_aggregate(cfg: &PipelineConfig, out: &Path) -> Result<Aggregation> {
    let obs: Vec<PlacardObservation> = read_json(&out_path(out, files::OBSERVATIONS))?;
    let map = read_map(out)?;
    let agg = aggregate(&obs, &map, &cfg.aggregation);
    write_json(&out_path(out, files::LANDMARKS), &agg.landmarks)?;
    write_json(&out_path(out, files::DISCARDED), &agg.discarded)?;
    Ok(agg)
}

/// `evaluate`: report against `<dataset>/groundtruth/placards.json`, matched
/// automatically or through `correspondence`.
pub fn cmd_evaluate(
    dataset: &Path,
    cfg: &PipelineConfig,
    correspondence: Option<&Path>,
    out: &Path,
) -> Result<EvalReport> {
    let layout = DatasetLayout::new(dataset);
    let gt = layout.gt_placards();
    if !gt.is_file() {
        bail!("ground truth not found: {}", gt.display());
    }
    let reference = layout.read_gt_placards()?;
    let landmarks: Vec<PlacardLandmark> = read_json(&out_path(out, files::LANDMARKS))?;
    let corr_text = match correspondence {
        Some(p) => Some(
            fs::read_to_string(p)
                .with_context(|| format!("reading correspondence {}", p.display()))?,
        ),
        None => None,
    };
    let origin = read_trajectory(out)?
        .first()
        .map(|(_, p)| [p.translation.x, p.translation.y])
        .unwrap_or([0.0, 0.0]);
    let report = score(&landmarks, &reference, corr_text.as_deref(), origin, cfg)?;
    write_file(
        &out_path(out, files::REPORT_TEXT),
        report.to_text().as_bytes(),
    )?;
    write_json(&out_path(out, files::REPORT_JSON), &report)?;
    write_file(
        &out_path(out, files::SCATTER),
        report.scatter_csv().as_bytes(),
    )?;
    Ok(report)
}

/// `render`: annotated map image. Discarded observations and the trajectory
/// are drawn when their files exist.
pub fn cmd_render(out: &Path) -> Result<()> {
    let map = read_map(out)?;
    let landmarks: Vec<PlacardLandmark> = read_json(&out_path(out, files::LANDMARKS))?;
    let discarded: Vec<PlacardObservation> = if out_path(out, files::DISCARDED).exists() {
        read_json(&out_path(out, files::DISCARDED))?
    } else {
        Vec::new()
    };
    let trajectory: Vec<[f64; 2]> = if out_path(out, files::TRAJECTORY).exists() {
        read_trajectory(out)?
            .iter()
            .map(|(_, p)| [p.translation.x, p.translation.y])
            .collect()
    } else {
        Vec::new()
    };
    let canvas = render_map(&map, &landmarks, &discarded, &trajectory);
    write_file(
        &out_path(out, files::MAP_IMAGE),
        &encode_ppm(canvas.width, canvas.height, &canvas.pixels),
    )
}
