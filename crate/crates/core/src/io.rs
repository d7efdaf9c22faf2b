//! On-disk dataset layout and file formats.
//!
//! ```text
//! <root>/intrinsics.json          depth camera model
//! <root>/trajectory.txt           keyframe_id map_id tx ty tz qx qy qz qw
//! <root>/losses.txt               last_kf_id origin_kf_id
//! <root>/depth/<id>.pgm           16-bit P5, raw depth units
//! <root>/color/<id>.pgm           8-bit P5 (P6 is accepted and converted)
//! <root>/detections/<id>.json     [{"bbox": [u0, v0, u1, v1], "confidence": c}]
//! <root>/groundtruth/placards.json, trajectory.txt, correspondence.csv
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::evaluation::ReferencePlacard;
use crate::geometry::{luminance, CameraIntrinsics, DepthImage, GrayImage, Pose3};
use crate::mapgraph::{FrameStore, Keyframe, LossEvent, MapError};
use crate::placards::Detection;

/// Decoded portable anymap.
#[derive(Debug, Clone, PartialEq)]
pub enum Pnm {
    Gray8(GrayImage),
    Gray16(DepthImage),
}

fn header_tokens(bytes: &[u8], count: usize) -> Result<(Vec<String>, usize)> {
    let mut tokens = Vec::new();
    let mut i = 0;
    while tokens.len() < count {
        while i < bytes.len() && bytes[i].is_ascii_whitespace() {
            i += 1;
        }
        if i < bytes.len() && bytes[i] == b'#' {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
            continue;
        }
        let start = i;
        while i < bytes.len() && !bytes[i].is_ascii_whitespace() {
            i += 1;
        }
        ensure!(i > start, "truncated header");
        tokens.push(String::from_utf8_lossy(&bytes[start..i]).into_owned());
    }
    // exactly one whitespace byte separates the header from the raster
    ensure!(i < bytes.len(), "missing raster");
    Ok((tokens, i + 1))
}

/// Parses binary PGM (8 or 16 bit) and PPM (8 bit, converted to grey).
pub fn decode_pnm(bytes: &[u8]) -> Result<Pnm> {
    let (tok, offset) = header_tokens(bytes, 4)?;
    let width: u32 = tok[1].parse().context("bad width")?;
    let height: u32 = tok[2].parse().context("bad height")?;
    let maxval: u32 = tok[3].parse().context("bad maxval")?;
    ensure!(
        (1..=65535).contains(&maxval),
        "maxval {maxval} out of range"
    );
    let data = &bytes[offset..];
    let n = width as usize * height as usize;
    match (tok[0].as_str(), maxval > 255) {
        ("P5", false) => {
            ensure!(data.len() >= n, "raster has {} of {n} bytes", data.len());
            Ok(Pnm::Gray8(GrayImage {
                width,
                height,
                data: data[..n].to_vec(),
            }))
        }
        ("P5", true) => {
            ensure!(
                data.len() >= 2 * n,
                "raster has {} of {} bytes",
                data.len(),
                2 * n
            );
            let mut img = DepthImage::new(width, height);
            for (i, px) in img.data.iter_mut().enumerate() {
                *px = u16::from_be_bytes([data[2 * i], data[2 * i + 1]]);
            }
            Ok(Pnm::Gray16(img))
        }
        ("P6", false) => {
            ensure!(
                data.len() >= 3 * n,
                "raster has {} of {} bytes",
                data.len(),
                3 * n
            );
            Ok(Pnm::Gray8(GrayImage {
                width,
                height,
                data: data[..3 * n]
                    .chunks_exact(3)
                    .map(|c| luminance(c[0], c[1], c[2]))
                    .collect(),
            }))
        }
        (magic, _) => bail!("unsupported image type {magic} (maxval {maxval})"),
    }
}

pub fn encode_pgm8(img: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend_from_slice(&img.data);
    out
}

pub fn encode_pgm16(img: &DepthImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n65535\n", img.width, img.height).into_bytes();
    for d in &img.data {
        out.extend_from_slice(&d.to_be_bytes());
    }
    out
}

pub fn encode_ppm(width: u32, height: u32, rgb: &[[u8; 3]]) -> Vec<u8> {
    let mut out = format!("P6\n{width} {height}\n255\n").into_bytes();
    for px in rgb {
        out.extend_from_slice(px);
    }
    out
}

pub fn read_depth(path: &Path) -> Result<DepthImage> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    match decode_pnm(&bytes).with_context(|| format!("decoding {}", path.display()))? {
        Pnm::Gray16(d) => Ok(d),
        Pnm::Gray8(_) => bail!("{} is not a 16-bit depth image", path.display()),
    }
}

pub fn read_gray(path: &Path) -> Result<GrayImage> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    match decode_pnm(&bytes).with_context(|| format!("decoding {}", path.display()))? {
        Pnm::Gray8(g) => Ok(g),
        Pnm::Gray16(_) => bail!("{} is not an 8-bit image", path.display()),
    }
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_file(path, text.as_bytes())
}

/// Keyframe pose as read from a trajectory file.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KeyframeRecord {
    pub id: u32,
    pub map_id: u32,
    pub pose: Pose3,
}

fn pose_fields(p: &Pose3) -> String {
    let t = p.translation;
    let q = p.quaternion_xyzw();
    format!(
        "{} {} {} {} {} {} {}",
        t.x, t.y, t.z, q[0], q[1], q[2], q[3]
    )
}

fn parse_pose(fields: &[&str]) -> Result<Pose3> {
    let v = fields
        .iter()
        .map(|f| {
            f.parse::<f64>()
                .with_context(|| format!("bad number {f:?}"))
        })
        .collect::<Result<Vec<f64>>>()?;
    ensure!(v.len() == 7, "expected 7 pose values, got {}", v.len());
    ensure!(v.iter().all(|x| x.is_finite()), "non-finite pose value");
    let qn = (v[3] * v[3] + v[4] * v[4] + v[5] * v[5] + v[6] * v[6]).sqrt();
    ensure!(qn > 1e-6, "zero quaternion");
    Ok(Pose3::from_parts(
        [v[0], v[1], v[2]],
        [v[3], v[4], v[5], v[6]],
    ))
}

fn data_lines(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines().enumerate().filter_map(|(n, l)| {
        let l = l.trim();
        (!l.is_empty() && !l.starts_with('#')).then(|| (n + 1, l.split_whitespace().collect()))
    })
}

pub fn format_trajectory(records: &[KeyframeRecord]) -> String {
    let mut s = String::new();
    for r in records {
        let _ = writeln!(s, "{} {} {}", r.id, r.map_id, pose_fields(&r.pose));
    }
    s
}

pub fn parse_trajectory(text: &str) -> Result<Vec<KeyframeRecord>> {
    data_lines(text)
        .map(|(n, f)| {
            ensure!(f.len() == 9, "line {n}: expected 9 fields, got {}", f.len());
            Ok(KeyframeRecord {
                id: f[0]
                    .parse()
                    .with_context(|| format!("line {n}: bad keyframe id"))?,
                map_id: f[1]
                    .parse()
                    .with_context(|| format!("line {n}: bad map id"))?,
                pose: parse_pose(&f[2..]).with_context(|| format!("line {n}"))?,
            })
        })
        .collect()
}

/// Poses without a map column: `keyframe_id tx ty tz qx qy qz qw`.
pub fn format_poses(poses: &[(u32, Pose3)]) -> String {
    let mut s = String::new();
    for (id, p) in poses {
        let _ = writeln!(s, "{id} {}", pose_fields(p));
    }
    s
}

pub fn parse_poses(text: &str) -> Result<Vec<(u32, Pose3)>> {
    data_lines(text)
        .map(|(n, f)| {
            ensure!(f.len() == 8, "line {n}: expected 8 fields, got {}", f.len());
            let id = f[0]
                .parse()
                .with_context(|| format!("line {n}: bad keyframe id"))?;
            Ok((
                id,
                parse_pose(&f[1..]).with_context(|| format!("line {n}"))?,
            ))
        })
        .collect()
}

pub fn format_losses(losses: &[LossEvent]) -> String {
    let mut s = String::new();
    for l in losses {
        let _ = writeln!(s, "{} {}", l.last_keyframe, l.origin_keyframe);
    }
    s
}

pub fn parse_losses(text: &str) -> Result<Vec<LossEvent>> {
    data_lines(text)
        .map(|(n, f)| {
            ensure!(f.len() == 2, "line {n}: expected 2 fields, got {}", f.len());
            Ok(LossEvent {
                last_keyframe: f[0].parse().with_context(|| format!("line {n}: bad id"))?,
                origin_keyframe: f[1].parse().with_context(|| format!("line {n}: bad id"))?,
            })
        })
        .collect()
}

/// Per-keyframe frames by id.
pub trait FrameSource: Sync {
    fn depth(&self, id: u32) -> Result<DepthImage>;
    fn color(&self, id: u32) -> Result<GrayImage>;
    fn detections(&self, id: u32) -> Result<Vec<Detection>>;
}

/// Adapts a [`FrameSource`] to the registry's depth lookup.
pub struct DepthStore<'a>(pub &'a dyn FrameSource);

impl FrameStore for DepthStore<'_> {
    fn depth(&self, keyframe_id: u32) -> std::result::Result<DepthImage, MapError> {
        self.0
            .depth(keyframe_id)
            .map_err(|e| MapError::Io(format!("{e:#}")))
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct GroundTruth {
    pub placards: Vec<ReferencePlacard>,
    /// World poses (`world_from_camera`) of every keyframe.
    pub trajectory: Vec<(u32, Pose3)>,
}

/// A complete recording held in memory.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub intrinsics: CameraIntrinsics,
    pub keyframes: Vec<KeyframeRecord>,
    pub losses: Vec<LossEvent>,
    pub depth: BTreeMap<u32, DepthImage>,
    pub color: BTreeMap<u32, GrayImage>,
    pub detections: BTreeMap<u32, Vec<Detection>>,
    pub groundtruth: Option<GroundTruth>,
}

impl FrameSource for Dataset {
    fn depth(&self, id: u32) -> Result<DepthImage> {
        self.depth
            .get(&id)
            .cloned()
            .with_context(|| format!("no depth frame for keyframe {id}"))
    }

    fn color(&self, id: u32) -> Result<GrayImage> {
        self.color
            .get(&id)
            .cloned()
            .with_context(|| format!("no colour frame for keyframe {id}"))
    }

    fn detections(&self, id: u32) -> Result<Vec<Detection>> {
        Ok(self.detections.get(&id).cloned().unwrap_or_default())
    }
}

/// Paths of a dataset directory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetLayout {
    pub root: PathBuf,
}

impl DatasetLayout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn intrinsics(&self) -> PathBuf {
        self.root.join("intrinsics.json")
    }

    pub fn trajectory(&self) -> PathBuf {
        self.root.join("trajectory.txt")
    }

    pub fn losses(&self) -> PathBuf {
        self.root.join("losses.txt")
    }

    pub fn depth(&self, id: u32) -> PathBuf {
        self.root.join("depth").join(format!("{id}.pgm"))
    }

    pub fn color(&self, id: u32) -> PathBuf {
        self.root.join("color").join(format!("{id}.pgm"))
    }

    pub fn detections(&self, id: u32) -> PathBuf {
        self.root.join("detections").join(format!("{id}.json"))
    }

    pub fn ocr_dir(&self) -> PathBuf {
        self.root.join("ocr")
    }

    pub fn gt_placards(&self) -> PathBuf {
        self.root.join("groundtruth").join("placards.json")
    }

    pub fn gt_trajectory(&self) -> PathBuf {
        self.root.join("groundtruth").join("trajectory.txt")
    }

    pub fn gt_correspondence(&self) -> PathBuf {
        self.root.join("groundtruth").join("correspondence.csv")
    }

    pub fn read_intrinsics(&self) -> Result<CameraIntrinsics> {
        let k: CameraIntrinsics = read_json(&self.intrinsics())?;
        k.validate()
            .with_context(|| format!("invalid {}", self.intrinsics().display()))?;
        Ok(k)
    }

    pub fn read_trajectory(&self) -> Result<Vec<KeyframeRecord>> {
        let path = self.trajectory();
        let text =
            fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
        parse_trajectory(&text).with_context(|| format!("parsing {}", path.display()))
    }

    /// Loss events; a missing file means no losses.
    pub fn read_losses(&self) -> Result<Vec<LossEvent>> {
        let path = self.losses();
        if !path.exists() {
            return Ok(Vec::new());
        }
        let text =
            fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
        parse_losses(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn read_gt_placards(&self) -> Result<Vec<ReferencePlacard>> {
        read_json(&self.gt_placards())
    }

    /// Checks that every keyframe has a depth frame and every loss names
    /// known keyframes.
    pub fn check(&self, keyframes: &[KeyframeRecord], losses: &[LossEvent]) -> Result<()> {
        for kf in keyframes {
            let p = self.depth(kf.id);
            ensure!(p.is_file(), "missing depth frame {}", p.display());
        }
        for l in losses {
            for id in [l.last_keyframe, l.origin_keyframe] {
                ensure!(
                    keyframes.iter().any(|k| k.id == id),
                    "loss event names unknown keyframe {id}"
                );
            }
        }
        Ok(())
    }

    /// Writes a dataset, replacing any existing files of the same names.
    pub fn save(&self, ds: &Dataset) -> Result<()> {
        write_json(&self.intrinsics(), &ds.intrinsics)?;
        write_file(
            &self.trajectory(),
            format_trajectory(&ds.keyframes).as_bytes(),
        )?;
        write_file(&self.losses(), format_losses(&ds.losses).as_bytes())?;
        for (id, d) in &ds.depth {
            write_file(&self.depth(*id), &encode_pgm16(d))?;
        }
        for (id, c) in &ds.color {
            write_file(&self.color(*id), &encode_pgm8(c))?;
        }
        for (id, d) in &ds.detections {
            write_json(&self.detections(*id), d)?;
        }
        if let Some(gt) = &ds.groundtruth {
            write_json(&self.gt_placards(), &gt.placards)?;
            write_file(
                &self.gt_trajectory(),
                format_poses(&gt.trajectory).as_bytes(),
            )?;
        }
        Ok(())
    }

    /// Reads the whole dataset into memory.
    pub fn load(&self) -> Result<Dataset> {
        let keyframes = self.read_trajectory()?;
        let losses = self.read_losses()?;
        self.check(&keyframes, &losses)?;
        let mut ds = Dataset {
            intrinsics: self.read_intrinsics()?,
            keyframes,
            losses,
            depth: BTreeMap::new(),
            color: BTreeMap::new(),
            detections: BTreeMap::new(),
            groundtruth: None,
        };
        for kf in &ds.keyframes {
            ds.depth.insert(kf.id, FrameSource::depth(self, kf.id)?);
            if self.color(kf.id).exists() {
                ds.color.insert(kf.id, FrameSource::color(self, kf.id)?);
            }
            let dets = FrameSource::detections(self, kf.id)?;
            if self.detections(kf.id).exists() {
                ds.detections.insert(kf.id, dets);
            }
        }
        if self.gt_placards().exists() {
            let traj = if self.gt_trajectory().exists() {
                let path = self.gt_trajectory();
                let text = fs::read_to_string(&path)?;
                parse_poses(&text).with_context(|| format!("parsing {}", path.display()))?
            } else {
                Vec::new()
            };
            ds.groundtruth = Some(GroundTruth {
                placards: self.read_gt_placards()?,
                trajectory: traj,
            });
        }
        Ok(ds)
    }
}

impl FrameSource for DatasetLayout {
    fn depth(&self, id: u32) -> Result<DepthImage> {
        read_depth(&DatasetLayout::depth(self, id))
    }

    fn color(&self, id: u32) -> Result<GrayImage> {
        read_gray(&DatasetLayout::color(self, id))
    }

    /// A missing detection file means no detections.
    fn detections(&self, id: u32) -> Result<Vec<Detection>> {
        let path = DatasetLayout::detections(self, id);
        if !path.exists() {
            return Ok(Vec::new());
        }
        read_json(&path)
    }
}

/// Keyframes for the submap registry, detections attached.
pub fn registry_keyframes(
    records: &[KeyframeRecord],
    frames: &dyn FrameSource,
) -> Result<Vec<Keyframe>> {
    records
        .iter()
        .map(|r| {
            Ok(Keyframe {
                id: r.id,
                map_id: r.map_id,
                pose: r.pose,
                detections: frames.detections(r.id)?,
            })
        })
        .collect()
}
