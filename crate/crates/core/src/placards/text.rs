use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use crate::codematrix;
use crate::geometry::{GrayImage, PixelRect};

/// Lowest, step and highest threshold of the binarization sweep.
pub const SWEEP_START: u8 = 5;
pub const SWEEP_STEP: u8 = 5;
pub const SWEEP_END: u8 = 250;

/// Thresholds 5, 10, ..., 250.
pub fn sweep_thresholds() -> impl Iterator<Item = u8> {
    (SWEEP_START..=SWEEP_END).step_by(SWEEP_STEP as usize)
}

/// Pixels at or above `threshold` become white (255), the rest black.
pub fn binarize(img: &GrayImage, threshold: u8) -> GrayImage {
    GrayImage {
        width: img.width,
        height: img.height,
        data: img
            .data
            .iter()
            .map(|&p| if p >= threshold { 255 } else { 0 })
            .collect(),
    }
}

/// One binary image per sweep threshold, in increasing threshold order.
pub fn binarize_sweep(img: &GrayImage) -> Vec<(u8, GrayImage)> {
    sweep_thresholds().map(|t| (t, binarize(img, t))).collect()
}

/// Where a transcription request comes from. External backends use it to
/// look up precomputed results.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OcrContext {
    pub keyframe_id: u32,
    pub detection_index: usize,
    pub line_index: usize,
    pub threshold: u8,
}

/// Splits a rectified placard into text-line boxes, top to bottom.
pub trait LineSegmenter: Send + Sync {
    fn segment(&self, rectified: &GrayImage) -> Vec<PixelRect>;
}

/// Reads the text in a binary line image. Empty means nothing was read.
pub trait Transcriber: Send + Sync {
    fn transcribe(&self, binary: &GrayImage, ctx: &OcrContext) -> String;
}

/// Treats the whole image as a single line.
#[derive(Debug, Clone, Copy, Default)]
pub struct NullSegmenter;

impl LineSegmenter for NullSegmenter {
    fn segment(&self, rectified: &GrayImage) -> Vec<PixelRect> {
        vec![PixelRect::new(0, 0, rectified.width, rectified.height)]
    }
}

/// Locates code-matrix bands at the image's mid-grey level and returns each
/// one padded by half a cell.
#[derive(Debug, Clone, Copy, Default)]
pub struct MockSegmenter;

impl LineSegmenter for MockSegmenter {
    fn segment(&self, rectified: &GrayImage) -> Vec<PixelRect> {
        if rectified.is_empty() {
            return Vec::new();
        }
        let lo = *rectified.data.iter().min().unwrap() as u16;
        let hi = *rectified.data.iter().max().unwrap() as u16;
        if hi == lo {
            return Vec::new();
        }
        let mid = ((lo + hi + 1) / 2) as u8;
        codematrix::find_bands(&binarize(rectified, mid))
            .into_iter()
            .map(|b| {
                let pad = (b.cell_size / 2.0).ceil() as u32;
                PixelRect::new(
                    b.rect.u0.saturating_sub(pad),
                    b.rect.v0.saturating_sub(pad),
                    (b.rect.u1 + pad).min(rectified.width),
                    (b.rect.v1 + pad).min(rectified.height),
                )
            })
            .collect()
    }
}

/// Never reads anything.
#[derive(Debug, Clone, Copy, Default)]
pub struct NullTranscriber;

impl Transcriber for NullTranscriber {
    fn transcribe(&self, _binary: &GrayImage, _ctx: &OcrContext) -> String {
        String::new()
    }
}

/// Decodes code-matrix glyphs.
#[derive(Debug, Clone, Copy, Default)]
pub struct MockTranscriber;

impl Transcriber for MockTranscriber {
    fn transcribe(&self, binary: &GrayImage, _ctx: &OcrContext) -> String {
        codematrix::decode(binary)
    }
}

/// Returns strings produced offline by an external recognizer, stored as
/// `ocr/<keyframe_id>.json` (a JSON list of strings, one per detection).
#[derive(Debug, Clone, Default)]
pub struct ExternalFileTranscriber {
    strings: BTreeMap<u32, Vec<String>>,
}

impl ExternalFileTranscriber {
    pub fn new(strings: BTreeMap<u32, Vec<String>>) -> Self {
        Self { strings }
    }

    /// Loads every `*.json` file in `dir`. A missing directory yields an
    /// empty transcriber.
    pub fn load(dir: &Path) -> anyhow::Result<Self> {
        use anyhow::Context;
        let mut strings = BTreeMap::new();
        if !dir.is_dir() {
            return Ok(Self::default());
        }
        for entry in fs::read_dir(dir).with_context(|| format!("reading {}", dir.display()))? {
            let path = entry?.path();
            if path.extension().and_then(|e| e.to_str()) != Some("json") {
                continue;
            }
            let Some(id) = path
                .file_stem()
                .and_then(|s| s.to_str())
                .and_then(|s| s.parse::<u32>().ok())
            else {
                continue;
            };
            let text =
                fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
            let list: Vec<String> = serde_json::from_str(&text)
                .with_context(|| format!("parsing {}", path.display()))?;
            strings.insert(id, list);
        }
        Ok(Self { strings })
    }
}

impl Transcriber for ExternalFileTranscriber {
    fn transcribe(&self, _binary: &GrayImage, ctx: &OcrContext) -> String {
        self.strings
            .get(&ctx.keyframe_id)
            .and_then(|l| l.get(ctx.detection_index))
            .cloned()
            .unwrap_or_default()
    }
}
