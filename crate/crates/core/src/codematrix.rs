//! Binary code-matrix glyphs used as a stand-in for printed placard text.
//!
//! A placard face is a square grid of [`GRID`]×[`GRID`] cells with a dark
//! quiet border. Each text line becomes one horizontal *band* of seven cell
//! rows:
//!
//! ```text
//! row 0    ███████████   solid bar
//! rows 1-5 █ b b b b █   one column per character, 5 bits MSB first
//! row 6    █ █ █ █ █ █   timing track, light on even columns
//! ```
//!
//! Guard columns at both ends are light on every row. The column count is
//! always odd (a zero "padding" character is appended when needed) so the
//! timing track starts and ends light and the number of light runs gives the
//! column count. Decoding needs no prior knowledge of scale.

use thiserror::Error;

use crate::geometry::{GrayImage, PixelRect};

/// Cells per placard side.
pub const GRID: usize = 17;
/// Cell rows per band.
pub const BAND_ROWS: usize = 7;
/// At most two bands fit on a face.
pub const MAX_LINES: usize = 2;
/// Band columns are capped by the quiet border: guards + characters ≤ 15.
pub const MAX_LINE_CHARS: usize = GRID - 4;

/// Symbols with 5-bit codes `1..=31`; code 0 is padding.
pub const ALPHABET: &str = "0123456789.ABCDEFGHILMNOPRSTUVW";

/// Default grey levels of a rendered placard.
pub const DARK: u8 = 30;
pub const LIGHT: u8 = 230;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CodeError {
    #[error("character {0:?} has no code")]
    UnsupportedChar(char),
    #[error("line {0:?} is longer than {MAX_LINE_CHARS} characters")]
    LineTooLong(String),
    #[error("{0} lines do not fit on a placard (max {MAX_LINES})")]
    TooManyLines(usize),
    #[error("empty text line")]
    EmptyLine,
}

fn symbol_code(c: char) -> Option<u8> {
    ALPHABET.chars().position(|a| a == c).map(|i| i as u8 + 1)
}

fn code_symbol(code: u8) -> Option<char> {
    if code == 0 {
        return None;
    }
    ALPHABET.chars().nth(code as usize - 1)
}

/// Splits a placard's text into code lines: one line per word of the
/// label, followed by the caption lines.
pub fn text_lines(label: &str, caption: &[String]) -> Vec<String> {
    label
        .split_whitespace()
        .map(str::to_string)
        .chain(caption.iter().cloned())
        .collect()
}

/// Cell pattern of one placard face; `true` is a light cell.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodeMatrix {
    cells: Vec<bool>,
    bar_rows: Vec<usize>,
}

impl CodeMatrix {
    pub fn encode<S: AsRef<str>>(lines: &[S]) -> Result<CodeMatrix, CodeError> {
        if lines.len() > MAX_LINES {
            return Err(CodeError::TooManyLines(lines.len()));
        }
        let mut cells = vec![false; GRID * GRID];
        let mut bar_rows = Vec::with_capacity(lines.len());
        let first_row = if lines.len() == 1 {
            (GRID - BAND_ROWS) / 2
        } else {
            1
        };
        for (li, line) in lines.iter().enumerate() {
            let line = line.as_ref();
            if line.is_empty() {
                return Err(CodeError::EmptyLine);
            }
            let mut codes = line
                .chars()
                .map(|c| symbol_code(c).ok_or(CodeError::UnsupportedChar(c)))
                .collect::<Result<Vec<u8>, _>>()?;
            if codes.len() > MAX_LINE_CHARS {
                return Err(CodeError::LineTooLong(line.to_string()));
            }
            if codes.len() % 2 == 0 {
                codes.push(0);
            }
            let ncols = codes.len() + 2;
            let col0 = (GRID - ncols) / 2;
            let row0 = first_row + li * (BAND_ROWS + 1);
            bar_rows.push(row0);
            let mut set = |r: usize, c: usize| cells[(row0 + r) * GRID + col0 + c] = true;
            for c in 0..ncols {
                set(0, c);
                if c % 2 == 0 {
                    set(BAND_ROWS - 1, c);
                }
            }
            for r in 0..BAND_ROWS {
                set(r, 0);
                set(r, ncols - 1);
            }
            for (ci, code) in codes.iter().enumerate() {
                for bit in 0..5 {
                    if code & (1 << (4 - bit)) != 0 {
                        set(1 + bit, ci + 1);
                    }
                }
            }
        }
        Ok(CodeMatrix { cells, bar_rows })
    }

    pub fn line_count(&self) -> usize {
        self.bar_rows.len()
    }

    pub fn cell(&self, row: usize, col: usize) -> bool {
        self.cells[row * GRID + col]
    }

    /// Unreadable variant: the solid bars are cleared so no band survives.
    pub fn corrupted(&self) -> CodeMatrix {
        let mut out = self.clone();
        for &row in &self.bar_rows {
            for c in 0..GRID {
                out.cells[row * GRID + c] = false;
            }
        }
        out
    }

    /// Light/dark at face coordinates `s` (rightward) and `t` (downward),
    /// both in `[0, 1)`.
    pub fn is_light(&self, s: f64, t: f64) -> bool {
        if !(0.0..1.0).contains(&s) || !(0.0..1.0).contains(&t) {
            return false;
        }
        let c = (s * GRID as f64) as usize;
        let r = (t * GRID as f64) as usize;
        self.cell(r.min(GRID - 1), c.min(GRID - 1))
    }

    /// Head-on rendering with `px_per_cell` pixels per cell.
    pub fn render(&self, px_per_cell: u32, light: u8, dark: u8) -> GrayImage {
        let side = px_per_cell * GRID as u32;
        let mut img = GrayImage::filled(side, side, dark);
        for v in 0..side {
            for u in 0..side {
                let r = (v / px_per_cell) as usize;
                let c = (u / px_per_cell) as usize;
                if self.cell(r, c) {
                    img.set(u, v, light);
                }
            }
        }
        img
    }
}

/// Located band in a binary image with its decoded text, when readable.
#[derive(Debug, Clone, PartialEq)]
pub struct Band {
    pub rect: PixelRect,
    pub cell_size: f64,
    pub columns: usize,
    pub text: Option<String>,
}

fn white(img: &GrayImage, u: u32, v: u32) -> bool {
    img.get(u, v) >= 128
}

/// Bounding boxes of 4-connected white components, in raster order of their
/// first pixel.
fn components(img: &GrayImage) -> Vec<PixelRect> {
    let (w, h) = (img.width as usize, img.height as usize);
    let mut label = vec![false; w * h];
    let mut out = Vec::new();
    let mut stack = Vec::new();
    for start in 0..w * h {
        if label[start] || img.data[start] < 128 {
            continue;
        }
        label[start] = true;
        stack.push(start);
        let (mut u0, mut v0, mut u1, mut v1) = (usize::MAX, usize::MAX, 0, 0);
        while let Some(i) = stack.pop() {
            let (u, v) = (i % w, i / w);
            u0 = u0.min(u);
            v0 = v0.min(v);
            u1 = u1.max(u);
            v1 = v1.max(v);
            let mut push = |j: usize| {
                if !label[j] && img.data[j] >= 128 {
                    label[j] = true;
                    stack.push(j);
                }
            };
            if u > 0 {
                push(i - 1);
            }
            if u + 1 < w {
                push(i + 1);
            }
            if v > 0 {
                push(i - w);
            }
            if v + 1 < h {
                push(i + w);
            }
        }
        out.push(PixelRect::new(
            u0 as u32,
            v0 as u32,
            u1 as u32 + 1,
            v1 as u32 + 1,
        ));
    }
    out
}

/// Majority vote of a 3×3 sample pattern around a cell centre.
fn sample_cell(img: &GrayImage, x: f64, y: f64, cw: f64, ch: f64) -> bool {
    let mut votes = 0;
    for dy in [-0.25, 0.0, 0.25] {
        for dx in [-0.25, 0.0, 0.25] {
            let u = (x + dx * cw).floor().clamp(0.0, (img.width - 1) as f64) as u32;
            let v = (y + dy * ch).floor().clamp(0.0, (img.height - 1) as f64) as u32;
            if white(img, u, v) {
                votes += 1;
            }
        }
    }
    votes >= 5
}

/// Counts white runs along row `y` between `x0..x1`, ignoring runs of
/// either colour shorter than `min_run` pixels.
fn timing_runs(img: &GrayImage, y: u32, x0: u32, x1: u32, min_run: usize) -> usize {
    let mut runs: Vec<(bool, usize)> = Vec::new();
    for u in x0..x1 {
        let b = white(img, u, y);
        match runs.last_mut() {
            Some((c, n)) if *c == b => *n += 1,
            _ => runs.push((b, 1)),
        }
    }
    // absorb short runs into their predecessor
    let mut merged: Vec<(bool, usize)> = Vec::new();
    for (c, n) in runs {
        if n < min_run {
            if let Some(last) = merged.last_mut() {
                last.1 += n;
                continue;
            }
        }
        match merged.last_mut() {
            Some((lc, ln)) if *lc == c => *ln += n,
            _ => merged.push((c, n)),
        }
    }
    merged.iter().filter(|(c, _)| *c).count()
}

fn read_band(img: &GrayImage, rect: PixelRect) -> Option<Band> {
    let (w, h) = (rect.width() as f64, rect.height() as f64);
    if rect.height() < BAND_ROWS as u32 || rect.width() < 3 {
        return None;
    }
    let ch = h / BAND_ROWS as f64;
    let aspect = w / ch;
    if !(2.0..=(MAX_LINE_CHARS + 2) as f64 * 1.5).contains(&aspect) {
        return None;
    }
    let ty = (rect.v0 as f64 + 6.5 * ch).floor() as u32;
    let runs = timing_runs(img, ty, rect.u0, rect.u1, ((ch / 3.0) as usize).max(1));
    if runs < 2 {
        return None;
    }
    let ncols = 2 * runs - 1;
    let cw = w / ncols as f64;
    if !(0.6..=1.6).contains(&(cw / ch)) {
        return None;
    }
    let bit = |r: usize, c: usize| {
        sample_cell(
            img,
            rect.u0 as f64 + (c as f64 + 0.5) * cw,
            rect.v0 as f64 + (r as f64 + 0.5) * ch,
            cw,
            ch,
        )
    };
    for c in 0..ncols {
        if !bit(0, c) || bit(BAND_ROWS - 1, c) != (c % 2 == 0) {
            return None;
        }
    }
    for r in 0..BAND_ROWS {
        if !bit(r, 0) || !bit(r, ncols - 1) {
            return None;
        }
    }
    let mut text = String::new();
    let mut padded = false;
    for c in 1..ncols - 1 {
        let mut code = 0u8;
        for b in 0..5 {
            if bit(1 + b, c) {
                code |= 1 << (4 - b);
            }
        }
        match code_symbol(code) {
            Some(sym) if !padded => text.push(sym),
            None if c == ncols - 2 && ncols % 2 == 1 => padded = true,
            _ => {
                return Some(Band {
                    rect,
                    cell_size: ch,
                    columns: ncols,
                    text: None,
                })
            }
        }
    }
    Some(Band {
        rect,
        cell_size: ch,
        columns: ncols,
        text: if text.is_empty() { None } else { Some(text) },
    })
}

/// Finds every structurally valid band in a binary image (pixels ≥ 128 are
/// white), top to bottom.
pub fn find_bands(binary: &GrayImage) -> Vec<Band> {
    let mut bands: Vec<Band> = components(binary)
        .into_iter()
        .filter_map(|r| read_band(binary, r))
        .collect();
    bands.sort_by_key(|b| (b.rect.v0, b.rect.u0));
    bands
}

/// Decodes all readable bands and joins their text with single spaces.
/// Returns an empty string when nothing decodes.
pub fn decode(binary: &GrayImage) -> String {
    find_bands(binary)
        .into_iter()
        .filter_map(|b| b.text)
        .collect::<Vec<_>>()
        .join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn binarize(img: &GrayImage, t: u8) -> GrayImage {
        GrayImage {
            width: img.width,
            height: img.height,
            data: img
                .data
                .iter()
                .map(|&p| if p >= t { 255 } else { 0 })
                .collect(),
        }
    }

    #[test]
    fn alphabet_has_31_symbols() {
        assert_eq!(ALPHABET.chars().count(), 31);
    }

    #[test]
    fn single_line_round_trip() {
        let m = CodeMatrix::encode(&["3.112"]).unwrap();
        let img = m.render(6, LIGHT, DARK);
        assert_eq!(decode(&binarize(&img, 128)), "3.112");
    }

    #[test]
    fn two_lines_round_trip_in_order() {
        let m = CodeMatrix::encode(&["GENDER", "INCLUSIVE"]).unwrap();
        let img = m.render(5, LIGHT, DARK);
        let bands = find_bands(&binarize(&img, 128));
        assert_eq!(bands.len(), 2);
        assert!(bands[0].rect.v0 < bands[1].rect.v0);
        assert_eq!(decode(&binarize(&img, 128)), "GENDER INCLUSIVE");
    }

    #[test]
    fn odd_and_even_lengths() {
        for s in ["1", "MEN", "STAIR", "STAIR2", "0123456789.AB"] {
            let m = CodeMatrix::encode(&[s]).unwrap();
            assert_eq!(decode(&binarize(&m.render(4, LIGHT, DARK), 128)), s);
        }
    }

    #[test]
    fn extreme_thresholds_destroy_code() {
        let img = CodeMatrix::encode(&["3.112"])
            .unwrap()
            .render(6, LIGHT, DARK);
        assert_eq!(decode(&binarize(&img, 250)), "");
        assert_eq!(decode(&binarize(&img, 5)), "");
    }

    #[test]
    fn corrupted_code_is_unreadable() {
        let m = CodeMatrix::encode(&["3.112"]).unwrap().corrupted();
        assert_eq!(decode(&binarize(&m.render(6, LIGHT, DARK), 128)), "");
    }

    #[test]
    fn blank_placard_has_no_bands() {
        let m = CodeMatrix::encode::<&str>(&[]).unwrap();
        assert!(find_bands(&binarize(&m.render(5, LIGHT, DARK), 128)).is_empty());
    }

    #[test]
    fn encode_errors() {
        assert_eq!(
            CodeMatrix::encode(&["3.1x2"]),
            Err(CodeError::UnsupportedChar('x'))
        );
        assert!(matches!(
            CodeMatrix::encode(&["A", "B", "C"]),
            Err(CodeError::TooManyLines(3))
        ));
        assert!(matches!(
            CodeMatrix::encode(&["01234567890123"]),
            Err(CodeError::LineTooLong(_))
        ));
    }

    #[test]
    fn lines_from_label_and_caption() {
        assert_eq!(
            text_lines("GENDER INCLUSIVE", &[]),
            vec!["GENDER", "INCLUSIVE"]
        );
        assert_eq!(text_lines("3.112", &["LAB".into()]), vec!["3.112", "LAB"]);
        assert!(text_lines("", &[]).is_empty());
    }
}
