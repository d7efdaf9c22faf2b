use super::PixelRect;

/// 8-bit single-channel image, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    pub width: u32,
    pub height: u32,
    pub data: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: u32, height: u32) -> Self {
        Self::filled(width, height, 0)
    }

    pub fn filled(width: u32, height: u32, value: u8) -> Self {
        Self {
            width,
            height,
            data: vec![value; (width * height) as usize],
        }
    }

    pub fn get(&self, u: u32, v: u32) -> u8 {
        self.data[(v * self.width + u) as usize]
    }

    pub fn set(&mut self, u: u32, v: u32, value: u8) {
        let w = self.width;
        self.data[(v * w + u) as usize] = value;
    }

    pub fn is_empty(&self) -> bool {
        self.width == 0 || self.height == 0
    }

    /// Copy of the pixels inside `rect`, clipped to the image.
    pub fn crop(&self, rect: PixelRect) -> GrayImage {
        let u1 = rect.u1.min(self.width);
        let v1 = rect.v1.min(self.height);
        let u0 = rect.u0.min(u1);
        let v0 = rect.v0.min(v1);
        let mut out = GrayImage::new(u1 - u0, v1 - v0);
        for v in v0..v1 {
            let src = &self.data[(v * self.width + u0) as usize..(v * self.width + u1) as usize];
            let dst_start = ((v - v0) * out.width) as usize;
            out.data[dst_start..dst_start + src.len()].copy_from_slice(src);
        }
        out
    }

    /// Bilinear sample at continuous pixel coordinates; coordinates are
    /// clamped to the image so borders extend outward.
    pub fn sample_bilinear(&self, x: f64, y: f64) -> f64 {
        let max_x = (self.width - 1) as f64;
        let max_y = (self.height - 1) as f64;
        let x = x.clamp(0.0, max_x);
        let y = y.clamp(0.0, max_y);
        let x0 = x.floor();
        let y0 = y.floor();
        let fx = x - x0;
        let fy = y - y0;
        let (x0, y0) = (x0 as u32, y0 as u32);
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let p00 = self.get(x0, y0) as f64;
        let p10 = self.get(x1, y0) as f64;
        let p01 = self.get(x0, y1) as f64;
        let p11 = self.get(x1, y1) as f64;
        let top = p00 + (p10 - p00) * fx;
        let bottom = p01 + (p11 - p01) * fx;
        top + (bottom - top) * fy
    }
}

/// ITU-R BT.601 luma of an 8-bit RGB triple.
pub fn luminance(r: u8, g: u8, b: u8) -> u8 {
    let y = 0.299 * r as f64 + 0.587 * g as f64 + 0.114 * b as f64;
    y.round().clamp(0.0, 255.0) as u8
}
