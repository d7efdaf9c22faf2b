//! Annotated map images: occupancy grid, trajectory, landmarks with heading
//! ticks and the observations the wall test rejected.

use crate::aggregation::PlacardLandmark;
use crate::placards::PlacardObservation;
use crate::reconstruction::Grid2D;

pub const TRAJECTORY: [u8; 3] = [220, 30, 30];
pub const LANDMARK: [u8; 3] = [20, 40, 230];
pub const TICK: [u8; 3] = [0, 170, 230];
pub const DISCARDED: [u8; 3] = [255, 140, 0];

/// Half-width of a landmark dot and the radial extent of its tick, pixels.
pub const DOT_RADIUS: i64 = 2;
const TICK_START: f64 = 3.5;
const TICK_END: f64 = 11.0;

/// RGB raster, row 0 at the top (north).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Canvas {
    pub width: u32,
    pub height: u32,
    pub pixels: Vec<[u8; 3]>,
}

impl Canvas {
    pub fn get(&self, x: u32, y: u32) -> [u8; 3] {
        self.pixels[(y * self.width + x) as usize]
    }

    fn put(&mut self, x: i64, y: i64, c: [u8; 3]) {
        if x >= 0 && y >= 0 && x < self.width as i64 && y < self.height as i64 {
            self.pixels[(y * self.width as i64 + x) as usize] = c;
        }
    }

    fn line(&mut self, a: (f64, f64), b: (f64, f64), c: [u8; 3]) {
        let n = ((b.0 - a.0).abs().max((b.1 - a.1).abs()).ceil() as usize).max(1);
        for i in 0..=n {
            let f = i as f64 / n as f64;
            let x = a.0 + f * (b.0 - a.0);
            let y = a.1 + f * (b.1 - a.1);
            self.put(x.floor() as i64, y.floor() as i64, c);
        }
    }

    /// Number of 8-connected regions of exactly colour `c`. Lines are
    /// rasterized with diagonal steps, so each stays one region.
    pub fn count_regions(&self, c: [u8; 3]) -> usize {
        let (w, h) = (self.width as i64, self.height as i64);
        let mut seen = vec![false; (w * h) as usize];
        let mut regions = 0;
        for start in 0..(w * h) as usize {
            if seen[start] || self.pixels[start] != c {
                continue;
            }
            regions += 1;
            let mut stack = vec![start];
            seen[start] = true;
            while let Some(i) = stack.pop() {
                let (x, y) = (i as i64 % w, i as i64 / w);
                for dy in -1..=1 {
                    for dx in -1..=1 {
                        let (nx, ny) = (x + dx, y + dy);
                        if nx < 0 || ny < 0 || nx >= w || ny >= h {
                            continue;
                        }
                        let j = (ny * w + nx) as usize;
                        if !seen[j] && self.pixels[j] == c {
                            seen[j] = true;
                            stack.push(j);
                        }
                    }
                }
            }
        }
        regions
    }
}

/// Canvas pixel (column, row from the top) containing map point (x, y),
/// as continuous coordinates.
pub fn map_to_pixel(grid: &Grid2D, x: f64, y: f64) -> (f64, f64) {
    let u = (x - grid.origin_x) / grid.resolution;
    let v = grid.height as f64 - (y - grid.origin_y) / grid.resolution;
    (u, v)
}

/// One pixel per map cell. Drawing order: map, trajectory, discarded
/// observations (crosses), heading ticks, landmark dots.
pub fn render_map(
    grid: &Grid2D,
    landmarks: &[PlacardLandmark],
    discarded: &[PlacardObservation],
    trajectory: &[[f64; 2]],
) -> Canvas {
    let (w, h) = (grid.width as u32, grid.height as u32);
    let pixels = grid.to_image().into_iter().map(|g| [g, g, g]).collect();
    let mut canvas = Canvas {
        width: w,
        height: h,
        pixels,
    };
    for pair in trajectory.windows(2) {
        let a = map_to_pixel(grid, pair[0][0], pair[0][1]);
        let b = map_to_pixel(grid, pair[1][0], pair[1][1]);
        canvas.line(a, b, TRAJECTORY);
    }
    for o in discarded {
        let (u, v) = map_to_pixel(grid, o.position[0], o.position[1]);
        let (u, v) = (u.floor() as i64, v.floor() as i64);
        for d in -2..=2 {
            canvas.put(u + d, v + d, DISCARDED);
            canvas.put(u + d, v - d, DISCARDED);
        }
    }
    for l in landmarks {
        let (u, v) = map_to_pixel(grid, l.x, l.y);
        let (s, c) = l.theta_rad.sin_cos();
        // image rows grow southwards
        let a = (u + TICK_START * c, v - TICK_START * s);
        let b = (u + TICK_END * c, v - TICK_END * s);
        canvas.line(a, b, TICK);
    }
    for l in landmarks {
        let (u, v) = map_to_pixel(grid, l.x, l.y);
        let (u, v) = (u.floor() as i64, v.floor() as i64);
        for dv in -DOT_RADIUS..=DOT_RADIUS {
            for du in -DOT_RADIUS..=DOT_RADIUS {
                canvas.put(u + du, v + dv, LANDMARK);
            }
        }
    }
    canvas
}
