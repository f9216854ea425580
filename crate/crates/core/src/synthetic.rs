//! Seeded synthetic imagery for tests, examples and benchmarks.
//!
//! Scenes are 8-bit luma rasters built from three ingredients that stress
//! super-resolution differently: thin glyph strokes, hard-edged shapes and
//! smooth gradients.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::raster::{Bands, Raster};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SceneKind {
    Glyphs,
    Edges,
    Gradients,
}

/// Uniform 8-bit noise.
pub fn noise_image(width: usize, height: usize, bands: Bands, seed: u64) -> Raster {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..width * height * bands.count()).map(|_| rng.gen::<u8>()).collect();
    Raster::from_u8(width, height, bands, data).expect("dimensions are consistent")
}

struct Canvas {
    w: usize,
    h: usize,
    px: Vec<f64>,
}

impl Canvas {
    fn new(w: usize, h: usize) -> Self {
        Canvas {
            w,
            h,
            px: vec![0.0; w * h],
        }
    }

    fn fill_with(&mut self, f: impl Fn(f64, f64) -> f64) {
        for y in 0..self.h {
            for x in 0..self.w {
                self.px[y * self.w + x] = f(x as f64, y as f64);
            }
        }
    }

    fn set(&mut self, x: isize, y: isize, v: f64) {
        if x >= 0 && y >= 0 && (x as usize) < self.w && (y as usize) < self.h {
            self.px[y as usize * self.w + x as usize] = v;
        }
    }

    fn stroke(&mut self, (x0, y0): (f64, f64), (x1, y1): (f64, f64), thick: usize, v: f64) {
        let steps = ((x1 - x0).abs().max((y1 - y0).abs()) * 2.0).ceil().max(1.0) as usize;
        for s in 0..=steps {
            let t = s as f64 / steps as f64;
            let cx = (x0 + t * (x1 - x0)).round() as isize;
            let cy = (y0 + t * (y1 - y0)).round() as isize;
            for dy in 0..thick as isize {
                for dx in 0..thick as isize {
                    self.set(cx + dx, cy + dy, v);
                }
            }
        }
    }

    fn into_raster(self) -> Raster {
        let data = self.px.iter().map(|&v| crate::raster::quantize(v)).collect();
        Raster::from_u8(self.w, self.h, Bands::Luma, data).expect("dimensions are consistent")
    }
}

fn background(c: &mut Canvas, rng: &mut ChaCha8Rng, amplitude: f64) {
    let base = rng.gen_range(60.0..190.0);
    let gx = rng.gen_range(-amplitude..amplitude) / c.w as f64;
    let gy = rng.gen_range(-amplitude..amplitude) / c.h as f64;
    c.fill_with(|x, y| base + gx * x + gy * y);
}

fn glyphs(c: &mut Canvas, rng: &mut ChaCha8Rng) {
    background(c, rng, 40.0);
    let cell_w = 10.0;
    let cell_h = 14.0;
    let cols = (c.w as f64 / cell_w) as usize;
    let rows = (c.h as f64 / cell_h) as usize;
    let dark = rng.gen_bool(0.5);
    for row in 0..rows {
        for col in 0..cols {
            if rng.gen_bool(0.25) {
                continue;
            }
            let ox = col as f64 * cell_w + 1.0;
            let oy = row as f64 * cell_h + 1.0;
            let ink = if dark {
                rng.gen_range(0.0..50.0)
            } else {
                rng.gen_range(205.0..255.0)
            };
            let thick = rng.gen_range(1..=2);
            // Letter-like shapes from strokes between points of a 3x3 grid.
            let node = |i: usize| (ox + (i % 3) as f64 * 3.5, oy + (i / 3) as f64 * 5.5);
            for _ in 0..rng.gen_range(2..=4) {
                let a = rng.gen_range(0..9);
                let b = rng.gen_range(0..9);
                c.stroke(node(a), node(b), thick, ink);
            }
        }
    }
}

fn edges(c: &mut Canvas, rng: &mut ChaCha8Rng) {
    background(c, rng, 30.0);
    let (w, h) = (c.w as f64, c.h as f64);
    for _ in 0..rng.gen_range(2..=4) {
        // Half-plane step edge through a random point.
        let angle = rng.gen_range(0.0..std::f64::consts::PI);
        let (nx, ny) = (angle.cos(), angle.sin());
        let (px, py) = (rng.gen_range(0.0..w), rng.gen_range(0.0..h));
        let step = rng.gen_range(-70.0..70.0);
        for y in 0..c.h {
            for x in 0..c.w {
                if (x as f64 - px) * nx + (y as f64 - py) * ny > 0.0 {
                    c.px[y * c.w + x] += step;
                }
            }
        }
    }
    for _ in 0..rng.gen_range(4..=9) {
        // Filled rectangles, a rough stand-in for roofs and vehicles.
        let rw = rng.gen_range(4.0..w / 3.0);
        let rh = rng.gen_range(4.0..h / 3.0);
        let x0 = rng.gen_range(0.0..w - rw);
        let y0 = rng.gen_range(0.0..h - rh);
        let v = rng.gen_range(0.0..255.0);
        for y in y0 as usize..(y0 + rh) as usize {
            for x in x0 as usize..(x0 + rw) as usize {
                c.px[y * c.w + x] = v;
            }
        }
    }
}

fn gradients(c: &mut Canvas, rng: &mut ChaCha8Rng) {
    let (w, h) = (c.w as f64, c.h as f64);
    let base = rng.gen_range(80.0..170.0);
    let waves: Vec<(f64, f64, f64, f64)> = (0..3)
        .map(|_| {
            (
                rng.gen_range(10.0..40.0),
                rng.gen_range(0.5..3.0) * std::f64::consts::TAU / w,
                rng.gen_range(0.5..3.0) * std::f64::consts::TAU / h,
                rng.gen_range(0.0..std::f64::consts::TAU),
            )
        })
        .collect();
    let blobs: Vec<(f64, f64, f64, f64)> = (0..4)
        .map(|_| {
            (
                rng.gen_range(0.0..w),
                rng.gen_range(0.0..h),
                rng.gen_range(4.0..16.0),
                rng.gen_range(-60.0..60.0),
            )
        })
        .collect();
    c.fill_with(|x, y| {
        let mut v = base;
        for &(amp, fx, fy, ph) in &waves {
            v += amp * (fx * x + fy * y + ph).sin();
        }
        for &(bx, by, r, amp) in &blobs {
            let d2 = (x - bx).powi(2) + (y - by).powi(2);
            v += amp * (-d2 / (2.0 * r * r)).exp();
        }
        v
    });
}

/// One square 8-bit luma scene of the requested kind.
pub fn scene(kind: SceneKind, size: usize, seed: u64) -> Raster {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut c = Canvas::new(size, size);
    match kind {
        SceneKind::Glyphs => glyphs(&mut c, &mut rng),
        SceneKind::Edges => edges(&mut c, &mut rng),
        SceneKind::Gradients => gradients(&mut c, &mut rng),
    }
    c.into_raster()
}

/// A corpus cycling glyph, edge and gradient scenes.
pub fn corpus(n: usize, size: usize, seed: u64) -> Vec<(SceneKind, Raster)> {
    const KINDS: [SceneKind; 3] = [SceneKind::Glyphs, SceneKind::Edges, SceneKind::Gradients];
    (0..n)
        .map(|i| {
            let kind = KINDS[i % 3];
            (
                kind,
                scene(kind, size, seed.wrapping_mul(1_000_003).wrapping_add(i as u64)),
            )
        })
        .collect()
}
