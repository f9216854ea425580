use rayon::prelude::*;

use super::{reflect, Raster};
use crate::{Error, Result};

/// Keys cubic convolution parameter (Catmull-Rom family).
pub const BICUBIC_A: f64 = -0.5;

/// Block-mean decimation. Each output sample is the mean of a
/// `factor`x`factor` input block; the GSD scales by `factor`.
pub fn downsample_area(img: &Raster, factor: usize) -> Result<Raster> {
    if factor < 2 {
        return Err(Error::invalid(format!("decimation factor must be >= 2, got {factor}")));
    }
    let (w, h) = (img.width(), img.height());
    if w % factor != 0 || h % factor != 0 {
        return Err(Error::invalid(format!(
            "{w}x{h} is not divisible by decimation factor {factor}"
        )));
    }
    let (ow, oh) = (w / factor, h / factor);
    let inv = 1.0 / (factor * factor) as f64;
    let planes = img
        .planes()
        .into_iter()
        .map(|plane| {
            let mut out = vec![0.0; ow * oh];
            out.par_chunks_mut(ow).enumerate().for_each(|(oy, row)| {
                for (ox, o) in row.iter_mut().enumerate() {
                    let first = plane[oy * factor * w + ox * factor];
                    let mut acc = 0.0;
                    for y in oy * factor..(oy + 1) * factor {
                        for x in ox * factor..(ox + 1) * factor {
                            acc += plane[y * w + x] - first;
                        }
                    }
                    *o = first + acc * inv;
                }
            });
            out
        })
        .collect();
    Ok(Raster::from_planes(ow, oh, planes)?.with_gsd(img.gsd_cm().map(|g| g * factor as f64)))
}

fn cubic_weight(d: f64) -> f64 {
    let a = BICUBIC_A;
    let d = d.abs();
    if d <= 1.0 {
        ((a + 2.0) * d - (a + 3.0)) * d * d + 1.0
    } else if d < 2.0 {
        ((a * d - 5.0 * a) * d + 8.0 * a) * d - 4.0 * a
    } else {
        0.0
    }
}

/// Source taps for one output coordinate.
#[derive(Debug, Clone, Copy)]
struct Taps {
    base: usize,
    idx: [usize; 4],
    w: [f64; 4],
}

fn taps_for_axis(n_in: usize, factor: usize) -> Vec<Taps> {
    (0..n_in * factor)
        .map(|o| {
            // Output sample o sits at input coordinate o / factor, so every
            // `factor`-th output lands exactly on an input sample.
            let src = o as f64 / factor as f64;
            let i0 = src.floor();
            let t = src - i0;
            let i0 = i0 as isize;
            let mut idx = [0; 4];
            let mut w = [0.0; 4];
            for k in 0..4 {
                let off = k as isize - 1;
                idx[k] = reflect(i0 + off, n_in);
                w[k] = cubic_weight(t - off as f64);
            }
            Taps {
                base: reflect(i0, n_in),
                idx,
                w,
            }
        })
        .collect()
}

impl Taps {
    fn apply(&self, line: impl Fn(usize) -> f64) -> f64 {
        let centre = line(self.base);
        let mut acc = 0.0;
        for k in 0..4 {
            acc += self.w[k] * (line(self.idx[k]) - centre);
        }
        centre + acc
    }
}

/// Bicubic upsampling by 2, 4 or 8 with reflect edges. The GSD divides by
/// `factor`.
pub fn upsample_bicubic(img: &Raster, factor: usize) -> Result<Raster> {
    if !matches!(factor, 2 | 4 | 8) {
        return Err(Error::invalid(format!("unsupported upsampling factor {factor}")));
    }
    let (w, h) = (img.width(), img.height());
    let (ow, oh) = (w * factor, h * factor);
    let xt = taps_for_axis(w, factor);
    let yt = taps_for_axis(h, factor);
    let planes = img
        .planes()
        .into_iter()
        .map(|plane| {
            let mut horiz = vec![0.0; ow * h];
            horiz.par_chunks_mut(ow).enumerate().for_each(|(y, row)| {
                let src = &plane[y * w..(y + 1) * w];
                for (o, t) in row.iter_mut().zip(&xt) {
                    *o = t.apply(|i| src[i]);
                }
            });
            let mut out = vec![0.0; ow * oh];
            out.par_chunks_mut(ow).enumerate().for_each(|(oy, row)| {
                let t = &yt[oy];
                for (x, o) in row.iter_mut().enumerate() {
                    *o = t.apply(|i| horiz[i * ow + x]);
                }
            });
            out
        })
        .collect();
    Ok(Raster::from_planes(ow, oh, planes)?.with_gsd(img.gsd_cm().map(|g| g / factor as f64)))
}
