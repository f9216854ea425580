use rayon::prelude::*;

use super::{reflect, Raster};
use crate::{Error, Result};

/// An odd-length, symmetric-about-center convolution kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel1D {
    taps: Vec<f64>,
    normalized: bool,
}

impl Kernel1D {
    /// Gaussian taps sampled from the continuous density with radius
    /// `ceil(3 sigma)`, not renormalized.
    pub fn gaussian_unnormalized(sigma: f64) -> Result<Self> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::invalid(format!("gaussian sigma must be positive, got {sigma}")));
        }
        let radius = (3.0 * sigma).ceil() as isize;
        let norm = 1.0 / (sigma * (2.0 * std::f64::consts::PI).sqrt());
        let taps = (-radius..=radius)
            .map(|i| {
                let x = i as f64;
                norm * (-(x * x) / (2.0 * sigma * sigma)).exp()
            })
            .collect();
        Ok(Kernel1D {
            taps,
            normalized: false,
        })
    }

    /// Gaussian taps renormalized to sum to one.
    pub fn gaussian(sigma: f64) -> Result<Self> {
        Ok(Self::gaussian_unnormalized(sigma)?.normalize())
    }

    pub fn normalize(mut self) -> Self {
        let sum: f64 = self.taps.iter().sum();
        for t in &mut self.taps {
            *t /= sum;
        }
        self.normalized = true;
        self
    }

    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    pub fn radius(&self) -> usize {
        self.taps.len() / 2
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    /// Convolves one line with reflect padding.
    ///
    /// Written as an offset from the centre sample so flat input stays
    /// bit-exact; identical to `sum(w * x)` for a normalized kernel.
    fn apply_line(&self, src: &[f64], stride: usize, n: usize, out: &mut [f64]) {
        let r = self.radius() as isize;
        for (i, o) in out.iter_mut().enumerate() {
            let centre = src[i * stride];
            let mut acc = 0.0;
            for (k, w) in self.taps.iter().enumerate() {
                let p = reflect(i as isize + k as isize - r, n);
                acc += w * (src[p * stride] - centre);
            }
            *o = centre + acc;
        }
    }
}

/// Separable Gaussian blur with reflect padding. Output is real-valued with
/// the same dimensions and GSD as the input.
pub fn gaussian_blur(img: &Raster, sigma: f64) -> Result<Raster> {
    let kernel = Kernel1D::gaussian(sigma)?;
    let (w, h) = (img.width(), img.height());
    let planes = img
        .planes()
        .into_iter()
        .map(|plane| convolve_separable(&plane, w, h, &kernel))
        .collect();
    Ok(Raster::from_planes(w, h, planes)?.with_gsd(img.gsd_cm()))
}

pub(crate) fn convolve_separable(plane: &[f64], w: usize, h: usize, kernel: &Kernel1D) -> Vec<f64> {
    let mut horiz = vec![0.0; w * h];
    horiz
        .par_chunks_mut(w)
        .zip(plane.par_chunks(w))
        .for_each(|(out, row)| kernel.apply_line(row, 1, w, out));

    // Vertical pass over columns; written transposed and swapped back so each
    // worker owns a contiguous output slice.
    let mut transposed = vec![0.0; w * h];
    transposed
        .par_chunks_mut(h)
        .enumerate()
        .for_each(|(x, out)| kernel.apply_line(&horiz[x..], w, h, out));

    let mut out = vec![0.0; w * h];
    out.par_chunks_mut(w).enumerate().for_each(|(y, row)| {
        for (x, v) in row.iter_mut().enumerate() {
            *v = transposed[x * h + y];
        }
    });
    out
}
