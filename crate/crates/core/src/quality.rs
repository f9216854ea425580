//! PSNR and SSIM on luminance.
//!
//! RGB inputs are reduced to full-range luma before scoring. SSIM uses the
//! standard 11x11 Gaussian window (sigma 1.5) with K1 = 0.01, K2 = 0.03,
//! L = 255, evaluated only where the window fits inside the image.

use serde::{Deserialize, Serialize};

use crate::raster::{Kernel1D, Raster};
use crate::stats::{mean, pairwise_sum};
use crate::{Error, Result};

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;
pub const SSIM_L: f64 = 255.0;

/// Scores for one image pair. `psnr_db` is `f64::INFINITY` for identical
/// inputs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QualityScore {
    #[serde(with = "psnr_serde")]
    pub psnr_db: f64,
    pub ssim: f64,
}

/// Mean scores over a corpus.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorpusScore {
    /// Mean PSNR over the finite-PSNR images; NaN if there are none.
    pub psnr_db: f64,
    pub ssim: f64,
    pub n_images: usize,
    /// Images left out of the PSNR mean because their PSNR was infinite.
    pub n_psnr_excluded: usize,
}

/// Serializes infinite PSNR as the string "inf" since JSON has no infinity.
mod psnr_serde {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_infinite() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(*v)
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Str(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Str(s) if s == "inf" => Ok(f64::INFINITY),
            Repr::Str(s) => Err(serde::de::Error::custom(format!("bad psnr {s:?}"))),
        }
    }
}

fn luma_pair(a: &Raster, b: &Raster) -> Result<(Vec<f64>, Vec<f64>)> {
    a.require_same_dims(b)?;
    if a.bands() != b.bands() {
        return Err(Error::invalid("images differ in band count"));
    }
    Ok((a.luma().to_real_vec(), b.luma().to_real_vec()))
}

/// Drops `crop` pixels from every border of both images.
pub fn crop_border(img: &Raster, crop: usize) -> Result<Raster> {
    if crop == 0 {
        return Ok(img.clone());
    }
    if 2 * crop >= img.width() || 2 * crop >= img.height() {
        return Err(Error::invalid(format!("border crop {crop} leaves no pixels")));
    }
    img.crop(crop, crop, img.width() - 2 * crop, img.height() - 2 * crop)
}

pub fn psnr(a: &Raster, b: &Raster, peak: f64) -> Result<f64> {
    let (la, lb) = luma_pair(a, b)?;
    let sq: Vec<f64> = la.iter().zip(&lb).map(|(x, y)| (x - y) * (x - y)).collect();
    let mse = mean(&sq);
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (peak * peak / mse).log10())
}

fn valid_filter(plane: &[f64], w: usize, h: usize, taps: &[f64]) -> (Vec<f64>, usize, usize) {
    let k = taps.len();
    let (ow, oh) = (w - k + 1, h - k + 1);
    let mut horiz = vec![0.0; ow * h];
    for y in 0..h {
        for x in 0..ow {
            horiz[y * ow + x] = taps.iter().enumerate().map(|(i, t)| t * plane[y * w + x + i]).sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = taps.iter().enumerate().map(|(i, t)| t * horiz[(y + i) * ow + x]).sum();
        }
    }
    (out, ow, oh)
}

/// Mean SSIM over all fully-contained window positions.
pub fn ssim(a: &Raster, b: &Raster) -> Result<f64> {
    let (la, lb) = luma_pair(a, b)?;
    let (w, h) = (a.width(), a.height());
    if w.min(h) < SSIM_WINDOW {
        return Err(Error::invalid(format!(
            "SSIM needs images at least {SSIM_WINDOW}x{SSIM_WINDOW}, got {w}x{h}"
        )));
    }
    let kernel = Kernel1D::gaussian(SSIM_SIGMA)?;
    // ceil(3 * 1.5) = 5, so the kernel is exactly the 11-tap window.
    debug_assert_eq!(kernel.taps().len(), SSIM_WINDOW);
    let taps = kernel.taps();

    let aa: Vec<f64> = la.iter().map(|v| v * v).collect();
    let bb: Vec<f64> = lb.iter().map(|v| v * v).collect();
    let ab: Vec<f64> = la.iter().zip(&lb).map(|(x, y)| x * y).collect();
    let (mu_a, ow, oh) = valid_filter(&la, w, h, taps);
    let (mu_b, ..) = valid_filter(&lb, w, h, taps);
    let (e_aa, ..) = valid_filter(&aa, w, h, taps);
    let (e_bb, ..) = valid_filter(&bb, w, h, taps);
    let (e_ab, ..) = valid_filter(&ab, w, h, taps);

    let c1 = (SSIM_K1 * SSIM_L).powi(2);
    let c2 = (SSIM_K2 * SSIM_L).powi(2);
    let map: Vec<f64> = (0..ow * oh)
        .map(|i| {
            let (ma, mb) = (mu_a[i], mu_b[i]);
            let va = e_aa[i] - ma * ma;
            let vb = e_bb[i] - mb * mb;
            let cov = e_ab[i] - ma * mb;
            ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2))
        })
        .collect();
    Ok(mean(&map))
}

pub fn score_pair(sr: &Raster, hr: &Raster) -> Result<QualityScore> {
    Ok(QualityScore {
        psnr_db: psnr(sr, hr, 255.0)?,
        ssim: ssim(sr, hr)?,
    })
}

/// Arithmetic means over a corpus. Infinite PSNRs are excluded from the
/// PSNR mean with a warning; SSIM always averages every image.
pub fn aggregate(scores: &[QualityScore]) -> CorpusScore {
    let finite: Vec<f64> = scores.iter().map(|s| s.psnr_db).filter(|p| p.is_finite()).collect();
    let excluded = scores.len() - finite.len();
    if excluded > 0 {
        log::warn!("{excluded} image(s) with infinite PSNR excluded from the PSNR mean");
    }
    let ssims: Vec<f64> = scores.iter().map(|s| s.ssim).collect();
    CorpusScore {
        psnr_db: if finite.is_empty() {
            f64::NAN
        } else {
            pairwise_sum(&finite) / finite.len() as f64
        },
        ssim: mean(&ssims),
        n_images: scores.len(),
        n_psnr_excluded: excluded,
    }
}
