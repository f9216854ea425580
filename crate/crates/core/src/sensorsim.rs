//! Coarse-sensor simulation from fine imagery.
//!
//! A Nyquist-sampled sensor at `gsd_out` is approximated by blurring the
//! native image with a Gaussian point-spread function of standard deviation
//! `0.5 * gsd_out / gsd_native` native pixels, then block-averaging down to
//! the output pixel pitch.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::raster::{downsample_area, gaussian_blur, Raster};
use crate::{Error, Result};

/// Integer decimation factors the simulator supports.
pub const SUPPORTED_FACTORS: [usize; 4] = [2, 4, 8, 16];

/// Super-resolution scale factors.
pub const SR_SCALES: [usize; 3] = [2, 4, 8];

/// Output GSDs simulated from 30 cm imagery.
pub const LADDER_GSD_CM: [u32; 4] = [60, 120, 240, 480];

pub const NATIVE_GSD_CM: f64 = 30.0;

/// Gaussian PSF width, in native pixels, for a sensor at `gsd_out_cm`.
pub fn psf_sigma(gsd_out_cm: f64, gsd_native_cm: f64) -> Result<f64> {
    if !(gsd_out_cm > 0.0 && gsd_native_cm > 0.0) || !gsd_out_cm.is_finite() || !gsd_native_cm.is_finite() {
        return Err(Error::invalid("GSD values must be positive and finite"));
    }
    if gsd_out_cm < gsd_native_cm {
        return Err(Error::invalid(format!(
            "output GSD {gsd_out_cm} cm is finer than native {gsd_native_cm} cm"
        )));
    }
    Ok(0.5 * gsd_out_cm / gsd_native_cm)
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SensorSpec {
    gsd_native_cm: f64,
    gsd_out_cm: f64,
    sigma: f64,
    factor: usize,
}

impl SensorSpec {
    pub fn new(gsd_native_cm: f64, gsd_out_cm: f64) -> Result<Self> {
        let sigma = psf_sigma(gsd_out_cm, gsd_native_cm)?;
        let ratio = gsd_out_cm / gsd_native_cm;
        let factor = SUPPORTED_FACTORS
            .iter()
            .copied()
            .find(|&f| f as f64 == ratio)
            .ok_or_else(|| {
                Error::invalid(format!(
                    "GSD ratio {ratio} is not one of the supported factors {SUPPORTED_FACTORS:?}"
                ))
            })?;
        Ok(SensorSpec {
            gsd_native_cm,
            gsd_out_cm,
            sigma,
            factor,
        })
    }

    pub fn gsd_native_cm(&self) -> f64 {
        self.gsd_native_cm
    }

    pub fn gsd_out_cm(&self) -> f64 {
        self.gsd_out_cm
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn factor(&self) -> usize {
        self.factor
    }
}

/// Blur with the sensor PSF, then area-decimate to the output pitch.
///
/// A raster without GSD metadata is assumed to be at the native GSD.
pub fn degrade(img: &Raster, spec: &SensorSpec) -> Result<Raster> {
    if let Some(g) = img.gsd_cm() {
        if (g - spec.gsd_native_cm).abs() > 1e-9 * spec.gsd_native_cm {
            return Err(Error::invalid(format!(
                "image GSD {g} cm does not match sensor native GSD {} cm",
                spec.gsd_native_cm
            )));
        }
    }
    let (w, h) = (img.width(), img.height());
    if w % spec.factor != 0 || h % spec.factor != 0 {
        return Err(Error::invalid(format!(
            "{w}x{h} is not divisible by decimation factor {}",
            spec.factor
        )));
    }
    let blurred = gaussian_blur(img, spec.sigma)?;
    let out = downsample_area(&blurred, spec.factor)?;
    Ok(out.with_gsd(Some(spec.gsd_out_cm)))
}

/// A low/high resolution training pair.
#[derive(Debug, Clone)]
pub struct SrPair {
    pub lr: Raster,
    pub hr: Raster,
    pub scale: usize,
}

/// Degrades `hr` by `scale` to form an LR/HR pair.
pub fn make_pair(hr: &Raster, scale: usize) -> Result<SrPair> {
    if !SR_SCALES.contains(&scale) {
        return Err(Error::invalid(format!("unsupported SR scale {scale}")));
    }
    let native = hr.gsd_cm().unwrap_or(1.0);
    let spec = SensorSpec::new(native, native * scale as f64)?;
    let mut lr = degrade(hr, &spec)?;
    if hr.gsd_cm().is_none() {
        lr = lr.with_gsd(None);
    }
    Ok(SrPair {
        lr,
        hr: hr.clone(),
        scale,
    })
}

/// Degrades a 30 cm image directly to each ladder GSD (60, 120, 240 and
/// 480 cm). Entries are never chained from one another.
pub fn simulate_ladder(img30: &Raster) -> Result<BTreeMap<u32, Raster>> {
    let native = img30.gsd_cm().unwrap_or(NATIVE_GSD_CM);
    if (native - NATIVE_GSD_CM).abs() > 1e-9 {
        return Err(Error::invalid(format!("ladder source must be 30 cm, got {native} cm")));
    }
    let src = img30.clone().with_gsd(Some(NATIVE_GSD_CM));
    LADDER_GSD_CM
        .par_iter()
        .map(|&gsd| {
            let spec = SensorSpec::new(NATIVE_GSD_CM, gsd as f64)?;
            Ok((gsd, degrade(&src, &spec)?))
        })
        .collect()
}
