//! Image representation and the pixel primitives shared by every stage.
//!
//! A [`Raster`] stores interleaved samples in row-major order. Samples are
//! either 8-bit integers (as read from PNG/PNM) or finite reals. All filters
//! and resamplers produce real-valued rasters; quantize with
//! [`Raster::quantized`] before writing.

mod color;
mod filter;
pub mod io;
mod resample;

pub(crate) use color::ycbcr_to_rgb_real;
pub use color::{rgb_to_ycbcr, ycbcr_to_rgb};
pub use filter::{gaussian_blur, Kernel1D};
pub use resample::{downsample_area, upsample_bicubic, BICUBIC_A};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum Bands {
    Luma,
    Rgb,
}

impl Bands {
    pub fn count(self) -> usize {
        match self {
            Bands::Luma => 1,
            Bands::Rgb => 3,
        }
    }

    fn from_count(n: usize) -> Result<Self> {
        match n {
            1 => Ok(Bands::Luma),
            3 => Ok(Bands::Rgb),
            _ => Err(Error::invalid(format!("unsupported band count {n}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Samples {
    U8(Vec<u8>),
    Real(Vec<f64>),
}

impl Samples {
    pub fn len(&self) -> usize {
        match self {
            Samples::U8(v) => v.len(),
            Samples::Real(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// An in-memory image with optional ground-sample distance.
#[derive(Debug, Clone, PartialEq)]
pub struct Raster {
    width: usize,
    height: usize,
    bands: Bands,
    samples: Samples,
    gsd_cm: Option<f64>,
}

impl Raster {
    pub fn from_u8(width: usize, height: usize, bands: Bands, data: Vec<u8>) -> Result<Self> {
        Self::new(width, height, bands, Samples::U8(data))
    }

    pub fn from_real(width: usize, height: usize, bands: Bands, data: Vec<f64>) -> Result<Self> {
        if let Some(bad) = data.iter().find(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("non-finite sample {bad}")));
        }
        Self::new(width, height, bands, Samples::Real(data))
    }

    fn new(width: usize, height: usize, bands: Bands, samples: Samples) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid(format!("empty raster {width}x{height}")));
        }
        let expected = width * height * bands.count();
        if samples.len() != expected {
            return Err(Error::invalid(format!(
                "sample count {} does not match {width}x{height}x{}",
                samples.len(),
                bands.count()
            )));
        }
        Ok(Raster {
            width,
            height,
            bands,
            samples,
            gsd_cm: None,
        })
    }

    /// Real-valued raster with every sample set to `value`.
    pub fn filled(width: usize, height: usize, bands: Bands, value: f64) -> Result<Self> {
        Self::from_real(width, height, bands, vec![value; width * height * bands.count()])
    }

    /// Builds a real raster from separate band planes.
    pub fn from_planes(width: usize, height: usize, planes: Vec<Vec<f64>>) -> Result<Self> {
        let bands = Bands::from_count(planes.len())?;
        if planes.iter().any(|p| p.len() != width * height) {
            return Err(Error::invalid("plane length does not match dimensions"));
        }
        let data = match bands {
            Bands::Luma => planes.into_iter().next().unwrap_or_default(),
            Bands::Rgb => {
                let mut data = Vec::with_capacity(width * height * 3);
                for i in 0..width * height {
                    data.extend(planes.iter().map(|p| p[i]));
                }
                data
            }
        };
        Self::from_real(width, height, bands, data)
    }

    pub fn with_gsd(mut self, gsd_cm: Option<f64>) -> Self {
        self.gsd_cm = gsd_cm;
        self
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bands(&self) -> Bands {
        self.bands
    }

    pub fn gsd_cm(&self) -> Option<f64> {
        self.gsd_cm
    }

    pub fn samples(&self) -> &Samples {
        &self.samples
    }

    pub fn is_u8(&self) -> bool {
        matches!(self.samples, Samples::U8(_))
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    /// Sample at column `x`, row `y`, band `b`, widened to `f64`.
    pub fn get(&self, x: usize, y: usize, b: usize) -> f64 {
        let i = (y * self.width + x) * self.bands.count() + b;
        match &self.samples {
            Samples::U8(v) => v[i] as f64,
            Samples::Real(v) => v[i],
        }
    }

    /// All samples widened to `f64`, interleaved.
    pub fn to_real_vec(&self) -> Vec<f64> {
        match &self.samples {
            Samples::U8(v) => v.iter().map(|&s| s as f64).collect(),
            Samples::Real(v) => v.clone(),
        }
    }

    pub fn to_real(&self) -> Raster {
        Raster {
            samples: Samples::Real(self.to_real_vec()),
            ..self.clone()
        }
    }

    /// One band as a contiguous plane.
    pub fn plane(&self, b: usize) -> Vec<f64> {
        let n = self.bands.count();
        assert!(b < n, "band {b} out of range");
        match &self.samples {
            Samples::U8(v) => v.iter().skip(b).step_by(n).map(|&s| s as f64).collect(),
            Samples::Real(v) => v.iter().skip(b).step_by(n).copied().collect(),
        }
    }

    pub fn planes(&self) -> Vec<Vec<f64>> {
        (0..self.bands.count()).map(|b| self.plane(b)).collect()
    }

    /// Clamps to [0, 255] and rounds half up to 8-bit samples.
    pub fn quantized(&self) -> Raster {
        let data = match &self.samples {
            Samples::U8(v) => v.clone(),
            Samples::Real(v) => v.iter().map(|&s| quantize(s)).collect(),
        };
        Raster {
            samples: Samples::U8(data),
            ..self.clone()
        }
    }

    /// Clamps real samples to [0, 255] without quantizing.
    pub fn clamped(&self) -> Raster {
        match &self.samples {
            Samples::U8(_) => self.clone(),
            Samples::Real(v) => Raster {
                samples: Samples::Real(v.iter().map(|s| s.clamp(0.0, 255.0)).collect()),
                ..self.clone()
            },
        }
    }

    /// Luminance plane as a real single-band raster.
    ///
    /// RGB input is converted with the full-range BT.601 weights; luma input
    /// is widened unchanged.
    pub fn luma(&self) -> Raster {
        let data = match self.bands {
            Bands::Luma => self.to_real_vec(),
            Bands::Rgb => (0..self.pixel_count())
                .map(|i| {
                    let x = i % self.width;
                    let y = i / self.width;
                    color::luma_of(self.get(x, y, 0), self.get(x, y, 1), self.get(x, y, 2))
                })
                .collect(),
        };
        Raster {
            width: self.width,
            height: self.height,
            bands: Bands::Luma,
            samples: Samples::Real(data),
            gsd_cm: self.gsd_cm,
        }
    }

    /// Copies the `w`x`h` window whose top-left corner is (`x0`, `y0`).
    pub fn crop(&self, x0: usize, y0: usize, w: usize, h: usize) -> Result<Raster> {
        if w == 0 || h == 0 || x0 + w > self.width || y0 + h > self.height {
            return Err(Error::invalid(format!(
                "crop {w}x{h}+{x0}+{y0} outside {}x{}",
                self.width, self.height
            )));
        }
        let n = self.bands.count();
        let rows = (y0..y0 + h).map(|y| ((y * self.width + x0) * n, (y * self.width + x0 + w) * n));
        let samples = match &self.samples {
            Samples::U8(v) => Samples::U8(rows.flat_map(|(a, b)| v[a..b].iter().copied()).collect()),
            Samples::Real(v) => Samples::Real(rows.flat_map(|(a, b)| v[a..b].iter().copied()).collect()),
        };
        Ok(Raster {
            width: w,
            height: h,
            bands: self.bands,
            samples,
            gsd_cm: self.gsd_cm,
        })
    }

    /// Mean over every sample.
    pub fn mean(&self) -> f64 {
        crate::stats::mean(&self.to_real_vec())
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.to_real_vec()
            .into_iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
    }

    pub(crate) fn require_bands(&self, bands: Bands, op: &str) -> Result<()> {
        if self.bands != bands {
            return Err(Error::invalid(format!(
                "{op} expects {} band(s), got {}",
                bands.count(),
                self.bands.count()
            )));
        }
        Ok(())
    }

    pub(crate) fn require_same_dims(&self, other: &Raster) -> Result<()> {
        if self.width != other.width || self.height != other.height {
            return Err(Error::DimensionMismatch {
                left_w: self.width,
                left_h: self.height,
                right_w: other.width,
                right_h: other.height,
            });
        }
        Ok(())
    }
}

/// Round-half-up quantization with clamping to the 8-bit range.
pub fn quantize(v: f64) -> u8 {
    (v + 0.5).floor().clamp(0.0, 255.0) as u8
}

/// Maps any integer coordinate onto `[0, n)` by half-sample symmetric
/// reflection (`... c b a | a b c ... z | z y x ...`).
///
/// This extension makes a normalized symmetric convolution preserve the
/// signal sum exactly, for any kernel radius.
pub(crate) fn reflect(p: isize, n: usize) -> usize {
    let period = 2 * n as isize;
    let m = p.rem_euclid(period);
    if m < n as isize {
        m as usize
    } else {
        (period - 1 - m) as usize
    }
}
