//! 8-bit PNG and binary PGM/PPM I/O.
//!
//! PNG has no standard ground-sample-distance field, so GSD travels in a
//! sidecar JSON file next to the image: `scene.png` pairs with
//! `scene.png.json` containing `{"gsd_cm": 30.0}`.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use image::codecs::pnm::{PnmEncoder, PnmSubtype, SampleEncoding};
use image::{DynamicImage, ExtendedColorType, ImageEncoder};
use serde::{Deserialize, Serialize};

use super::{Bands, Raster, Samples};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GsdSidecar {
    pub gsd_cm: f64,
}

pub fn sidecar_path(image_path: &Path) -> PathBuf {
    let mut s = image_path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

/// File extensions this module can read and write.
pub fn is_supported_image(path: &Path) -> bool {
    matches!(
        path.extension()
            .and_then(|e| e.to_str())
            .map(|e| e.to_ascii_lowercase())
            .as_deref(),
        Some("png" | "pgm" | "ppm" | "pnm")
    )
}

/// Reads an image and, if present, its GSD sidecar.
///
/// Grayscale decodes to one band, everything else to RGB (alpha dropped).
pub fn read_image(path: &Path) -> Result<Raster> {
    let img = image::open(path).map_err(|e| match e {
        image::ImageError::IoError(io) => Error::io(path, io),
        other => Error::Image {
            path: path.to_path_buf(),
            message: other.to_string(),
        },
    })?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let raster = match img {
        DynamicImage::ImageLuma8(_) | DynamicImage::ImageLumaA8(_) | DynamicImage::ImageLuma16(_) => {
            Raster::from_u8(w, h, Bands::Luma, img.into_luma8().into_raw())?
        }
        other => Raster::from_u8(w, h, Bands::Rgb, other.into_rgb8().into_raw())?,
    };
    Ok(raster.with_gsd(read_sidecar(path)?))
}

fn read_sidecar(image_path: &Path) -> Result<Option<f64>> {
    let p = sidecar_path(image_path);
    if !p.exists() {
        return Ok(None);
    }
    let text = std::fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
    let side: GsdSidecar = serde_json::from_str(&text)?;
    if !(side.gsd_cm.is_finite() && side.gsd_cm > 0.0) {
        return Err(Error::invalid(format!("{}: gsd_cm must be positive", p.display())));
    }
    Ok(Some(side.gsd_cm))
}

/// Writes an image quantized to 8 bits; format follows the extension.
/// A GSD sidecar is written when the raster carries a GSD.
pub fn write_image(path: &Path, img: &Raster) -> Result<()> {
    let q = img.quantized();
    let Samples::U8(data) = q.samples() else {
        unreachable!("quantized raster is 8-bit")
    };
    let (w, h) = (img.width() as u32, img.height() as u32);
    let color = match img.bands() {
        Bands::Luma => ExtendedColorType::L8,
        Bands::Rgb => ExtendedColorType::Rgb8,
    };
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase());
    let to_err = |e: image::ImageError| Error::Image {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    match ext.as_deref() {
        Some("png") => {
            image::save_buffer_with_format(path, data, w, h, color, image::ImageFormat::Png).map_err(to_err)?;
        }
        Some("pgm" | "ppm" | "pnm") => {
            let file = File::create(path).map_err(|e| Error::io(path, e))?;
            let subtype = match img.bands() {
                Bands::Luma => PnmSubtype::Graymap(SampleEncoding::Binary),
                Bands::Rgb => PnmSubtype::Pixmap(SampleEncoding::Binary),
            };
            PnmEncoder::new(BufWriter::new(file))
                .with_subtype(subtype)
                .write_image(data, w, h, color)
                .map_err(to_err)?;
        }
        _ => {
            return Err(Error::invalid(format!(
                "{}: unsupported image extension (png, pgm, ppm)",
                path.display()
            )))
        }
    }
    if let Some(gsd_cm) = img.gsd_cm() {
        let p = sidecar_path(path);
        let text = serde_json::to_string(&GsdSidecar { gsd_cm })?;
        std::fs::write(&p, text).map_err(|e| Error::io(&p, e))?;
    }
    Ok(())
}
