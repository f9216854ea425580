use super::{Bands, Raster, Samples};
use crate::Result;

// Full-range (JPEG) BT.601 coefficients.
const KR: f64 = 0.299;
const KG: f64 = 0.587;
const KB: f64 = 0.114;

pub(crate) fn luma_of(r: f64, g: f64, b: f64) -> f64 {
    KR * r + KG * g + KB * b
}

/// Converts RGB to real-valued full-range YCbCr with chroma centered at 128.
///
/// Accepts 8-bit or real RGB; the result is always real.
pub fn rgb_to_ycbcr(img: &Raster) -> Result<Raster> {
    img.require_bands(Bands::Rgb, "rgb_to_ycbcr")?;
    let src = img.to_real_vec();
    let mut out = Vec::with_capacity(src.len());
    for px in src.chunks_exact(3) {
        let (r, g, b) = (px[0], px[1], px[2]);
        out.push(luma_of(r, g, b));
        out.push(128.0 - 0.168736 * r - 0.331264 * g + 0.5 * b);
        out.push(128.0 + 0.5 * r - 0.418688 * g - 0.081312 * b);
    }
    Ok(Raster::from_real(img.width(), img.height(), Bands::Rgb, out)?.with_gsd(img.gsd_cm()))
}

/// Inverse of [`rgb_to_ycbcr`], clamped to [0, 255] and quantized half-up.
pub fn ycbcr_to_rgb(img: &Raster) -> Result<Raster> {
    let real = ycbcr_to_rgb_real(img)?;
    Ok(real.quantized())
}

/// Inverse conversion without clamping or quantization.
pub(crate) fn ycbcr_to_rgb_real(img: &Raster) -> Result<Raster> {
    img.require_bands(Bands::Rgb, "ycbcr_to_rgb")?;
    let src = match img.samples() {
        Samples::Real(v) => std::borrow::Cow::Borrowed(v.as_slice()),
        Samples::U8(_) => std::borrow::Cow::Owned(img.to_real_vec()),
    };
    let mut out = Vec::with_capacity(src.len());
    for px in src.chunks_exact(3) {
        let (y, cb, cr) = (px[0], px[1] - 128.0, px[2] - 128.0);
        out.push(y + 1.402 * cr);
        out.push(y - 0.344136 * cb - 0.714136 * cr);
        out.push(y + 1.772 * cb);
    }
    Ok(Raster::from_real(img.width(), img.height(), Bands::Rgb, out)?.with_gsd(img.gsd_cm()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn px(r: u8, g: u8, b: u8) -> Raster {
        Raster::from_u8(1, 1, Bands::Rgb, vec![r, g, b]).unwrap()
    }

    fn ycc(y: f64, cb: f64, cr: f64) -> Raster {
        Raster::from_real(1, 1, Bands::Rgb, vec![y, cb, cr]).unwrap()
    }

    #[test]
    fn black_and_white() {
        let k = rgb_to_ycbcr(&px(0, 0, 0)).unwrap().to_real_vec();
        assert_eq!(k, vec![0.0, 128.0, 128.0]);
        let w = rgb_to_ycbcr(&px(255, 255, 255)).unwrap().to_real_vec();
        assert!((w[0] - 255.0).abs() < 1e-9);
        assert!((w[1] - 128.0).abs() < 1e-9);
        assert!((w[2] - 128.0).abs() < 1e-9);
    }

    #[test]
    fn pure_red_luma() {
        let v = rgb_to_ycbcr(&px(255, 0, 0)).unwrap().to_real_vec();
        assert!((v[0] - 76.245).abs() < 1e-9);
    }

    #[test]
    fn inverse_of_neutrals() {
        let k = ycbcr_to_rgb(&ycc(0.0, 128.0, 128.0)).unwrap();
        assert_eq!(k.samples(), &Samples::U8(vec![0, 0, 0]));
        let w = ycbcr_to_rgb(&ycc(255.0, 128.0, 128.0)).unwrap();
        assert_eq!(w.samples(), &Samples::U8(vec![255, 255, 255]));
    }

    #[test]
    fn rejects_luma_input() {
        let g = Raster::from_u8(1, 1, Bands::Luma, vec![3]).unwrap();
        assert!(rgb_to_ycbcr(&g).is_err());
        assert!(ycbcr_to_rgb(&g).is_err());
    }

    #[test]
    fn round_trip_lattice_within_one_level() {
        // 17 levels per channel: 0, 16, ..., 240, 255.
        let levels: Vec<u8> = (0..16).map(|i| (i * 16) as u8).chain([255]).collect();
        let mut data = Vec::new();
        for &r in &levels {
            for &g in &levels {
                for &b in &levels {
                    data.extend([r, g, b]);
                }
            }
        }
        let n = levels.len().pow(3);
        let img = Raster::from_u8(n, 1, Bands::Rgb, data.clone()).unwrap();
        let back = ycbcr_to_rgb(&rgb_to_ycbcr(&img).unwrap()).unwrap();
        let Samples::U8(out) = back.samples() else {
            panic!("expected u8")
        };
        for (a, b) in data.iter().zip(out) {
            assert!((*a as i32 - *b as i32).abs() <= 1, "{a} vs {b}");
        }
    }
}
