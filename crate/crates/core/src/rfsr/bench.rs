use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{super_resolve, SrModel};
use crate::raster::{Raster, Samples};
use crate::{Error, Result};

/// Published RFSR inference time per 544x544 image on a 64 GB CPU host.
/// Reported next to local timings for context only.
pub const REFERENCE_SECONDS_PER_IMAGE: f64 = 0.7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub width: usize,
    pub height: usize,
    pub scale: usize,
    pub runs: usize,
    pub median_s: f64,
    pub p90_s: f64,
    pub min_s: f64,
    pub mean_s: f64,
    pub reference_s: f64,
    /// SHA-256 of the 8-bit output samples; identical across runs.
    pub output_sha256: String,
}

fn hash_raster(img: &Raster) -> String {
    let q = img.quantized();
    let Samples::U8(data) = q.samples() else {
        unreachable!("quantized raster is 8-bit")
    };
    Sha256::digest(data).iter().map(|b| format!("{b:02x}")).collect()
}

/// Times `runs` (at least 10) full super-resolution passes over `img`.
pub fn benchmark(model: &SrModel, img: &Raster, runs: usize) -> Result<BenchReport> {
    let runs = runs.max(10);
    let mut times = Vec::with_capacity(runs);
    let mut hash: Option<String> = None;
    for _ in 0..runs {
        let t0 = Instant::now();
        let out = super_resolve(model, img)?;
        times.push(t0.elapsed().as_secs_f64());
        let h = hash_raster(&out);
        match &hash {
            None => hash = Some(h),
            Some(prev) if *prev != h => return Err(Error::invalid("super-resolution output changed between runs")),
            Some(_) => {}
        }
    }
    let mut sorted = times.clone();
    sorted.sort_by(f64::total_cmp);
    let nearest_rank = |q: f64| sorted[((q * runs as f64).ceil() as usize).clamp(1, runs) - 1];
    let median = if runs % 2 == 1 {
        sorted[runs / 2]
    } else {
        0.5 * (sorted[runs / 2 - 1] + sorted[runs / 2])
    };
    Ok(BenchReport {
        width: img.width(),
        height: img.height(),
        scale: model.scale(),
        runs,
        median_s: median,
        p90_s: nearest_rank(0.9),
        min_s: sorted[0],
        mean_s: crate::stats::mean(&times),
        reference_s: REFERENCE_SECONDS_PER_IMAGE,
        output_sha256: hash.unwrap_or_default(),
    })
}
