use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::raster::{Bands, Raster};
use crate::{Error, Result};

/// Shift radius of the default 5x5 neighbourhood (25 planes).
pub const DEFAULT_SHIFT_RADIUS: usize = 2;

/// `(dy, dx)` offsets in row-major order from `(-r, -r)` to `(r, r)`.
pub fn shifts(radius: usize) -> Vec<(i32, i32)> {
    let r = radius as i32;
    (-r..=r).flat_map(|dy| (-r..=r).map(move |dx| (dy, dx))).collect()
}

/// Shifted copies of an upsampled LR luma plane, each minus the unshifted
/// plane. Stored pixel-major: the feature row of pixel `i` is
/// `data[i * n .. (i + 1) * n]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureStack {
    width: usize,
    height: usize,
    shifts: Vec<(i32, i32)>,
    data: Vec<f32>,
}

impl FeatureStack {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn n_features(&self) -> usize {
        self.shifts.len()
    }

    pub fn shifts(&self) -> &[(i32, i32)] {
        &self.shifts
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    pub fn row(&self, pixel: usize) -> &[f32] {
        let n = self.n_features();
        &self.data[pixel * n..(pixel + 1) * n]
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, f32> {
        self.data.chunks_exact(self.n_features())
    }

    /// One plane, row-major.
    pub fn plane(&self, k: usize) -> Vec<f32> {
        self.rows().map(|r| r[k]).collect()
    }

    /// Index of the plane for `(dy, dx)`.
    pub fn plane_index(&self, dy: i32, dx: i32) -> Option<usize> {
        self.shifts.iter().position(|&s| s == (dy, dx))
    }
}

/// Builds the default 25-plane stack.
pub fn build_feature_stack(lr_up_luma: &Raster) -> Result<FeatureStack> {
    build_feature_stack_with_radius(lr_up_luma, DEFAULT_SHIFT_RADIUS)
}

/// Builds a `(2r+1)^2`-plane stack. The source is zero-padded by `r`
/// before shifting, so content shifted in from outside the frame is zero;
/// the shifted plane at `(y, x)` holds `src(y - dy, x - dx)`.
pub fn build_feature_stack_with_radius(lr_up_luma: &Raster, radius: usize) -> Result<FeatureStack> {
    if lr_up_luma.bands() != Bands::Luma {
        return Err(Error::invalid("feature stack needs a single-band luminance raster"));
    }
    if radius == 0 || (2 * radius + 1).pow(2) > u8::MAX as usize {
        return Err(Error::invalid(format!("unsupported shift radius {radius}")));
    }
    let (w, h) = (lr_up_luma.width(), lr_up_luma.height());
    let src = lr_up_luma.to_real_vec();
    let shifts = shifts(radius);
    let n = shifts.len();
    let mut data = vec![0f32; w * h * n];
    for y in 0..h {
        for x in 0..w {
            let centre = src[y * w + x];
            let row = &mut data[(y * w + x) * n..(y * w + x + 1) * n];
            for (slot, &(dy, dx)) in row.iter_mut().zip(&shifts) {
                let sy = y as i64 - dy as i64;
                let sx = x as i64 - dx as i64;
                let shifted = if sy >= 0 && sx >= 0 && (sy as usize) < h && (sx as usize) < w {
                    src[sy as usize * w + sx as usize]
                } else {
                    0.0
                };
                *slot = (shifted - centre) as f32;
            }
        }
    }
    Ok(FeatureStack {
        width: w,
        height: h,
        shifts,
        data,
    })
}

/// Elementwise `hr - lr_up` on luminance.
pub fn residual_target(hr_luma: &Raster, lr_up_luma: &Raster) -> Result<Raster> {
    hr_luma.require_same_dims(lr_up_luma)?;
    if hr_luma.bands() != Bands::Luma || lr_up_luma.bands() != Bands::Luma {
        return Err(Error::invalid("residual target needs single-band luminance"));
    }
    let diff = hr_luma
        .to_real_vec()
        .iter()
        .zip(lr_up_luma.to_real_vec())
        .map(|(a, b)| a - b)
        .collect();
    Raster::from_real(hr_luma.width(), hr_luma.height(), Bands::Luma, diff)
}

/// Row-major design matrix with one target per row.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    n_features: usize,
    x: Vec<f32>,
    y: Vec<f32>,
}

impl TrainingSet {
    pub fn new(n_features: usize, x: Vec<f32>, y: Vec<f32>) -> Result<Self> {
        if n_features == 0 || x.len() != y.len() * n_features {
            return Err(Error::invalid(format!(
                "design matrix of {} values does not fit {} rows x {n_features} features",
                x.len(),
                y.len()
            )));
        }
        if x.iter().chain(&y).any(|v| !v.is_finite()) {
            return Err(Error::invalid("training data must be finite"));
        }
        Ok(TrainingSet { n_features, x, y })
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.x[i * self.n_features..(i + 1) * self.n_features]
    }

    pub fn targets(&self) -> &[f32] {
        &self.y
    }

    pub(crate) fn columns(&self) -> Vec<Vec<f32>> {
        (0..self.n_features)
            .map(|f| self.x.iter().skip(f).step_by(self.n_features).copied().collect())
            .collect()
    }
}

/// Uniform pixel subsample without replacement over all stacks.
///
/// Takes `round(rate * total_pixels)` rows (at least one), in ascending
/// pixel order; the same seed always selects the same pixels.
pub fn sample_training_set(stacks: &[FeatureStack], targets: &[Raster], rate: f64, seed: u64) -> Result<TrainingSet> {
    if !(rate > 0.0 && rate <= 1.0) {
        return Err(Error::invalid(format!("sample rate must be in (0, 1], got {rate}")));
    }
    if stacks.is_empty() || stacks.len() != targets.len() {
        return Err(Error::invalid("need one target per feature stack, and at least one"));
    }
    let n_features = stacks[0].n_features();
    let mut offsets = Vec::with_capacity(stacks.len() + 1);
    offsets.push(0usize);
    for (s, t) in stacks.iter().zip(targets) {
        if s.n_features() != n_features {
            return Err(Error::invalid("feature stacks disagree on plane count"));
        }
        if s.width() != t.width() || s.height() != t.height() || t.bands() != Bands::Luma {
            return Err(Error::invalid("target raster does not align with its feature stack"));
        }
        offsets.push(offsets.last().unwrap() + s.pixel_count());
    }
    let total = *offsets.last().unwrap();
    let k = ((rate * total as f64).round() as usize).clamp(1, total);

    let mut picked = if k == total {
        (0..total).collect::<Vec<_>>()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rand::seq::index::sample(&mut rng, total, k).into_vec()
    };
    picked.sort_unstable();

    let target_planes: Vec<Vec<f64>> = targets.iter().map(|t| t.to_real_vec()).collect();
    let mut x = Vec::with_capacity(k * n_features);
    let mut y = Vec::with_capacity(k);
    let mut s = 0;
    for g in picked {
        while g >= offsets[s + 1] {
            s += 1;
        }
        let p = g - offsets[s];
        x.extend_from_slice(stacks[s].row(p));
        y.push(target_planes[s][p] as f32);
    }
    TrainingSet::new(n_features, x, y)
}
