//! Random-Forest Super-Resolution.
//!
//! Training works on luminance only. Each HR image is degraded to an LR
//! image, bicubically upsampled back to HR size, and turned into a stack of
//! shifted copies with the unshifted plane subtracted. The regression
//! target is the HR luma minus the upsampled luma, so the forest learns the
//! detail that interpolation misses. At inference the predicted residual is
//! added to the upsampled luma and chroma is carried through bicubically.

mod bench;
mod features;
mod forest;
mod format;

pub use bench::{benchmark, BenchReport, REFERENCE_SECONDS_PER_IMAGE};
pub use features::{
    build_feature_stack, build_feature_stack_with_radius, residual_target, sample_training_set, shifts, FeatureStack,
    TrainingSet, DEFAULT_SHIFT_RADIUS,
};
pub use forest::{train_forest, Forest, Node, RegressionTree, LEAF_FEATURE};
pub use format::{from_bytes, load_model, save_model, to_bytes, FORMAT_VERSION, MAGIC};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::quality::{score_pair, QualityScore};
use crate::raster::{rgb_to_ycbcr, upsample_bicubic, Bands, Raster};
use crate::sensorsim::{make_pair, SR_SCALES};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_estimators: usize,
    pub max_depth: usize,
    pub min_samples_split: usize,
    /// Non-constant features scored at each split.
    pub features_per_split: usize,
    /// Fraction of training pixels sampled into the design matrix.
    pub sample_rate: f64,
    pub bootstrap: bool,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_estimators: 100,
            max_depth: 12,
            min_samples_split: 200,
            features_per_split: 8,
            sample_rate: 0.10,
            bootstrap: true,
        }
    }
}

impl ForestParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_estimators == 0 {
            return Err(Error::invalid("n_estimators must be at least 1"));
        }
        if self.min_samples_split < 2 {
            return Err(Error::invalid("min_samples_split must be at least 2"));
        }
        if self.features_per_split == 0 {
            return Err(Error::invalid("features_per_split must be at least 1"));
        }
        if !(self.sample_rate > 0.0 && self.sample_rate <= 1.0) {
            return Err(Error::invalid("sample_rate must be in (0, 1]"));
        }
        if u32::try_from(self.n_estimators.max(self.max_depth).max(self.min_samples_split)).is_err() {
            return Err(Error::invalid("forest parameters must fit in 32 bits"));
        }
        Ok(())
    }
}

/// A forest trained for one enhancement level.
#[derive(Debug, Clone, PartialEq)]
pub struct SrModel {
    scale: usize,
    shift_radius: usize,
    forest: Forest,
}

impl SrModel {
    pub fn new(scale: usize, shift_radius: usize, forest: Forest) -> Result<Self> {
        if !SR_SCALES.contains(&scale) {
            return Err(Error::invalid(format!("unsupported SR scale {scale}")));
        }
        if forest.n_features() != shifts(shift_radius).len() {
            return Err(Error::invalid(format!(
                "forest has {} features but shift radius {shift_radius} gives {}",
                forest.n_features(),
                shifts(shift_radius).len()
            )));
        }
        Ok(SrModel {
            scale,
            shift_radius,
            forest,
        })
    }

    /// Trains on HR images with the default 25-plane stack.
    pub fn train(hr_images: &[Raster], scale: usize, params: &ForestParams, seed: u64) -> Result<Self> {
        Self::train_with_radius(hr_images, scale, DEFAULT_SHIFT_RADIUS, params, seed)
    }

    pub fn train_with_radius(
        hr_images: &[Raster],
        scale: usize,
        shift_radius: usize,
        params: &ForestParams,
        seed: u64,
    ) -> Result<Self> {
        params.validate()?;
        let (stacks, targets) = prepare_training_data(hr_images, scale, shift_radius)?;
        let set = sample_training_set(&stacks, &targets, params.sample_rate, seed)?;
        drop(stacks);
        let forest = train_forest(&set, params, seed)?;
        log::info!(
            "trained {}x forest: {} rows, oob r2 {:.4}, oob mse {:.4}",
            scale,
            set.len(),
            forest.oob_r2(),
            forest.oob_mse()
        );
        Self::new(scale, shift_radius, forest)
    }

    pub fn scale(&self) -> usize {
        self.scale
    }

    pub fn shift_radius(&self) -> usize {
        self.shift_radius
    }

    pub fn forest(&self) -> &Forest {
        &self.forest
    }

    pub fn params(&self) -> &ForestParams {
        self.forest.params()
    }

    pub fn seed(&self) -> u64 {
        self.forest.seed()
    }

    pub fn oob_r2(&self) -> f64 {
        self.forest.oob_r2()
    }

    pub fn oob_mse(&self) -> f64 {
        self.forest.oob_mse()
    }

    pub fn n_features(&self) -> usize {
        self.forest.n_features()
    }
}

/// Upsampled luma of an LR image plus, for RGB, the upsampled chroma planes.
pub(crate) fn upsampled_luma(lr: &Raster, scale: usize) -> Result<(Raster, Option<[Vec<f64>; 2]>)> {
    let up = upsample_bicubic(lr, scale)?;
    match up.bands() {
        Bands::Luma => Ok((up, None)),
        Bands::Rgb => {
            let ycc = rgb_to_ycbcr(&up)?;
            let mut planes = ycc.planes();
            let cr = planes.pop().expect("three planes");
            let cb = planes.pop().expect("three planes");
            let y = Raster::from_planes(up.width(), up.height(), planes)?.with_gsd(up.gsd_cm());
            Ok((y, Some([cb, cr])))
        }
    }
}

/// Builds feature stacks and residual targets for every HR image.
///
/// Each image is cropped to a multiple of `scale`, degraded with the sensor
/// model, re-quantized to 8 bits when the source is 8-bit (so training sees
/// what a stored LR file would hold), then upsampled through the same path
/// used at inference.
pub fn prepare_training_data(
    hr_images: &[Raster],
    scale: usize,
    shift_radius: usize,
) -> Result<(Vec<FeatureStack>, Vec<Raster>)> {
    if hr_images.is_empty() {
        return Err(Error::invalid("no training images"));
    }
    let prepared: Result<Vec<(FeatureStack, Raster)>> = hr_images
        .par_iter()
        .map(|hr| {
            let hr = crate::datasetio::crop_to_multiple(hr, scale)?;
            let pair = make_pair(&hr, scale)?;
            let lr = if hr.is_u8() { pair.lr.quantized() } else { pair.lr };
            let (y_up, _) = upsampled_luma(&lr, scale)?;
            let stack = build_feature_stack_with_radius(&y_up, shift_radius)?;
            let target = residual_target(&hr.luma(), &y_up)?;
            Ok((stack, target))
        })
        .collect();
    Ok(prepared?.into_iter().unzip())
}

/// Per-pixel forest prediction of the HR-minus-upsampled residual.
pub fn predict_residual(model: &SrModel, stack: &FeatureStack) -> Result<Raster> {
    if stack.n_features() != model.n_features() {
        return Err(Error::invalid(format!(
            "feature stack has {} planes, model expects {}",
            stack.n_features(),
            model.n_features()
        )));
    }
    let forest = model.forest();
    let w = stack.width();
    let mut out = vec![0.0; stack.pixel_count()];
    out.par_chunks_mut(w).enumerate().for_each(|(y, row)| {
        for (x, o) in row.iter_mut().enumerate() {
            *o = forest.predict(stack.row(y * w + x));
        }
    });
    Raster::from_real(w, stack.height(), Bands::Luma, out)
}

/// Super-resolved image before clamping: real luma for luma input, real
/// YCbCr for RGB input.
pub fn super_resolve_unclamped(model: &SrModel, lr: &Raster) -> Result<Raster> {
    let (y_up, chroma) = upsampled_luma(lr, model.scale())?;
    let stack = build_feature_stack_with_radius(&y_up, model.shift_radius())?;
    let residual = predict_residual(model, &stack)?;
    let y: Vec<f64> = y_up
        .to_real_vec()
        .iter()
        .zip(residual.to_real_vec())
        .map(|(a, r)| a + r)
        .collect();
    let (w, h) = (y_up.width(), y_up.height());
    let planes = match chroma {
        None => vec![y],
        Some([cb, cr]) => vec![y, cb, cr],
    };
    Ok(Raster::from_planes(w, h, planes)?.with_gsd(y_up.gsd_cm()))
}

/// Enhances `lr` by the model's scale. Output has the input's band layout
/// and sample depth, clamped to [0, 255].
pub fn super_resolve(model: &SrModel, lr: &Raster) -> Result<Raster> {
    let raw = super_resolve_unclamped(model, lr)?;
    let out = match raw.bands() {
        Bands::Luma => raw.clamped(),
        Bands::Rgb => crate::raster::ycbcr_to_rgb_real(&raw)?.clamped(),
    };
    Ok(if lr.is_u8() { out.quantized() } else { out })
}

/// Plain bicubic enhancement with the same clamping and sample depth as
/// [`super_resolve`].
pub fn bicubic_baseline(lr: &Raster, scale: usize) -> Result<Raster> {
    let out = upsample_bicubic(lr, scale)?.clamped();
    Ok(if lr.is_u8() { out.quantized() } else { out })
}

/// Bicubic and RFSR scores for one HR image.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairScores {
    pub bicubic: QualityScore,
    pub rfsr: QualityScore,
}

/// Degrades `hr` by the model's scale (cropping to a multiple first), then
/// scores bicubic and RFSR reconstructions against it on luma.
pub fn score_against_bicubic(model: &SrModel, hr: &Raster) -> Result<PairScores> {
    let scale = model.scale();
    let hr = crate::datasetio::crop_to_multiple(hr, scale)?;
    let pair = make_pair(&hr, scale)?;
    let lr = if hr.is_u8() { pair.lr.quantized() } else { pair.lr };
    Ok(PairScores {
        bicubic: score_pair(&bicubic_baseline(&lr, scale)?, &hr)?,
        rfsr: score_pair(&super_resolve(model, &lr)?, &hr)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic;

    fn small_params() -> ForestParams {
        ForestParams {
            n_estimators: 6,
            max_depth: 8,
            min_samples_split: 20,
            sample_rate: 0.5,
            ..ForestParams::default()
        }
    }

    fn small_model(seed: u64) -> SrModel {
        let hr: Vec<Raster> = synthetic::corpus(3, 32, 5).into_iter().map(|(_, r)| r).collect();
        SrModel::train(&hr, 2, &small_params(), seed).unwrap()
    }

    #[test]
    fn defaults() {
        let p = ForestParams::default();
        assert_eq!((p.n_estimators, p.max_depth, p.min_samples_split), (100, 12, 200));
        assert_eq!((p.features_per_split, p.sample_rate, p.bootstrap), (8, 0.10, true));
    }

    #[test]
    fn params_validation() {
        let bad = ForestParams {
            sample_rate: 1.5,
            ..ForestParams::default()
        };
        assert!(bad.validate().is_err());
        let bad = ForestParams {
            n_estimators: 0,
            ..ForestParams::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn output_dimensions_follow_scale() {
        let model = small_model(1);
        let lr = synthetic::scene(synthetic::SceneKind::Edges, 17, 2);
        let sr = super_resolve(&model, &lr).unwrap();
        assert_eq!((sr.width(), sr.height()), (34, 34));
        assert!(sr.is_u8());

        let rgb = synthetic::noise_image(9, 5, Bands::Rgb, 3);
        let sr = super_resolve(&model, &rgb).unwrap();
        assert_eq!((sr.width(), sr.height(), sr.bands()), (18, 10, Bands::Rgb));
    }

    #[test]
    fn prediction_is_deterministic_and_bounded() {
        let model = small_model(2);
        let lr = synthetic::noise_image(20, 20, Bands::Luma, 8);
        let (y_up, _) = upsampled_luma(&lr, 2).unwrap();
        let stack = build_feature_stack(&y_up).unwrap();
        let a = predict_residual(&model, &stack).unwrap();
        let b = predict_residual(&model, &stack).unwrap();
        assert_eq!(a, b);
        let leaves: Vec<f32> = model
            .forest()
            .trees()
            .iter()
            .flat_map(|t| t.leaves().map(|n| n.value))
            .collect();
        let lo = leaves.iter().copied().fold(f32::INFINITY, f32::min) as f64;
        let hi = leaves.iter().copied().fold(f32::NEG_INFINITY, f32::max) as f64;
        let (rlo, rhi) = a.min_max();
        assert!(rlo >= lo - 1e-9 && rhi <= hi + 1e-9);
    }

    #[test]
    fn feature_count_mismatch_rejected() {
        let model = small_model(3);
        let y = Raster::filled(8, 8, Bands::Luma, 1.0).unwrap();
        let stack = build_feature_stack_with_radius(&y, 1).unwrap();
        assert!(predict_residual(&model, &stack).is_err());
    }

    #[test]
    fn save_load_predicts_identically() {
        let model = small_model(4);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.rfsr");
        save_model(&model, &path).unwrap();
        let loaded = load_model(&path).unwrap();
        assert_eq!(loaded, model);
        let lr = synthetic::scene(synthetic::SceneKind::Glyphs, 24, 1);
        assert_eq!(
            super_resolve(&loaded, &lr).unwrap(),
            super_resolve(&model, &lr).unwrap()
        );
    }

    #[test]
    fn corrupted_and_truncated_files_rejected() {
        let bytes = to_bytes(&small_model(5));
        let mut bad = bytes.clone();
        let mid = bad.len() / 2;
        bad[mid] ^= 0x40;
        assert!(matches!(from_bytes(&bad), Err(Error::Checksum { .. })));
        assert!(from_bytes(&bytes[..bytes.len() - 9]).is_err());
        assert!(from_bytes(&bytes[..3]).is_err());
        let mut wrong_version = bytes.clone();
        wrong_version[4] = 9;
        assert!(matches!(
            from_bytes(&wrong_version),
            Err(Error::VersionMismatch { found: 9, .. })
        ));
        let mut wrong_magic = bytes;
        wrong_magic[0] = b'X';
        assert!(matches!(from_bytes(&wrong_magic), Err(Error::Format(_))));
    }

    #[test]
    fn serialization_is_byte_identical_across_runs() {
        assert_eq!(to_bytes(&small_model(6)), to_bytes(&small_model(6)));
    }
}
