use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::matching::{match_detections, nms, MatchCounts};
use super::{
    Category, Detection, GroundTruthBox, MATCH_IOU, NMS_IOU, N_BOOTSTRAP, N_THRESHOLDS, THRESHOLD_MAX, THRESHOLD_MIN,
};
use crate::stats::{mean, population_std};
use crate::{Error, Result};

/// One point of a precision-recall sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrPoint {
    pub threshold: f64,
    /// tp / (tp + fp), or 1.0 with no surviving detections.
    pub precision: f64,
    /// tp / (tp + fn), or 0.0 with no ground truth.
    pub recall: f64,
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl PrPoint {
    pub fn from_counts(threshold: f64, c: MatchCounts) -> Self {
        let precision = if c.tp + c.fp == 0 {
            1.0
        } else {
            c.tp as f64 / (c.tp + c.fp) as f64
        };
        let recall = if c.tp + c.fn_ == 0 {
            0.0
        } else {
            c.tp as f64 / (c.tp + c.fn_) as f64
        };
        PrPoint {
            threshold,
            precision,
            recall,
            tp: c.tp,
            fp: c.fp,
            fn_: c.fn_,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub match_iou: f64,
    pub nms_iou: f64,
    pub n_bootstrap: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            match_iou: MATCH_IOU,
            nms_iou: NMS_IOU,
            n_bootstrap: N_BOOTSTRAP,
        }
    }
}

impl EvalConfig {
    fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.match_iou) || !(0.0..=1.0).contains(&self.nms_iou) {
            return Err(Error::invalid("IoU thresholds must lie in [0, 1)"));
        }
        if self.n_bootstrap == 0 {
            return Err(Error::invalid("n_bootstrap must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// AP for every class with at least one ground-truth box.
    pub per_class_ap: BTreeMap<Category, f64>,
    pub map_value: f64,
    /// Population standard deviation of the bootstrap replicate mAPs.
    pub sigma: f64,
    pub n_bootstrap: usize,
    pub seed: u64,
    pub n_images: usize,
    pub curves: BTreeMap<Category, Vec<PrPoint>>,
}

/// The 30 confidence thresholds, evenly spaced over [0.05, 0.95].
pub fn thresholds() -> Vec<f64> {
    let step = (THRESHOLD_MAX - THRESHOLD_MIN) / (N_THRESHOLDS - 1) as f64;
    let mut t: Vec<f64> = (0..N_THRESHOLDS).map(|i| THRESHOLD_MIN + i as f64 * step).collect();
    t[N_THRESHOLDS - 1] = THRESHOLD_MAX;
    t
}

/// Area under the monotone precision envelope.
///
/// Points are ordered by recall; each precision is replaced by the highest
/// precision at equal or greater recall, and the envelope is integrated as a
/// rectangle sum starting from recall 0.
pub fn average_precision(points: &[PrPoint]) -> Result<f64> {
    if points.is_empty() {
        return Err(Error::invalid("average precision of an empty curve"));
    }
    let mut pts: Vec<(f64, f64)> = points.iter().map(|p| (p.recall, p.precision)).collect();
    if pts
        .iter()
        .any(|(r, p)| !(0.0..=1.0).contains(r) || !(0.0..=1.0).contains(p))
    {
        return Err(Error::invalid("precision and recall must lie in [0, 1]"));
    }
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut best = 0.0f64;
    for pt in pts.iter_mut().rev() {
        best = best.max(pt.1);
        pt.1 = best;
    }
    let mut area = 0.0;
    let mut prev_r = 0.0;
    for (r, p) in pts {
        area += (r - prev_r) * p;
        prev_r = r;
    }
    Ok(area)
}

/// Per-image, per-class, per-threshold match counts.
struct CountsTable {
    /// `counts[image][class][threshold]`
    counts: Vec<Vec<Vec<MatchCounts>>>,
    /// Ground-truth boxes per image and class.
    n_gt: Vec<Vec<u64>>,
}

fn class_index(c: Category) -> usize {
    Category::ALL.iter().position(|&k| k == c).unwrap_or(0)
}

impl CountsTable {
    fn build(dets: &[Detection], gts: &[GroundTruthBox], cfg: &EvalConfig) -> Self {
        let images: BTreeSet<&str> = gts
            .iter()
            .map(|g| g.image_id.as_str())
            .chain(dets.iter().map(|d| d.image_id.as_str()))
            .collect();
        let index: BTreeMap<&str, usize> = images.iter().enumerate().map(|(i, id)| (*id, i)).collect();
        let nc = Category::ALL.len();
        let mut det_groups: Vec<Vec<Vec<Detection>>> = vec![vec![Vec::new(); nc]; images.len()];
        let mut gt_groups: Vec<Vec<Vec<GroundTruthBox>>> = vec![vec![Vec::new(); nc]; images.len()];
        for d in dets {
            det_groups[index[d.image_id.as_str()]][class_index(d.category)].push(d.clone());
        }
        for g in gts {
            gt_groups[index[g.image_id.as_str()]][class_index(g.category)].push(g.clone());
        }
        let ts = thresholds();
        let counts = det_groups
            .par_iter()
            .zip(gt_groups.par_iter())
            .map(|(dg, gg)| {
                (0..nc)
                    .map(|c| {
                        ts.iter()
                            .map(|&t| {
                                let live: Vec<Detection> =
                                    dg[c].iter().filter(|d| d.confidence() >= t).cloned().collect();
                                let kept = nms(&live, cfg.nms_iou);
                                match_detections(&kept, &gg[c], cfg.match_iou)
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();
        let n_gt = gt_groups
            .iter()
            .map(|gg| gg.iter().map(|g| g.len() as u64).collect())
            .collect();
        CountsTable { counts, n_gt }
    }

    fn n_images(&self) -> usize {
        self.counts.len()
    }

    /// Curves for classes with ground truth, each image counted `weights[i]`
    /// times.
    fn curves(&self, weights: &[u64]) -> BTreeMap<Category, Vec<PrPoint>> {
        let ts = thresholds();
        let mut out = BTreeMap::new();
        for (c, &cat) in Category::ALL.iter().enumerate() {
            let gt: u64 = self.n_gt.iter().zip(weights).map(|(n, w)| n[c] * w).sum();
            if gt == 0 {
                continue;
            }
            let pts = ts
                .iter()
                .enumerate()
                .map(|(ti, &t)| {
                    let mut sum = MatchCounts::default();
                    for (img, &w) in self.counts.iter().zip(weights) {
                        if w > 0 {
                            sum.add_scaled(&img[c][ti], w);
                        }
                    }
                    PrPoint::from_counts(t, sum)
                })
                .collect();
            out.insert(cat, pts);
        }
        out
    }

    /// mAP under the given image weights; `None` when no class has ground truth.
    fn map_value(&self, weights: &[u64]) -> Option<(BTreeMap<Category, f64>, f64)> {
        let per_class: BTreeMap<Category, f64> = self
            .curves(weights)
            .into_iter()
            .map(|(c, pts)| (c, average_precision(&pts).unwrap_or(0.0)))
            .collect();
        if per_class.is_empty() {
            return None;
        }
        let aps: Vec<f64> = per_class.values().copied().collect();
        let m = mean(&aps);
        Some((per_class, m))
    }

    /// Population std of mAP over image-resampled replicates. Replicate `r`
    /// draws from ChaCha8 stream `r` of `seed`; replicates that happen to
    /// contain no ground truth are skipped.
    fn bootstrap(&self, n: usize, seed: u64) -> f64 {
        let n_img = self.n_images();
        let maps: Vec<Option<f64>> = (0..n)
            .into_par_iter()
            .map(|r| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(r as u64);
                let mut weights = vec![0u64; n_img];
                for _ in 0..n_img {
                    weights[rng.gen_range(0..n_img)] += 1;
                }
                self.map_value(&weights).map(|(_, m)| m)
            })
            .collect();
        let kept: Vec<f64> = maps.iter().flatten().copied().collect();
        if kept.len() < n {
            log::warn!("{} bootstrap replicate(s) without ground truth skipped", n - kept.len());
        }
        if kept.is_empty() {
            return 0.0;
        }
        population_std(&kept)
    }
}

/// Precision-recall sweep over every detection and ground truth given,
/// pooled across images and classes.
pub fn pr_sweep(dets: &[Detection], gts: &[GroundTruthBox], cfg: &EvalConfig) -> Vec<PrPoint> {
    let table = CountsTable::build(dets, gts, cfg);
    let ts = thresholds();
    ts.iter()
        .enumerate()
        .map(|(ti, &t)| {
            let mut sum = MatchCounts::default();
            for img in &table.counts {
                for class in img {
                    sum.add_scaled(&class[ti], 1);
                }
            }
            PrPoint::from_counts(t, sum)
        })
        .collect()
}

/// Per-class sweeps for classes with at least one ground-truth box.
pub fn class_curves(dets: &[Detection], gts: &[GroundTruthBox], cfg: &EvalConfig) -> BTreeMap<Category, Vec<PrPoint>> {
    let table = CountsTable::build(dets, gts, cfg);
    table.curves(&vec![1; table.n_images()])
}

pub fn evaluate(dets: &[Detection], gts: &[GroundTruthBox], seed: u64) -> Result<EvalReport> {
    evaluate_with(dets, gts, seed, &EvalConfig::default())
}

pub fn evaluate_with(dets: &[Detection], gts: &[GroundTruthBox], seed: u64, cfg: &EvalConfig) -> Result<EvalReport> {
    cfg.validate()?;
    if gts.is_empty() {
        return Err(Error::invalid("no ground-truth boxes to evaluate against"));
    }
    let table = CountsTable::build(dets, gts, cfg);
    let ones = vec![1; table.n_images()];
    let curves = table.curves(&ones);
    let (per_class_ap, map_value) = table
        .map_value(&ones)
        .ok_or_else(|| Error::invalid("no ground-truth boxes to evaluate against"))?;
    Ok(EvalReport {
        per_class_ap,
        map_value,
        sigma: table.bootstrap(cfg.n_bootstrap, seed),
        n_bootstrap: cfg.n_bootstrap,
        seed,
        n_images: table.n_images(),
        curves,
    })
}

/// Bootstrap standard deviation of mAP with the default matching settings.
pub fn bootstrap_sigma(dets: &[Detection], gts: &[GroundTruthBox], n: usize, seed: u64) -> Result<f64> {
    let cfg = EvalConfig {
        n_bootstrap: n,
        ..EvalConfig::default()
    };
    cfg.validate()?;
    if gts.is_empty() {
        return Err(Error::invalid("no ground-truth boxes to evaluate against"));
    }
    Ok(CountsTable::build(dets, gts, &cfg).bootstrap(n, seed))
}
