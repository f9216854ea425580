use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::{BBox, Detection, GroundTruthBox};

/// Intersection over union; 0 for disjoint boxes.
pub fn iou(a: &BBox, b: &BBox) -> f64 {
    match a.intersect(b) {
        None => 0.0,
        Some(i) => {
            let inter = i.area();
            inter / (a.area() + b.area() - inter)
        }
    }
}

fn cmp_coords(a: &BBox, b: &BBox) -> Ordering {
    a.coords()
        .iter()
        .zip(b.coords().iter())
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

/// Confidence descending, ties by box coordinates ascending.
pub fn sort_canonical(dets: &mut [Detection]) {
    dets.sort_by(|a, b| {
        b.confidence()
            .total_cmp(&a.confidence())
            .then_with(|| cmp_coords(&a.bbox, &b.bbox))
    });
}

/// Greedy non-maximum suppression over detections of one image and class.
///
/// Boxes are visited in canonical order; a box survives unless its IoU with
/// an already kept box exceeds `iou_cut`.
pub fn nms(dets: &[Detection], iou_cut: f64) -> Vec<Detection> {
    let mut sorted = dets.to_vec();
    sort_canonical(&mut sorted);
    let mut kept: Vec<Detection> = Vec::with_capacity(sorted.len());
    for d in sorted {
        if kept.iter().all(|k| iou(&k.bbox, &d.bbox) <= iou_cut) {
            kept.push(d);
        }
    }
    kept
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchCounts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl MatchCounts {
    pub fn add_scaled(&mut self, other: &MatchCounts, times: u64) {
        self.tp += other.tp * times;
        self.fp += other.fp * times;
        self.fn_ += other.fn_ * times;
    }
}

/// Greedy single-claim matching for one image and class.
///
/// Detections are processed in canonical order; each claims the unclaimed
/// ground truth with the highest IoU (lowest index on ties, ground truths
/// sorted by coordinates) when that IoU exceeds `iou_thresh`, otherwise it
/// is a false positive. Unclaimed ground truths are false negatives.
pub fn match_detections(dets: &[Detection], gts: &[GroundTruthBox], iou_thresh: f64) -> MatchCounts {
    let mut dets = dets.to_vec();
    sort_canonical(&mut dets);
    let mut gt_boxes: Vec<BBox> = gts.iter().map(|g| g.bbox).collect();
    gt_boxes.sort_by(cmp_coords);

    let mut claimed = vec![false; gt_boxes.len()];
    let mut counts = MatchCounts::default();
    for d in &dets {
        let mut best: Option<(usize, f64)> = None;
        for (j, g) in gt_boxes.iter().enumerate() {
            if claimed[j] {
                continue;
            }
            let v = iou(&d.bbox, g);
            if best.is_none_or(|(_, b)| v > b) {
                best = Some((j, v));
            }
        }
        match best {
            Some((j, v)) if v > iou_thresh => {
                claimed[j] = true;
                counts.tp += 1;
            }
            _ => counts.fp += 1,
        }
    }
    counts.fn_ = claimed.iter().filter(|c| !**c).count() as u64;
    counts
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::deteval::Category;

    fn b(x0: f64, y0: f64, x1: f64, y1: f64) -> BBox {
        BBox::new(x0, y0, x1, y1).unwrap()
    }

    fn det(bbox: BBox, conf: f64) -> Detection {
        Detection::new("img", Category::SmallVehicle, bbox, conf).unwrap()
    }

    fn gt(bbox: BBox) -> GroundTruthBox {
        GroundTruthBox::new("img", Category::SmallVehicle, bbox)
    }

    #[test]
    fn iou_values() {
        let a = b(0.0, 0.0, 2.0, 2.0);
        assert_eq!(iou(&a, &a), 1.0);
        assert_eq!(iou(&a, &b(5.0, 5.0, 6.0, 6.0)), 0.0);
        assert_eq!(iou(&a, &b(2.0, 0.0, 4.0, 2.0)), 0.0, "touching edges");
        assert!((iou(&a, &b(1.0, 1.0, 3.0, 3.0)) - 1.0 / 7.0).abs() < 1e-12);
    }

    #[test]
    fn nms_cases() {
        let box_a = b(0.0, 0.0, 10.0, 10.0);
        assert_eq!(nms(&[det(box_a, 0.3)], 0.5).len(), 1);
        let kept = nms(&[det(box_a, 0.8), det(box_a, 0.9)], 0.5);
        assert_eq!(kept.len(), 1);
        assert_eq!(kept[0].confidence(), 0.9);
        let kept = nms(&[det(box_a, 0.8), det(b(20.0, 20.0, 30.0, 30.0), 0.9)], 0.5);
        assert_eq!(kept.len(), 2);
    }

    #[test]
    fn match_cases() {
        let g = b(0.0, 0.0, 10.0, 10.0);
        assert_eq!(
            match_detections(&[det(g, 0.9)], &[gt(g)], 0.25),
            MatchCounts { tp: 1, fp: 0, fn_: 0 }
        );
        let near = b(1.0, 1.0, 11.0, 11.0);
        assert_eq!(
            match_detections(&[det(g, 0.9), det(near, 0.7)], &[gt(g)], 0.25),
            MatchCounts { tp: 1, fp: 1, fn_: 0 }
        );
        let gts = [gt(g), gt(near), gt(b(50.0, 50.0, 60.0, 60.0))];
        assert_eq!(match_detections(&[], &gts, 0.25), MatchCounts { tp: 0, fp: 0, fn_: 3 });
    }

    #[test]
    fn threshold_is_strict() {
        let g = b(0.0, 0.0, 10.0, 10.0);
        let quarter = b(0.0, 0.0, 10.0, 2.5);
        assert_eq!(iou(&g, &quarter), 0.25);
        assert_eq!(match_detections(&[det(quarter, 0.9)], &[gt(g)], 0.25).tp, 0);
    }

    #[test]
    fn match_is_order_invariant() {
        let g = [gt(b(0.0, 0.0, 10.0, 10.0)), gt(b(8.0, 0.0, 18.0, 10.0))];
        let d = vec![
            det(b(4.0, 0.0, 14.0, 10.0), 0.9),
            det(b(0.0, 0.0, 9.0, 10.0), 0.6),
            det(b(9.0, 1.0, 18.0, 10.0), 0.6),
        ];
        let base = match_detections(&d, &g, 0.25);
        let mut rev = d.clone();
        rev.reverse();
        assert_eq!(match_detections(&rev, &g, 0.25), base);
    }
}
