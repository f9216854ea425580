//! Object-detection scoring.
//!
//! Detections are thresholded at 30 evenly spaced confidences in
//! [0.05, 0.95]. At each threshold, per-image per-class NMS runs on the
//! survivors, greedy IoU > 0.25 matching tabulates TP/FP/FN, and the counts
//! summed over all test images give one precision-recall point. AP is the
//! area under the monotone precision envelope; mAP averages AP over classes
//! that have ground truth. Uncertainty comes from resampling test images.

mod csvio;
mod matching;
mod metrics;
mod significance;

pub use csvio::{
    parse_detections, parse_ground_truth, read_detections, read_ground_truth, write_ground_truth, write_table4_csv,
    Table4Row,
};
pub use matching::{iou, match_detections, nms, sort_canonical, MatchCounts};
pub use metrics::{
    average_precision, bootstrap_sigma, class_curves, evaluate, evaluate_with, pr_sweep, thresholds, EvalConfig,
    EvalReport, PrPoint,
};
pub use significance::{format_sigma_diff, round_one_decimal, sigma_diff, ComparisonResult};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const MATCH_IOU: f64 = 0.25;
pub const NMS_IOU: f64 = 0.5;
pub const N_THRESHOLDS: usize = 30;
pub const THRESHOLD_MIN: f64 = 0.05;
pub const THRESHOLD_MAX: f64 = 0.95;
pub const N_BOOTSTRAP: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Category {
    Boat,
    LargeAircraft,
    SmallAircraft,
    BusTruck,
    SmallVehicle,
}

impl Category {
    pub const ALL: [Category; 5] = [
        Category::Boat,
        Category::LargeAircraft,
        Category::SmallAircraft,
        Category::BusTruck,
        Category::SmallVehicle,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Category::Boat => "Boat",
            Category::LargeAircraft => "LargeAircraft",
            Category::SmallAircraft => "SmallAircraft",
            Category::BusTruck => "BusTruck",
            Category::SmallVehicle => "SmallVehicle",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            Category::Boat => "Boat",
            Category::LargeAircraft => "Large Aircraft",
            Category::SmallAircraft => "Small Aircraft",
            Category::BusTruck => "Bus/Truck",
            Category::SmallVehicle => "Small Vehicle",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Category {
    type Err = Error;

    /// Accepts the canonical and display names, ignoring case, spaces,
    /// underscores and slashes.
    fn from_str(s: &str) -> Result<Self> {
        let key: String = s
            .chars()
            .filter(|c| !matches!(c, ' ' | '_' | '/' | '-'))
            .flat_map(char::to_lowercase)
            .collect();
        Category::ALL
            .into_iter()
            .find(|c| c.name().to_lowercase() == key)
            .ok_or_else(|| Error::invalid(format!("unknown category {s:?}")))
    }
}

/// Axis-aligned box in pixel coordinates with `xmax > xmin`, `ymax > ymin`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BBox {
    xmin: f64,
    ymin: f64,
    xmax: f64,
    ymax: f64,
}

impl BBox {
    pub fn new(xmin: f64, ymin: f64, xmax: f64, ymax: f64) -> Result<Self> {
        let finite = [xmin, ymin, xmax, ymax].iter().all(|v| v.is_finite());
        if !finite || xmax <= xmin || ymax <= ymin {
            return Err(Error::invalid(format!(
                "degenerate box ({xmin}, {ymin}, {xmax}, {ymax})"
            )));
        }
        Ok(BBox { xmin, ymin, xmax, ymax })
    }

    pub fn xmin(&self) -> f64 {
        self.xmin
    }

    pub fn ymin(&self) -> f64 {
        self.ymin
    }

    pub fn xmax(&self) -> f64 {
        self.xmax
    }

    pub fn ymax(&self) -> f64 {
        self.ymax
    }

    pub fn coords(&self) -> [f64; 4] {
        [self.xmin, self.ymin, self.xmax, self.ymax]
    }

    pub fn width(&self) -> f64 {
        self.xmax - self.xmin
    }

    pub fn height(&self) -> f64 {
        self.ymax - self.ymin
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    /// Intersection with another box, if it has positive area.
    pub fn intersect(&self, other: &BBox) -> Option<BBox> {
        BBox::new(
            self.xmin.max(other.xmin),
            self.ymin.max(other.ymin),
            self.xmax.min(other.xmax),
            self.ymax.min(other.ymax),
        )
        .ok()
    }

    pub fn scaled(&self, factor: f64) -> Result<BBox> {
        BBox::new(
            self.xmin * factor,
            self.ymin * factor,
            self.xmax * factor,
            self.ymax * factor,
        )
    }

    pub fn translated(&self, dx: f64, dy: f64) -> Result<BBox> {
        BBox::new(self.xmin + dx, self.ymin + dy, self.xmax + dx, self.ymax + dy)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroundTruthBox {
    pub image_id: String,
    pub category: Category,
    pub bbox: BBox,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Detection {
    pub image_id: String,
    pub category: Category,
    pub bbox: BBox,
    confidence: f64,
}

impl Detection {
    pub fn new(image_id: impl Into<String>, category: Category, bbox: BBox, confidence: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&confidence) {
            return Err(Error::invalid(format!("confidence {confidence} outside [0, 1]")));
        }
        Ok(Detection {
            image_id: image_id.into(),
            category,
            bbox,
            confidence,
        })
    }

    pub fn confidence(&self) -> f64 {
        self.confidence
    }
}

impl GroundTruthBox {
    pub fn new(image_id: impl Into<String>, category: Category, bbox: BBox) -> Self {
        GroundTruthBox {
            image_id: image_id.into(),
            category,
            bbox,
        }
    }
}
