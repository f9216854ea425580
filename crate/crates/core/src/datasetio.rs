//! Label ingestion, class aggregation, tiling and train/test splitting.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::deteval::{BBox, Category, GroundTruthBox};
use crate::raster::{Raster, Samples};
use crate::{Error, Result};

pub const DEFAULT_TILE_SIZE: usize = 544;
pub const DEFAULT_MIN_RETAINED: f64 = 0.25;
pub const DEFAULT_TRAIN_RATIO: f64 = 0.60;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ClassOutcome {
    Keep(Category),
    Discard,
}

/// xView class names grouped into the five evaluation categories.
const KEPT: &[(&str, Category)] = &[
    ("Fixed-wing Aircraft", Category::SmallAircraft),
    ("Small Aircraft", Category::SmallAircraft),
    ("Cargo Plane", Category::LargeAircraft),
    ("Passenger Vehicle", Category::SmallVehicle),
    ("Small Car", Category::SmallVehicle),
    ("Pickup Truck", Category::SmallVehicle),
    ("Utility Truck", Category::SmallVehicle),
    ("Bus", Category::BusTruck),
    ("Truck", Category::BusTruck),
    ("Cargo Truck", Category::BusTruck),
    ("Truck w/Box", Category::BusTruck),
    ("Truck w/Flatbed", Category::BusTruck),
    ("Truck w/Liquid", Category::BusTruck),
    ("Dump Truck", Category::BusTruck),
    ("Haul Truck", Category::BusTruck),
    ("Cement Mixer", Category::BusTruck),
    ("Truck Tractor", Category::BusTruck),
    ("Motorboat", Category::Boat),
    ("Sailboat", Category::Boat),
    ("Yacht", Category::Boat),
    ("Maritime Vessel", Category::Boat),
    ("Tugboat", Category::Boat),
    ("Barge", Category::Boat),
    ("Fishing Vessel", Category::Boat),
    ("Ferry", Category::Boat),
];

/// Remaining xView classes; dropped silently.
const DISCARDED: &[&str] = &[
    "Helicopter",
    "Trailer",
    "Crane Truck",
    "Railway Vehicle",
    "Passenger Car",
    "Cargo Car",
    "Flat Car",
    "Tank car",
    "Locomotive",
    "Container Ship",
    "Oil Tanker",
    "Engineering Vehicle",
    "Tower crane",
    "Container Crane",
    "Reach Stacker",
    "Straddle Carrier",
    "Mobile Crane",
    "Scraper/Tractor",
    "Front loader/Bulldozer",
    "Excavator",
    "Ground Grader",
    "Hut/Tent",
    "Shed",
    "Building",
    "Aircraft Hangar",
    "Hangar",
    "Damaged Building",
    "Facility",
    "Construction Site",
    "Vehicle Lot",
    "Helipad",
    "Storage Tank",
    "Shipping container lot",
    "Shipping Container",
    "Pylon",
    "Tower",
];

fn normalize_name(raw: &str) -> String {
    raw.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

/// Raw label name to outcome. Lookups ignore case and repeated whitespace.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassMap {
    entries: BTreeMap<String, ClassOutcome>,
}

impl ClassMap {
    pub fn xview() -> Self {
        let entries = KEPT
            .iter()
            .map(|(n, c)| (normalize_name(n), ClassOutcome::Keep(*c)))
            .chain(DISCARDED.iter().map(|n| (normalize_name(n), ClassOutcome::Discard)))
            .collect();
        ClassMap { entries }
    }

    /// Known outcome for `raw`, or `None` for an unlisted name.
    pub fn get(&self, raw: &str) -> Option<ClassOutcome> {
        self.entries.get(&normalize_name(raw)).copied()
    }

    /// Like [`ClassMap::get`], but unlisted names are discarded with a warning.
    pub fn lookup(&self, raw: &str) -> ClassOutcome {
        self.get(raw).unwrap_or_else(|| {
            log::warn!("unknown class name {raw:?} discarded");
            ClassOutcome::Discard
        })
    }
}

impl Default for ClassMap {
    fn default() -> Self {
        Self::xview()
    }
}

pub fn aggregate_class(raw: &str) -> ClassOutcome {
    ClassMap::xview().lookup(raw)
}

/// Multiplies every coordinate by `factor`, keeping real values.
pub fn rescale_boxes(boxes: &[GroundTruthBox], factor: f64) -> Result<Vec<GroundTruthBox>> {
    if !(factor.is_finite() && factor > 0.0) {
        return Err(Error::invalid(format!("rescale factor must be positive, got {factor}")));
    }
    boxes
        .iter()
        .map(|b| {
            Ok(GroundTruthBox::new(
                b.image_id.clone(),
                b.category,
                b.bbox.scaled(factor)?,
            ))
        })
        .collect()
}

/// Top-left crop to the largest dimensions divisible by `factor`.
pub fn crop_to_multiple(img: &Raster, factor: usize) -> Result<Raster> {
    if factor == 0 {
        return Err(Error::invalid("crop factor must be positive"));
    }
    let w = img.width() / factor * factor;
    let h = img.height() / factor * factor;
    if w == 0 || h == 0 {
        return Err(Error::invalid(format!(
            "{}x{} image is smaller than factor {factor}",
            img.width(),
            img.height()
        )));
    }
    if (w, h) == (img.width(), img.height()) {
        return Ok(img.clone());
    }
    img.crop(0, 0, w, h)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TileConfig {
    pub size: usize,
    pub overlap: usize,
    /// Clipped boxes keeping less than this fraction of their area are dropped.
    pub min_retained: f64,
}

impl Default for TileConfig {
    fn default() -> Self {
        TileConfig {
            size: DEFAULT_TILE_SIZE,
            overlap: 0,
            min_retained: DEFAULT_MIN_RETAINED,
        }
    }
}

impl TileConfig {
    fn validate(&self) -> Result<()> {
        if self.size < 32 {
            return Err(Error::invalid(format!("tile size {} below 32", self.size)));
        }
        if self.overlap >= self.size {
            return Err(Error::invalid(format!(
                "overlap {} not below tile size {}",
                self.overlap, self.size
            )));
        }
        if !(0.0..=1.0).contains(&self.min_retained) {
            return Err(Error::invalid("min_retained must lie in [0, 1]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tile {
    pub parent_id: String,
    pub origin_x: usize,
    pub origin_y: usize,
    /// True when the parent was smaller than the tile and zeros were added.
    pub padded: bool,
    pub raster: Raster,
    /// Boxes in tile coordinates, with `image_id` set to [`Tile::id`].
    pub boxes: Vec<GroundTruthBox>,
}

impl Tile {
    pub fn id(&self) -> String {
        tile_id(&self.parent_id, self.origin_x, self.origin_y)
    }

    pub fn manifest_entry(&self) -> TileEntry {
        TileEntry {
            id: self.id(),
            parent: self.parent_id.clone(),
            origin_x: self.origin_x,
            origin_y: self.origin_y,
            size: self.raster.width(),
            padded: self.padded,
            n_boxes: self.boxes.len(),
        }
    }
}

fn tile_id(parent: &str, x: usize, y: usize) -> String {
    format!("{parent}_{x}_{y}")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TileEntry {
    pub id: String,
    pub parent: String,
    pub origin_x: usize,
    pub origin_y: usize,
    pub size: usize,
    pub padded: bool,
    pub n_boxes: usize,
}

/// Tile origins along one axis; the last tile ends at the image edge.
fn axis_origins(len: usize, size: usize, stride: usize) -> Vec<usize> {
    if len <= size {
        return vec![0];
    }
    let mut out = Vec::new();
    let mut o = 0;
    while o + size < len {
        out.push(o);
        o += stride;
    }
    out.push(len - size);
    out.dedup();
    out
}

/// `size`x`size` window at (`x0`, `y0`), zero-filled where it leaves the image.
fn window(img: &Raster, x0: usize, y0: usize, size: usize) -> Result<Raster> {
    if x0 + size <= img.width() && y0 + size <= img.height() {
        return img.crop(x0, y0, size, size);
    }
    let n = img.bands().count();
    let w = size.min(img.width() - x0);
    let h = size.min(img.height() - y0);
    let inner = img.crop(x0, y0, w, h)?;
    let copy = |dst: &mut [f64], src: &[f64]| {
        for y in 0..h {
            dst[y * size * n..(y * size + w) * n].copy_from_slice(&src[y * w * n..(y + 1) * w * n]);
        }
    };
    let mut data = vec![0.0; size * size * n];
    copy(&mut data, &inner.to_real_vec());
    let out = match img.samples() {
        Samples::U8(_) => Raster::from_u8(size, size, img.bands(), data.iter().map(|&v| v as u8).collect())?,
        Samples::Real(_) => Raster::from_real(size, size, img.bands(), data)?,
    };
    Ok(out.with_gsd(img.gsd_cm()))
}

/// Cuts `img` into a grid of square tiles with stride `size - overlap`.
///
/// Right and bottom tiles are shifted back to end at the image edge. An image
/// smaller than the tile yields one zero-padded tile with `padded` set.
/// Boxes are clipped to each tile and kept if the clip retains at least
/// `min_retained` of the original area.
pub fn tile(img: &Raster, parent_id: &str, boxes: &[GroundTruthBox], cfg: &TileConfig) -> Result<Vec<Tile>> {
    cfg.validate()?;
    let stride = cfg.size - cfg.overlap;
    let xs = axis_origins(img.width(), cfg.size, stride);
    let ys = axis_origins(img.height(), cfg.size, stride);
    let padded = img.width() < cfg.size || img.height() < cfg.size;
    if padded {
        log::warn!(
            "{parent_id}: {}x{} image smaller than tile size {}, zero-padded",
            img.width(),
            img.height(),
            cfg.size
        );
    }
    let origins: Vec<(usize, usize)> = ys.iter().flat_map(|&y| xs.iter().map(move |&x| (x, y))).collect();
    origins
        .par_iter()
        .map(|&(ox, oy)| {
            let id = tile_id(parent_id, ox, oy);
            let bounds = BBox::new(ox as f64, oy as f64, (ox + cfg.size) as f64, (oy + cfg.size) as f64)?;
            let mut kept = Vec::new();
            for b in boxes {
                if let Some(clip) = b.bbox.intersect(&bounds) {
                    if clip.area() >= cfg.min_retained * b.bbox.area() {
                        kept.push(GroundTruthBox::new(
                            id.clone(),
                            b.category,
                            clip.translated(-(ox as f64), -(oy as f64))?,
                        ));
                    }
                }
            }
            Ok(Tile {
                parent_id: parent_id.to_string(),
                origin_x: ox,
                origin_y: oy,
                padded,
                raster: window(img, ox, oy, cfg.size)?,
                boxes: kept,
            })
        })
        .collect()
}

/// Seeded uniform shuffle; the first `round(ratio * n)` items train.
pub fn split<T: Clone>(items: &[T], ratio: f64, seed: u64) -> Result<(Vec<T>, Vec<T>)> {
    if items.is_empty() {
        return Err(Error::invalid("cannot split an empty set"));
    }
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::invalid(format!("split ratio must lie in (0, 1), got {ratio}")));
    }
    let mut order: Vec<usize> = (0..items.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = (ratio * items.len() as f64).round() as usize;
    let pick = |idx: &[usize]| idx.iter().map(|&i| items[i].clone()).collect();
    Ok((pick(&order[..n_train]), pick(&order[n_train..])))
}

/// Train/test partition over image ids, reused for every resolution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub seed: u64,
    pub ratio: f64,
    pub train: Vec<String>,
    pub test: Vec<String>,
}

impl SplitManifest {
    /// Ids are deduplicated and sorted before shuffling, so the partition
    /// depends only on the set of ids. Both halves are listed sorted.
    pub fn from_ids<S: AsRef<str>>(ids: &[S], ratio: f64, seed: u64) -> Result<Self> {
        let unique: Vec<String> = ids
            .iter()
            .map(|s| s.as_ref().to_string())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let (mut train, mut test) = split(&unique, ratio, seed)?;
        train.sort();
        test.sort();
        Ok(SplitManifest {
            seed,
            ratio,
            train,
            test,
        })
    }

    pub fn is_train(&self, id: &str) -> bool {
        self.train.binary_search_by(|t| t.as_str().cmp(id)).is_ok()
    }
}

/// Reads a GeoJSON-like feature collection.
///
/// Each feature needs `properties.type_name`, `properties.image_id` and
/// `properties.bounds_imcoords` ("xmin,ymin,xmax,ymax"). Discarded classes
/// and degenerate boxes are skipped.
pub fn parse_geojson(text: &str, map: &ClassMap) -> Result<Vec<GroundTruthBox>> {
    let doc: serde_json::Value = serde_json::from_str(text)?;
    let features = doc
        .get("features")
        .and_then(|f| f.as_array())
        .ok_or_else(|| Error::Format("missing \"features\" array".into()))?;
    let mut out = Vec::new();
    let mut degenerate = 0usize;
    for (i, feat) in features.iter().enumerate() {
        let props = feat
            .get("properties")
            .ok_or_else(|| Error::Format(format!("feature {i}: missing properties")))?;
        let field = |name: &str| {
            props
                .get(name)
                .and_then(|v| v.as_str())
                .ok_or_else(|| Error::Format(format!("feature {i}: missing string property {name:?}")))
        };
        let category = match map.lookup(field("type_name")?) {
            ClassOutcome::Keep(c) => c,
            ClassOutcome::Discard => continue,
        };
        let image_id = field("image_id")?;
        let coords: Vec<f64> = field("bounds_imcoords")?
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Format(format!("feature {i}: bad bounds_imcoords: {e}")))?;
        if coords.len() != 4 {
            return Err(Error::Format(format!("feature {i}: bounds_imcoords needs 4 values")));
        }
        match BBox::new(coords[0], coords[1], coords[2], coords[3]) {
            Ok(b) => out.push(GroundTruthBox::new(image_id, category, b)),
            Err(_) => degenerate += 1,
        }
    }
    if degenerate > 0 {
        log::warn!("{degenerate} degenerate box(es) skipped");
    }
    Ok(out)
}
