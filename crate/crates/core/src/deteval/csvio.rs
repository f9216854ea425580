use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use csv::{ReaderBuilder, StringRecord, Trim};

use super::significance::{format_sigma_diff, ComparisonResult};
use super::{BBox, Category, Detection, GroundTruthBox};
use crate::{Error, Result};

const GT_HEADER: [&str; 6] = ["image_id", "category", "xmin", "ymin", "xmax", "ymax"];
const DET_HEADER: [&str; 7] = ["image_id", "category", "xmin", "ymin", "xmax", "ymax", "confidence"];

fn parse_err(line: u64, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

/// Reads rows after checking the header, handing each record and its
/// 1-based line number to `row`.
fn read_rows<R: Read, T>(
    input: R,
    header: &[&str],
    mut row: impl FnMut(&StringRecord, u64) -> Result<T>,
) -> Result<Vec<T>> {
    let mut rdr = ReaderBuilder::new().trim(Trim::All).from_reader(input);
    let got = rdr.headers().map_err(|e| parse_err(1, e.to_string()))?.clone();
    let names: Vec<&str> = got.iter().collect();
    if names != header {
        return Err(parse_err(
            1,
            format!("expected header {}, got {}", header.join(","), names.join(",")),
        ));
    }
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        out.push(row(&rec, line)?);
    }
    Ok(out)
}

fn field_f64(rec: &StringRecord, i: usize, name: &str, line: u64) -> Result<f64> {
    let s = &rec[i];
    s.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| parse_err(line, format!("{name}: not a finite number: {s:?}")))
}

fn common_fields(rec: &StringRecord, line: u64) -> Result<(String, Category, BBox)> {
    let image_id = rec[0].to_string();
    if image_id.is_empty() {
        return Err(parse_err(line, "empty image_id"));
    }
    let category: Category = rec[1]
        .parse()
        .map_err(|_| parse_err(line, format!("unknown category {:?}", &rec[1])))?;
    let c: Vec<f64> = (2..6)
        .map(|i| field_f64(rec, i, GT_HEADER[i], line))
        .collect::<Result<_>>()?;
    let bbox = BBox::new(c[0], c[1], c[2], c[3]).map_err(|e| parse_err(line, e.to_string()))?;
    Ok((image_id, category, bbox))
}

pub fn parse_ground_truth<R: Read>(input: R) -> Result<Vec<GroundTruthBox>> {
    read_rows(input, &GT_HEADER, |rec, line| {
        let (id, cat, bbox) = common_fields(rec, line)?;
        Ok(GroundTruthBox::new(id, cat, bbox))
    })
}

pub fn parse_detections<R: Read>(input: R) -> Result<Vec<Detection>> {
    read_rows(input, &DET_HEADER, |rec, line| {
        let (id, cat, bbox) = common_fields(rec, line)?;
        let conf = field_f64(rec, 6, "confidence", line)?;
        Detection::new(id, cat, bbox, conf).map_err(|e| parse_err(line, e.to_string()))
    })
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::io(path, e))
}

/// Parse errors from a file carry the file path in their message.
fn with_path<T>(path: &Path, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::Parse { line, message } => Error::Parse {
            line,
            message: format!("{}: {message}", path.display()),
        },
        other => other,
    })
}

pub fn read_ground_truth(path: &Path) -> Result<Vec<GroundTruthBox>> {
    with_path(path, parse_ground_truth(open(path)?))
}

pub fn read_detections(path: &Path) -> Result<Vec<Detection>> {
    with_path(path, parse_detections(open(path)?))
}

/// Writes ground truth in the format [`parse_ground_truth`] reads.
pub fn write_ground_truth<W: Write>(out: W, boxes: &[GroundTruthBox]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| Error::Format(e.to_string());
    w.write_record(GT_HEADER).map_err(csv_err)?;
    for b in boxes {
        let mut rec = vec![b.image_id.clone(), b.category.name().to_string()];
        rec.extend(b.bbox.coords().iter().map(|c| c.to_string()));
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::Format(e.to_string()))?;
    Ok(())
}

/// One row of the detection summary table.
#[derive(Debug, Clone, PartialEq)]
pub struct Table4Row {
    pub model: String,
    pub data: String,
    pub gsd_cm: f64,
    pub map: f64,
    pub sigma: f64,
    pub comparison: Option<ComparisonResult>,
}

impl Table4Row {
    /// "0.60 ± 0.03 (+1.7σ)", or "0.53 ± 0.03" without a baseline.
    pub fn cell(&self) -> String {
        let base = format!("{:.2} ± {:.2}", self.map, self.sigma);
        match &self.comparison {
            Some(c) => format!("{base} ({})", format_sigma_diff(c.sigma_diff)),
            None => base,
        }
    }
}

/// Writes `model,data,gsd_cm,map,sigma[,sigma_diff],cell`. The `sigma_diff`
/// column appears only if some row has a baseline comparison.
pub fn write_table4_csv<W: Write>(out: W, rows: &[Table4Row]) -> Result<()> {
    let with_diff = rows.iter().any(|r| r.comparison.is_some());
    let mut w = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| Error::Format(e.to_string());
    let mut header = vec!["model", "data", "gsd_cm", "map", "sigma"];
    if with_diff {
        header.push("sigma_diff");
    }
    header.push("cell");
    w.write_record(&header).map_err(csv_err)?;
    for r in rows {
        let mut rec = vec![
            r.model.clone(),
            r.data.clone(),
            format!("{}", r.gsd_cm),
            format!("{:.6}", r.map),
            format!("{:.6}", r.sigma),
        ];
        if with_diff {
            rec.push(match r.comparison.and_then(|c| c.sigma_diff) {
                Some(d) => format!("{d:.6}"),
                None => String::new(),
            });
        }
        rec.push(r.cell());
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::Format(e.to_string()))?;
    Ok(())
}
