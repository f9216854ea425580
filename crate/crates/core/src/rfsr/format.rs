//! Little-endian binary model files.
//!
//! ```text
//! magic      "RFSR"
//! version    u16
//! scale      u8
//! radius     u8      shift radius of the feature stack
//! n_features u8
//! seed       u64
//! oob_r2     f64
//! oob_mse    f64
//! params     n_estimators u32, max_depth u32, min_samples_split u32,
//!            features_per_split u32, sample_rate f64, bootstrap u8
//! n_trees    u32
//! per tree   n_nodes u32, then per node:
//!            feature u8, threshold f32, left u32, right u32, value f32
//! crc32      u32 over every preceding byte
//! ```

use std::path::Path;

use super::forest::{Forest, Node, RegressionTree};
use super::{ForestParams, SrModel};
use crate::{Error, Result};

pub const MAGIC: &[u8; 4] = b"RFSR";
pub const FORMAT_VERSION: u16 = 1;

pub fn to_bytes(model: &SrModel) -> Vec<u8> {
    let f = &model.forest;
    let p = &f.params;
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.push(model.scale as u8);
    out.push(model.shift_radius as u8);
    out.push(f.n_features as u8);
    out.extend_from_slice(&f.seed.to_le_bytes());
    out.extend_from_slice(&f.oob_r2.to_le_bytes());
    out.extend_from_slice(&f.oob_mse.to_le_bytes());
    for v in [p.n_estimators, p.max_depth, p.min_samples_split, p.features_per_split] {
        out.extend_from_slice(&(v as u32).to_le_bytes());
    }
    out.extend_from_slice(&p.sample_rate.to_le_bytes());
    out.push(p.bootstrap as u8);
    out.extend_from_slice(&(f.trees.len() as u32).to_le_bytes());
    for tree in &f.trees {
        out.extend_from_slice(&(tree.nodes().len() as u32).to_le_bytes());
        for n in tree.nodes() {
            out.push(n.feature);
            out.extend_from_slice(&n.threshold.to_le_bytes());
            out.extend_from_slice(&n.left.to_le_bytes());
            out.extend_from_slice(&n.right.to_le_bytes());
            out.extend_from_slice(&n.value.to_le_bytes());
        }
    }
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::Format("file is truncated".into()));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        Ok(self.take(N)?.try_into().expect("slice length is N"))
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.array()?))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.array()?))
    }

    fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.array()?))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.array()?))
    }
}

const NODE_BYTES: usize = 17;

pub fn from_bytes(bytes: &[u8]) -> Result<SrModel> {
    if bytes.len() < MAGIC.len() + 2 + 4 {
        return Err(Error::Format("file is truncated".into()));
    }
    if &bytes[..4] != MAGIC {
        return Err(Error::Format("missing RFSR magic".into()));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != FORMAT_VERSION {
        return Err(Error::VersionMismatch {
            found: version,
            expected: FORMAT_VERSION,
        });
    }
    let (body, tail) = bytes.split_at(bytes.len() - 4);
    let stored = u32::from_le_bytes(tail.try_into().expect("four bytes"));
    let computed = crc32fast::hash(body);
    if stored != computed {
        return Err(Error::Checksum { stored, computed });
    }

    let mut r = Reader { buf: body, pos: 6 };
    let scale = r.u8()? as usize;
    let shift_radius = r.u8()? as usize;
    let n_features = r.u8()? as usize;
    let seed = r.u64()?;
    let oob_r2 = r.f64()?;
    let oob_mse = r.f64()?;
    let params = ForestParams {
        n_estimators: r.u32()? as usize,
        max_depth: r.u32()? as usize,
        min_samples_split: r.u32()? as usize,
        features_per_split: r.u32()? as usize,
        sample_rate: r.f64()?,
        bootstrap: r.u8()? != 0,
    };
    let n_trees = r.u32()? as usize;
    if n_trees != params.n_estimators {
        return Err(Error::Format(format!(
            "{n_trees} trees stored but n_estimators = {}",
            params.n_estimators
        )));
    }
    let mut trees = Vec::with_capacity(n_trees);
    for _ in 0..n_trees {
        let n_nodes = r.u32()? as usize;
        if n_nodes.saturating_mul(NODE_BYTES) > body.len() - r.pos {
            return Err(Error::Format("file is truncated".into()));
        }
        let mut nodes = Vec::with_capacity(n_nodes);
        for _ in 0..n_nodes {
            nodes.push(Node {
                feature: r.u8()?,
                threshold: r.f32()?,
                left: r.u32()?,
                right: r.u32()?,
                value: r.f32()?,
            });
        }
        trees.push(RegressionTree::from_nodes(nodes, n_features)?);
    }
    if r.pos != body.len() {
        return Err(Error::Format("trailing bytes after last tree".into()));
    }
    let forest = Forest::from_parts(trees, n_features, params, seed, oob_r2, oob_mse)?;
    SrModel::new(scale, shift_radius, forest).map_err(|e| Error::Format(e.to_string()))
}

pub fn save_model(model: &SrModel, path: &Path) -> Result<()> {
    std::fs::write(path, to_bytes(model)).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: &Path) -> Result<SrModel> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    from_bytes(&bytes)
}
