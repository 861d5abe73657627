//! Binary `.gnn` model files.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic "MIPGNN\0\0" | version u32 | arch tag (u32 len + utf8)
//! num_rounds u32 | hidden_dim u32 | tau f64 | tensor count u32
//! per tensor: name (u32 len + utf8) | rows u32 | cols u32 | rows·cols f64
//! ```

use crate::error::{Error, Result};
use crate::gnn::{Architecture, GnnModel, Tensor};

const MAGIC: &[u8; 8] = b"MIPGNN\0\0";
pub const MODEL_VERSION: u32 = 1;

fn put_u32(out: &mut Vec<u8>, v: usize) {
    out.extend_from_slice(&(v as u32).to_le_bytes());
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    put_u32(out, s.len());
    out.extend_from_slice(s.as_bytes());
}

/// Serializes `model`; non-finite weights are refused.
pub fn save_model(model: &GnnModel) -> Result<Vec<u8>> {
    if let Some((name, _)) = model.named_params().find(|(_, t)| !t.is_finite()) {
        return Err(Error::CorruptModel(format!(
            "tensor `{name}` has non-finite entries"
        )));
    }
    let mut out = Vec::with_capacity(64 + 8 * model.num_params());
    out.extend_from_slice(MAGIC);
    put_u32(&mut out, MODEL_VERSION as usize);
    put_str(&mut out, model.architecture().tag());
    put_u32(&mut out, model.num_rounds());
    put_u32(&mut out, model.hidden_dim());
    out.extend_from_slice(&model.tau().to_le_bytes());
    put_u32(&mut out, model.params().len());
    for (name, t) in model.named_params() {
        put_str(&mut out, name);
        put_u32(&mut out, t.rows());
        put_u32(&mut out, t.cols());
        for v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

fn format_err(msg: impl Into<String>) -> Error {
    Error::ModelFormat(msg.into())
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(format_err("unexpected end of file"));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")) as usize)
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }

    fn string(&mut self) -> Result<String> {
        let n = self.u32()?;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| format_err("invalid utf-8 name"))
    }
}

pub fn load_model(bytes: &[u8]) -> Result<GnnModel> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(MAGIC.len())? != MAGIC {
        return Err(format_err("not a model file"));
    }
    let version = r.u32()?;
    if version != MODEL_VERSION as usize {
        return Err(format_err(format!(
            "unsupported version {version} (expected {MODEL_VERSION})"
        )));
    }
    let tag = r.string()?;
    let arch: Architecture = tag
        .parse()
        .map_err(|_| format_err(format!("unknown architecture `{tag}`")))?;
    let rounds = r.u32()?;
    let hidden = r.u32()?;
    let tau = r.f64()?;
    let count = r.u32()?;
    let mut tensors = Vec::with_capacity(count.min(1024));
    for _ in 0..count {
        let name = r.string()?;
        let rows = r.u32()?;
        let cols = r.u32()?;
        let len = rows
            .checked_mul(cols)
            .and_then(|n| n.checked_mul(8))
            .ok_or_else(|| format_err("tensor too large"))?;
        let raw = r.take(len)?;
        let data = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        tensors.push((name, Tensor::from_vec(rows, cols, data)));
    }
    if r.pos != bytes.len() {
        return Err(format_err("trailing bytes after last tensor"));
    }
    GnnModel::from_parts(arch, hidden, rounds, tau, tensors)
}
