//! Binary checkpoint format.
//!
//! ```text
//! "IRSV1"                       5 bytes
//! layer count                   u32 LE
//! per layer: d_in, d_out        u32 LE each
//!            has_bias           u8 (0 or 1)
//! per layer: weights            d_in*d_out f64 LE, row-major
//!            bias (if present)  d_out f64 LE
//! ```

use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{LayerParams, ModelParams};
use crate::numerics::Matrix2D;

pub const CHECKPOINT_MAGIC: &[u8; 5] = b"IRSV1";

pub fn encode_checkpoint(params: &ModelParams) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + 8 * params.num_params());
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&(params.layers.len() as u32).to_le_bytes());
    for l in &params.layers {
        out.extend_from_slice(&(l.weight.rows() as u32).to_le_bytes());
        out.extend_from_slice(&(l.weight.cols() as u32).to_le_bytes());
        out.push(u8::from(l.bias.is_some()));
    }
    for l in &params.layers {
        for v in l.weight.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for v in l.bias.iter().flatten() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.at.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::Checkpoint(format!("truncated at byte {}", self.at)))?;
        let s = &self.bytes[self.at..end];
        self.at = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let raw = self.take(n.checked_mul(8).ok_or_else(|| Error::Checkpoint("size overflow".into()))?)?;
        Ok(raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect())
    }
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<ModelParams> {
    let mut r = Reader { bytes, at: 0 };
    if r.take(5)? != CHECKPOINT_MAGIC {
        return Err(Error::Checkpoint("bad magic".into()));
    }
    let n_layers = r.u32()? as usize;
    let mut shapes = Vec::with_capacity(n_layers.min(1024));
    for _ in 0..n_layers {
        let d_in = r.u32()? as usize;
        let d_out = r.u32()? as usize;
        let bias = match r.take(1)?[0] {
            0 => false,
            1 => true,
            other => return Err(Error::Checkpoint(format!("bad bias flag {other}"))),
        };
        shapes.push((d_in, d_out, bias));
    }
    let mut layers = Vec::with_capacity(n_layers);
    for (d_in, d_out, bias) in shapes {
        let weight = Matrix2D::new(d_in, d_out, r.f64s(d_in * d_out)?)?;
        let bias = if bias { Some(r.f64s(d_out)?) } else { None };
        layers.push(LayerParams { weight, bias });
    }
    if r.at != bytes.len() {
        return Err(Error::Checkpoint(format!("{} trailing bytes", bytes.len() - r.at)));
    }
    Ok(ModelParams { layers })
}

pub fn save_checkpoint(path: &Path, params: &ModelParams) -> Result<()> {
    crate::io::write_atomic(path, |w| w.write_all(&encode_checkpoint(params)))
}

pub fn load_checkpoint(path: &Path) -> Result<ModelParams> {
    decode_checkpoint(&std::fs::read(path)?)
}
