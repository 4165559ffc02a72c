//! Binary model files.
//!
//! SVM (`.lmod`): `"LMOD1"`, u32 D, D × f64 weights, f64 bias, u32 class_id.
//! Box regressor (`.lreg`): `"LREG1"`, u32 D, 4 × D × f64 weights (rows
//! tx, ty, tw, th), 4 × f64 biases, f64 ridge_lambda, u32 class_id.
//! Little-endian throughout.

use std::fs;
use std::path::Path;

use featedit_core::{BoxRegressor, LinearModel};

use crate::error::{Error, Result};

pub const SVM_MAGIC: &[u8; 5] = b"LMOD1";
pub const REGRESSOR_MAGIC: &[u8; 5] = b"LREG1";

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
    context: String,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos + n;
        if end > self.bytes.len() {
            return Err(Error::Truncation {
                context: self.context.clone(),
                needed: end - self.bytes.len(),
            });
        }
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        let v = f64::from_le_bytes(self.take(8)?.try_into().unwrap());
        if !v.is_finite() {
            return Err(Error::Format(format!("{}: non-finite parameter", self.context)));
        }
        Ok(v)
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        (0..n).map(|_| self.f64()).collect()
    }

    fn finish(&self) -> Result<()> {
        if self.pos == self.bytes.len() {
            Ok(())
        } else {
            Err(Error::Format(format!("{}: trailing bytes", self.context)))
        }
    }
}

fn open<'a>(bytes: &'a [u8], magic: &[u8; 5], context: &str) -> Result<Cursor<'a>> {
    if bytes.len() < 5 || &bytes[..5] != magic {
        return Err(Error::Format(format!("{context}: bad model magic")));
    }
    Ok(Cursor {
        bytes,
        pos: 5,
        context: context.to_string(),
    })
}

pub fn encode_svm(m: &LinearModel) -> Vec<u8> {
    let mut buf = Vec::with_capacity(5 + 4 + 8 * (m.dim() + 1) + 4);
    buf.extend_from_slice(SVM_MAGIC);
    buf.extend_from_slice(&(m.dim() as u32).to_le_bytes());
    for w in &m.weights {
        buf.extend_from_slice(&w.to_le_bytes());
    }
    buf.extend_from_slice(&m.bias.to_le_bytes());
    buf.extend_from_slice(&m.class_id.to_le_bytes());
    buf
}

pub fn decode_svm(bytes: &[u8], context: &str) -> Result<LinearModel> {
    let mut c = open(bytes, SVM_MAGIC, context)?;
    let d = c.u32()? as usize;
    let weights = c.f64s(d)?;
    let bias = c.f64()?;
    let class_id = c.u32()?;
    c.finish()?;
    Ok(LinearModel {
        weights,
        bias,
        class_id,
    })
}

pub fn encode_regressor(r: &BoxRegressor) -> Vec<u8> {
    let mut buf = Vec::new();
    buf.extend_from_slice(REGRESSOR_MAGIC);
    buf.extend_from_slice(&(r.dim() as u32).to_le_bytes());
    for row in &r.weights {
        for w in row {
            buf.extend_from_slice(&w.to_le_bytes());
        }
    }
    for b in &r.biases {
        buf.extend_from_slice(&b.to_le_bytes());
    }
    buf.extend_from_slice(&r.ridge_lambda.to_le_bytes());
    buf.extend_from_slice(&r.class_id.to_le_bytes());
    buf
}

pub fn decode_regressor(bytes: &[u8], context: &str) -> Result<BoxRegressor> {
    let mut c = open(bytes, REGRESSOR_MAGIC, context)?;
    let d = c.u32()? as usize;
    let weights = [c.f64s(d)?, c.f64s(d)?, c.f64s(d)?, c.f64s(d)?];
    let biases = [c.f64()?, c.f64()?, c.f64()?, c.f64()?];
    let ridge_lambda = c.f64()?;
    let class_id = c.u32()?;
    c.finish()?;
    Ok(BoxRegressor {
        weights,
        biases,
        ridge_lambda,
        class_id,
    })
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_svm(path: impl AsRef<Path>) -> Result<LinearModel> {
    let p = path.as_ref();
    decode_svm(&read(p)?, &p.display().to_string())
}

pub fn write_svm(m: &LinearModel, path: impl AsRef<Path>) -> Result<()> {
    write(path.as_ref(), &encode_svm(m))
}

pub fn read_regressor(path: impl AsRef<Path>) -> Result<BoxRegressor> {
    let p = path.as_ref();
    decode_regressor(&read(p)?, &p.display().to_string())
}

pub fn write_regressor(r: &BoxRegressor, path: impl AsRef<Path>) -> Result<()> {
    write(path.as_ref(), &encode_regressor(r))
}
