//! Binary `.feat` container.
//!
//! ```text
//! header (24 bytes)
//!   0  5  magic "FEAT1"
//!   5  1  pad, 0
//!   6  2  u16 version = 1
//!   8  4  u32 N  samples
//!  12  4  u32 T  classes
//!  16  4  u32 C  channels
//!  20  4  u32 S  spatial size
//! per sample (25 + 4·C·S·S bytes)
//!   u32 image_id, u32 class_id, u8 difficult,
//!   4 × f32 box (x1, y1, x2, y2),
//!   C·S·S × f32 values, channel-major (channel, row, col)
//! ```
//!
//! All integers and floats are little-endian.

use std::fs;
use std::path::Path;

use featedit_core::{BBox, Dataset, FeatureMap, LabeledSample};

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 5] = b"FEAT1";
pub const VERSION: u16 = 1;
pub const HEADER_LEN: usize = 24;

pub fn sample_len(channels: usize, spatial: usize) -> usize {
    4 + 4 + 1 + 16 + 4 * channels * spatial * spatial
}

pub fn encode_dataset(d: &Dataset) -> Vec<u8> {
    let mut buf = Vec::with_capacity(HEADER_LEN + d.len() * sample_len(d.channels(), d.spatial()));
    buf.extend_from_slice(MAGIC);
    buf.push(0);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    for v in [d.len(), d.num_classes(), d.channels(), d.spatial()] {
        buf.extend_from_slice(&(v as u32).to_le_bytes());
    }
    for s in d.samples() {
        buf.extend_from_slice(&s.image_id.to_le_bytes());
        buf.extend_from_slice(&s.class_id.to_le_bytes());
        buf.push(s.difficult as u8);
        for v in [s.bbox.x1, s.bbox.y1, s.bbox.x2, s.bbox.y2] {
            buf.extend_from_slice(&(v as f32).to_le_bytes());
        }
        for v in s.feature.values() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    buf
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    context: &'a str,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos + n;
        if end > self.bytes.len() {
            return Err(Error::Truncation {
                context: self.context.to_string(),
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

    fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

pub fn decode_dataset(bytes: &[u8], context: &str) -> Result<Dataset> {
    if bytes.len() < 8 || &bytes[..5] != MAGIC || bytes[5] != 0 {
        return Err(Error::Format(format!("{context}: not a feature file (bad magic)")));
    }
    if u16::from_le_bytes([bytes[6], bytes[7]]) != VERSION {
        return Err(Error::Format(format!("{context}: unsupported version")));
    }
    let mut r = Reader {
        bytes,
        pos: 8,
        context,
    };
    let n = r.u32()? as usize;
    let t = r.u32()? as usize;
    let c = r.u32()? as usize;
    let s = r.u32()? as usize;
    if c == 0 || s == 0 {
        return Err(Error::Format(format!("{context}: unsupported header")));
    }
    let mut d = Dataset::new(t, c, s)?;
    let count = c * s * s;
    for j in 0..n {
        let image_id = r.u32()?;
        let class_id = r.u32()?;
        let difficult = match r.take(1)?[0] {
            0 => false,
            1 => true,
            _ => return Err(Error::Format(format!("{context}: sample {j} difficult flag"))),
        };
        let mut b = [0f64; 4];
        for v in &mut b {
            *v = r.f32()? as f64;
        }
        let raw = r.take(4 * count)?;
        let values: Vec<f32> = raw
            .chunks_exact(4)
            .map(|ch| f32::from_le_bytes(ch.try_into().unwrap()))
            .collect();
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Value { sample: j });
        }
        let feature = FeatureMap::new(c, s, values)?;
        let bbox = BBox {
            x1: b[0],
            y1: b[1],
            x2: b[2],
            y2: b[3],
        };
        let sample = LabeledSample::new(feature, class_id, bbox, image_id, difficult)
            .map_err(|e| Error::Format(format!("{context}: sample {j}: {e}")))?;
        d.push(sample)
            .map_err(|e| Error::Format(format!("{context}: sample {j}: {e}")))?;
    }
    if r.pos != bytes.len() {
        return Err(Error::Format(format!(
            "{context}: {} trailing bytes",
            bytes.len() - r.pos
        )));
    }
    Ok(d)
}

pub fn read_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_dataset(&bytes, &path.display().to_string())
}

pub fn write_dataset(d: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_dataset(d)).map_err(|e| Error::io(path, e))
}
