//! `WCLS` classifier weight file.
//!
//! ```text
//! magic   "WCLS"
//! version u32          (= 1)
//! k       u32          classes
//! d       u32          dimension
//! s       f32          scale
//! k ×     (u32 len, len bytes UTF-8 class id)
//! k·d     f32          column-major: the d weights of class 0, then class 1, …
//! ```

use std::path::Path;

use crate::classifier::ClassifierWeights;
use crate::error::{Error, FormatError, Result};
use crate::io::cursor::Cursor;
use crate::numerics::DenseMatrix;

pub const WEIGHTS_MAGIC: [u8; 4] = *b"WCLS";
pub const WEIGHTS_VERSION: u32 = 1;

pub fn encode_weights(w: &ClassifierWeights) -> Vec<u8> {
    let (k, d) = (w.num_classes(), w.dim());
    let mut buf = Vec::with_capacity(20 + 4 * k * d);
    buf.extend_from_slice(&WEIGHTS_MAGIC);
    buf.extend_from_slice(&WEIGHTS_VERSION.to_le_bytes());
    buf.extend_from_slice(&(k as u32).to_le_bytes());
    buf.extend_from_slice(&(d as u32).to_le_bytes());
    buf.extend_from_slice(&(w.scale() as f32).to_le_bytes());
    for id in w.class_ids() {
        buf.extend_from_slice(&(id.len() as u32).to_le_bytes());
        buf.extend_from_slice(id.as_bytes());
    }
    for c in 0..k {
        for r in 0..d {
            buf.extend_from_slice(&(w.weights().get(r, c) as f32).to_le_bytes());
        }
    }
    buf
}

pub fn decode_weights(bytes: &[u8]) -> Result<ClassifierWeights> {
    let mut cur = Cursor::new(bytes);
    cur.expect_magic(WEIGHTS_MAGIC)?;
    let version = cur.u32("version")?;
    if version != WEIGHTS_VERSION {
        return Err(FormatError::UnsupportedVersion {
            found: version,
            supported: WEIGHTS_VERSION,
        }
        .into());
    }
    let k = cur.u32("class count")? as usize;
    let d = cur.u32("dimension")? as usize;
    if k == 0 || d == 0 {
        return Err(FormatError::InvalidHeader(format!("k = {k}, d = {d}; both must be ≥ 1")).into());
    }
    let scale = cur.f32("scale")?;
    if !(scale.is_finite() && scale > 0.0) {
        return Err(FormatError::InvalidHeader(format!("scale {scale} must be finite and positive")).into());
    }
    let mut ids = Vec::with_capacity(k.min(cur.remaining() / 4));
    for i in 0..k {
        let len = cur.u32("class id length")? as usize;
        let raw = cur.take(len, "class id bytes")?;
        let id = std::str::from_utf8(raw).map_err(|_| FormatError::InvalidUtf8(i))?;
        if id.is_empty() {
            return Err(FormatError::EmptyId(i).into());
        }
        if ids.iter().any(|x: &String| x == id) {
            return Err(FormatError::DuplicateId(id.to_owned()).into());
        }
        ids.push(id.to_owned());
    }
    let byte_len = (k as u64 * d as u64 * 4)
        .try_into()
        .ok()
        .filter(|&b: &usize| b <= cur.remaining())
        .ok_or(FormatError::Truncated {
            what: "weight payload",
            offset: cur.offset(),
        })?;
    let payload = cur.take(byte_len, "weight payload")?;
    let mut data = vec![0.0f64; k * d];
    for (i, chunk) in payload.chunks_exact(4).enumerate() {
        let v = f32::from_le_bytes(chunk.try_into().expect("4-byte chunk"));
        if !v.is_finite() {
            return Err(FormatError::NonFinite { index: i }.into());
        }
        let (c, r) = (i / d, i % d);
        data[r * k + c] = v as f64;
    }
    cur.finish()?;
    ClassifierWeights::new(DenseMatrix::new(d, k, data)?, ids, scale as f64)
}

pub fn write_weights(path: impl AsRef<Path>, w: &ClassifierWeights) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_weights(w)).map_err(|e| Error::io(path, e))
}

pub fn read_weights(path: impl AsRef<Path>) -> Result<ClassifierWeights> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_weights(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn weights() -> ClassifierWeights {
        let m = DenseMatrix::from_fn(3, 2, |r, c| r as f64 * 0.5 - c as f64);
        ClassifierWeights::new(m, vec!["ant".into(), "bee".into()], 10.0).unwrap()
    }

    #[test]
    fn round_trip_and_layout() {
        let w = weights();
        let bytes = encode_weights(&w);
        // header 20 + ids (4+3)*2 + 6 floats
        assert_eq!(bytes.len(), 20 + 14 + 24);
        // column-major: class "ant" first → (0, 0.5, 1.0)
        assert_eq!(&bytes[34..38], &0.0f32.to_le_bytes());
        assert_eq!(&bytes[38..42], &0.5f32.to_le_bytes());
        assert_eq!(decode_weights(&bytes).unwrap(), w);
    }

    #[test]
    fn every_truncation_is_typed() {
        let bytes = encode_weights(&weights());
        for cut in 0..bytes.len() {
            assert!(matches!(decode_weights(&bytes[..cut]), Err(Error::Format(_))), "cut {cut}");
        }
    }
}
