//! `FSTO` binary feature store.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic   "FSTO"
//! version u32          (= 1)
//! n       u64          examples
//! d       u32          feature dimension
//! n·d     f32          row-major, one row per example
//! n ×     (u32 len, len bytes UTF-8 id)
//! ```

use std::collections::HashMap;
use std::path::Path;

use crate::error::{Error, FormatError, Result};
use crate::io::cursor::Cursor;
use crate::numerics::DenseMatrix;

pub const FEATURE_MAGIC: [u8; 4] = *b"FSTO";
pub const FEATURE_VERSION: u32 = 1;

/// Example ids plus their `d × N` feature matrix (one column per example).
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureStore {
    ids: Vec<String>,
    features: DenseMatrix,
    index: HashMap<String, usize>,
}

impl FeatureStore {
    pub fn new(ids: Vec<String>, features: DenseMatrix) -> Result<Self> {
        if ids.is_empty() || features.rows() == 0 {
            return Err(Error::contract("feature store needs N ≥ 1 and d ≥ 1"));
        }
        if ids.len() != features.cols() {
            return Err(Error::contract(format!(
                "{} ids for {} feature columns",
                ids.len(),
                features.cols()
            )));
        }
        let mut index = HashMap::with_capacity(ids.len());
        for (i, id) in ids.iter().enumerate() {
            if id.is_empty() {
                return Err(FormatError::EmptyId(i).into());
            }
            if index.insert(id.clone(), i).is_some() {
                return Err(FormatError::DuplicateId(id.clone()).into());
            }
        }
        features.check_finite("feature store")?;
        Ok(Self { ids, features, index })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.rows()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn features(&self) -> &DenseMatrix {
        &self.features
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn vector(&self, i: usize) -> Vec<f64> {
        self.features.column(i)
    }

    /// `d × |idx|` sub-matrix in the given order.
    pub fn select(&self, idx: &[usize]) -> DenseMatrix {
        self.features.select_columns(idx)
    }
}

pub fn encode_feature_store(store: &FeatureStore) -> Vec<u8> {
    let (n, d) = (store.len(), store.dim());
    let id_bytes: usize = store.ids.iter().map(|s| 4 + s.len()).sum();
    let mut buf = Vec::with_capacity(20 + 4 * n * d + id_bytes);
    buf.extend_from_slice(&FEATURE_MAGIC);
    buf.extend_from_slice(&FEATURE_VERSION.to_le_bytes());
    buf.extend_from_slice(&(n as u64).to_le_bytes());
    buf.extend_from_slice(&(d as u32).to_le_bytes());
    for j in 0..n {
        for r in 0..d {
            buf.extend_from_slice(&(store.features.get(r, j) as f32).to_le_bytes());
        }
    }
    for id in &store.ids {
        buf.extend_from_slice(&(id.len() as u32).to_le_bytes());
        buf.extend_from_slice(id.as_bytes());
    }
    buf
}

pub fn decode_feature_store(bytes: &[u8]) -> Result<FeatureStore> {
    let mut cur = Cursor::new(bytes);
    cur.expect_magic(FEATURE_MAGIC)?;
    let version = cur.u32("version")?;
    if version != FEATURE_VERSION {
        return Err(FormatError::UnsupportedVersion {
            found: version,
            supported: FEATURE_VERSION,
        }
        .into());
    }
    let n = cur.u64("example count")?;
    let d = cur.u32("dimension")? as u64;
    if n == 0 || d == 0 {
        return Err(FormatError::InvalidHeader(format!("n = {n}, d = {d}; both must be ≥ 1")).into());
    }
    let count = n
        .checked_mul(d)
        .and_then(|c| c.checked_mul(4))
        .filter(|&b| b <= cur.remaining() as u64)
        .ok_or(FormatError::Truncated {
            what: "feature payload",
            offset: cur.offset(),
        })?;
    let (n, d) = (n as usize, d as usize);
    let payload = cur.take(count as usize, "feature payload")?;

    let mut data = vec![0.0f64; n * d];
    for (k, chunk) in payload.chunks_exact(4).enumerate() {
        let v = f32::from_le_bytes(chunk.try_into().expect("4-byte chunk"));
        if !v.is_finite() {
            return Err(FormatError::NonFinite { index: k }.into());
        }
        let (j, r) = (k / d, k % d);
        data[r * n + j] = v as f64;
    }

    let mut ids = Vec::with_capacity(n.min(cur.remaining() / 4));
    for i in 0..n {
        let len = cur.u32("id length")? as usize;
        let raw = cur.take(len, "id bytes")?;
        let id = std::str::from_utf8(raw).map_err(|_| FormatError::InvalidUtf8(i))?;
        ids.push(id.to_owned());
    }
    cur.finish()?;
    FeatureStore::new(ids, DenseMatrix::new(d, n, data)?)
}

pub fn write_feature_store(path: impl AsRef<Path>, store: &FeatureStore) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_feature_store(store)).map_err(|e| Error::io(path, e))
}

pub fn read_feature_store(path: impl AsRef<Path>) -> Result<FeatureStore> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_feature_store(&bytes)
}
