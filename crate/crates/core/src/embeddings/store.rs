//! Binary store: one JSON header line, then `n * dim` little-endian f32
//! values in row-major order. Model checkpoints reuse the layout with a
//! `kind` tag and free-form `attrs`.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Label metadata carried by clip embeddings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClipMeta {
    pub labels: Vec<String>,
    pub polyphony: usize,
    pub event_snrs: BTreeMap<String, f64>,
}

impl ClipMeta {
    pub fn has_label(&self, class: &str) -> bool {
        self.labels.iter().any(|l| l == class)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Header {
    n: usize,
    dim: usize,
    dtype: String,
    ids: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    kind: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    meta: Option<Vec<ClipMeta>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    attrs: Option<serde_json::Value>,
}

const DTYPE: &str = "f32le";

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingStore {
    pub ids: Vec<String>,
    pub dim: usize,
    /// Row-major `ids.len() x dim`.
    pub data: Vec<f32>,
    pub meta: Option<Vec<ClipMeta>>,
    pub kind: Option<String>,
    pub attrs: Option<serde_json::Value>,
}

impl EmbeddingStore {
    pub fn new(ids: Vec<String>, dim: usize, data: Vec<f32>, meta: Option<Vec<ClipMeta>>) -> Result<Self> {
        let s = Self {
            ids,
            dim,
            data,
            meta,
            kind: None,
            attrs: None,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn empty(dim: usize) -> Self {
        Self {
            ids: vec![],
            dim,
            data: vec![],
            meta: Some(vec![]),
            kind: None,
            attrs: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.data.len() != self.ids.len() * self.dim {
            return Err(Error::CorruptStore(format!(
                "payload holds {} values, header implies {} x {}",
                self.data.len(),
                self.ids.len(),
                self.dim
            )));
        }
        if let Some(meta) = &self.meta {
            if meta.len() != self.ids.len() {
                return Err(Error::CorruptStore(format!("{} metadata rows for {} ids", meta.len(), self.ids.len())));
            }
        }
        let mut seen = HashSet::with_capacity(self.ids.len());
        if let Some(dup) = self.ids.iter().find(|id| !seen.insert(id.as_str())) {
            return Err(Error::CorruptStore(format!("duplicate id {dup:?}")));
        }
        if self.data.iter().any(|v| !v.is_finite()) {
            return Err(Error::CorruptStore("non-finite value".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn row_f64(&self, i: usize) -> Vec<f64> {
        self.row(i).iter().map(|&v| v as f64).collect()
    }

    pub fn meta(&self, i: usize) -> Option<&ClipMeta> {
        self.meta.as_ref().map(|m| &m[i])
    }

    /// Sorted set of every label in the metadata.
    pub fn classes(&self) -> Vec<String> {
        let mut out: Vec<String> = self
            .meta
            .iter()
            .flatten()
            .flat_map(|m| m.labels.iter().cloned())
            .collect();
        out.sort();
        out.dedup();
        out
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        self.validate()?;
        let header = Header {
            n: self.ids.len(),
            dim: self.dim,
            dtype: DTYPE.into(),
            ids: self.ids.clone(),
            kind: self.kind.clone(),
            meta: self.meta.clone(),
            attrs: self.attrs.clone(),
        };
        serde_json::to_writer(&mut w, &header)?;
        w.write_all(b"\n")?;
        let mut bytes = Vec::with_capacity(self.data.len() * 4);
        for v in &self.data {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&bytes)?;
        Ok(())
    }

    pub fn read_from<R: BufRead>(mut r: R) -> Result<Self> {
        let mut line = String::new();
        r.read_line(&mut line)?;
        let header: Header = serde_json::from_str(line.trim_end())
            .map_err(|e| Error::CorruptStore(format!("bad header: {e}")))?;
        if header.dtype != DTYPE {
            return Err(Error::CorruptStore(format!("unsupported dtype {:?}", header.dtype)));
        }
        if header.ids.len() != header.n {
            return Err(Error::CorruptStore(format!("header n = {} but {} ids", header.n, header.ids.len())));
        }
        let expected = header.n * header.dim * 4;
        let mut payload = Vec::with_capacity(expected);
        r.read_to_end(&mut payload)?;
        if payload.len() != expected {
            return Err(Error::CorruptStore(format!(
                "payload is {} bytes, expected {expected}",
                payload.len()
            )));
        }
        let data = payload
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
            .collect();
        let s = Self {
            ids: header.ids,
            dim: header.dim,
            data,
            meta: header.meta,
            kind: header.kind,
            attrs: header.attrs,
        };
        s.validate()?;
        Ok(s)
    }
}

pub fn save_store(path: &Path, store: &EmbeddingStore) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    store.write_to(&mut w)?;
    w.flush()?;
    Ok(())
}

pub fn load_store(path: &Path) -> Result<EmbeddingStore> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    EmbeddingStore::read_from(BufReader::new(fs::File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample(n: usize, dim: usize) -> EmbeddingStore {
        let meta = (0..n)
            .map(|i| ClipMeta {
                labels: vec![format!("c{}", i % 3)],
                polyphony: 1,
                event_snrs: [(format!("c{}", i % 3), -5.0)].into_iter().collect(),
            })
            .collect();
        EmbeddingStore::new(
            (0..n).map(|i| format!("id{i}")).collect(),
            dim,
            (0..n * dim).map(|v| v as f32 * 0.25 - 3.0).collect(),
            Some(meta),
        )
        .unwrap()
    }

    #[test]
    fn file_round_trip_and_empty_store() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.bin");
        let s = sample(5, 3);
        save_store(&p, &s).unwrap();
        assert_eq!(load_store(&p).unwrap(), s);

        let empty = EmbeddingStore::empty(512);
        save_store(&p, &empty).unwrap();
        assert_eq!(load_store(&p).unwrap(), empty);
    }

    #[test]
    fn truncated_payload_is_rejected() {
        let mut bytes = Vec::new();
        sample(4, 8).write_to(&mut bytes).unwrap();
        bytes.truncate(bytes.len() - 3);
        assert!(matches!(EmbeddingStore::read_from(&bytes[..]), Err(Error::CorruptStore(_))));
    }

    #[test]
    fn header_mismatches_are_rejected() {
        let bad = b"{\"n\":2,\"dim\":1,\"dtype\":\"f32le\",\"ids\":[\"a\"]}\n\0\0\0\0";
        assert!(EmbeddingStore::read_from(&bad[..]).is_err());
        let bad = b"{\"n\":1,\"dim\":1,\"dtype\":\"f64le\",\"ids\":[\"a\"]}\n\0\0\0\0";
        assert!(EmbeddingStore::read_from(&bad[..]).is_err());
        assert!(EmbeddingStore::new(vec!["a".into(), "a".into()], 1, vec![0.0, 1.0], None).is_err());
    }

    proptest! {
        #[test]
        fn round_trip_is_bit_exact(bits in prop::collection::vec(any::<u32>(), 0..64), dim in 1usize..5) {
            let data: Vec<f32> = bits.iter().map(|&b| {
                let v = f32::from_bits(b);
                if v.is_finite() { v } else { 0.0 }
            }).collect();
            let n = data.len() / dim;
            let data = data[..n * dim].to_vec();
            let s = EmbeddingStore::new((0..n).map(|i| i.to_string()).collect(), dim, data, None).unwrap();
            let mut bytes = Vec::new();
            s.write_to(&mut bytes).unwrap();
            let back = EmbeddingStore::read_from(&bytes[..]).unwrap();
            prop_assert_eq!(back.data.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
                            s.data.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
            prop_assert_eq!(back, s);
        }
    }
}
