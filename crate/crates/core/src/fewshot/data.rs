use crate::embeddings::{ClipMeta, EmbeddingStore};
use crate::error::{Error, Result};

use super::linalg::{norm, Matrix};

/// Unit-normalized embeddings with multi-hot targets over a fixed class list.
#[derive(Debug, Clone)]
pub struct LabeledSet {
    pub classes: Vec<String>,
    pub ids: Vec<String>,
    pub x: Matrix,
    pub y: Vec<Vec<bool>>,
    pub meta: Vec<ClipMeta>,
}

impl LabeledSet {
    /// Labels outside `classes` are kept in `meta` but get no target column.
    pub fn from_store(store: &EmbeddingStore, classes: &[String]) -> Result<Self> {
        Self::from_store_centered(store, classes, None)
    }

    /// As [`from_store`](Self::from_store), subtracting `center` from every
    /// row before normalizing.
    pub fn from_store_centered(store: &EmbeddingStore, classes: &[String], center: Option<&[f64]>) -> Result<Self> {
        if let Some(c) = center {
            if c.len() != store.dim {
                return Err(Error::DimensionMismatch {
                    expected: store.dim,
                    got: c.len(),
                });
            }
        }
        let meta = store
            .meta
            .clone()
            .ok_or_else(|| Error::InvalidArgument("embedding store has no label metadata".into()))?;
        let mut x = Matrix::zeros(store.len(), store.dim);
        for i in 0..store.len() {
            let mut row = store.row_f64(i);
            if let Some(c) = center {
                row.iter_mut().zip(c).for_each(|(v, m)| *v -= m);
            }
            let n = norm(&row);
            if !(n > 0.0) || !n.is_finite() {
                return Err(Error::ZeroNorm(format!("embedding {}", store.ids[i])));
            }
            x.row_mut(i).iter_mut().zip(&row).for_each(|(o, v)| *o = v / n);
        }
        let y = meta
            .iter()
            .map(|m| classes.iter().map(|c| m.has_label(c)).collect())
            .collect();
        Ok(Self {
            classes: classes.to_vec(),
            ids: store.ids.clone(),
            x,
            y,
            meta,
        })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.x.cols
    }

    pub fn positives(&self, k: usize) -> usize {
        self.y.iter().filter(|r| r[k]).count()
    }

    pub fn class_index(&self, class: &str) -> Option<usize> {
        self.classes.iter().position(|c| c == class)
    }
}
