//! Model checkpoints in the embedding-store layout, tagged by `kind`.

use std::path::Path;

use serde_json::json;

use crate::embeddings::{load_store, save_store, EmbeddingStore};
use crate::error::{Error, Result};

use super::base::BaseClassifier;
use super::dfsl::{AttentionMode, WeightGenerator};
use super::linalg::Matrix;
use super::lr::LrModel;

fn to_f32(v: &[f64]) -> Vec<f32> {
    v.iter().map(|&x| x as f32).collect()
}

fn expect_kind(store: &EmbeddingStore, kind: &str) -> Result<()> {
    match store.kind.as_deref() {
        Some(k) if k == kind => Ok(()),
        other => Err(Error::InvalidArgument(format!(
            "expected a {kind:?} checkpoint, found {:?}",
            other.unwrap_or("embeddings")
        ))),
    }
}

fn attr_f64(store: &EmbeddingStore, key: &str) -> Result<f64> {
    store
        .attrs
        .as_ref()
        .and_then(|a| a.get(key))
        .and_then(|v| v.as_f64())
        .ok_or_else(|| Error::CorruptStore(format!("checkpoint lacks attribute {key:?}")))
}

fn rows_of(store: &EmbeddingStore) -> Matrix {
    Matrix {
        rows: store.len(),
        cols: store.dim,
        data: store.data.iter().map(|&v| v as f64).collect(),
    }
}

pub fn save_base(path: &Path, clf: &BaseClassifier, extra: serde_json::Value) -> Result<()> {
    let mut store = EmbeddingStore::new(clf.classes.clone(), clf.dim(), to_f32(&clf.weights.data), None)?;
    store.kind = Some("base".into());
    store.attrs = Some(json!({ "scale": clf.scale, "center": clf.center, "info": extra }));
    save_store(path, &store)
}

pub fn load_base(path: &Path) -> Result<BaseClassifier> {
    let store = load_store(path)?;
    expect_kind(&store, "base")?;
    Ok(BaseClassifier {
        classes: store.ids.clone(),
        weights: rows_of(&store),
        scale: attr_f64(&store, "scale")?,
        center: match store.attrs.as_ref().and_then(|a| a.get("center")) {
            None | Some(serde_json::Value::Null) => None,
            Some(v) => Some(
                serde_json::from_value::<Vec<f64>>(v.clone())
                    .map_err(|e| Error::CorruptStore(format!("bad center: {e}")))?,
            ),
        },
    })
}

/// Rows are `phi_avg`, `phi_att`, then one key per base class.
pub fn save_generator(path: &Path, gen: &WeightGenerator, base_classes: &[String], extra: serde_json::Value) -> Result<()> {
    let mut ids = vec!["phi_avg".to_string(), "phi_att".to_string()];
    ids.extend(base_classes.iter().map(|c| format!("key:{c}")));
    let mut data = to_f32(&gen.phi_avg);
    data.extend(to_f32(&gen.phi_att));
    data.extend(to_f32(&gen.keys.data));
    let mut store = EmbeddingStore::new(ids, gen.dim(), data, None)?;
    store.kind = Some("dfsl".into());
    store.attrs = Some(json!({
        "att_scale": gen.att_scale,
        "att_on": gen.mode,
        "info": extra,
    }));
    save_store(path, &store)
}

pub fn load_generator(path: &Path) -> Result<WeightGenerator> {
    let store = load_store(path)?;
    expect_kind(&store, "dfsl")?;
    if store.len() < 3 || store.ids[0] != "phi_avg" || store.ids[1] != "phi_att" {
        return Err(Error::CorruptStore("generator rows out of order".into()));
    }
    let mode: AttentionMode = store
        .attrs
        .as_ref()
        .and_then(|a| a.get("att_on"))
        .map(|v| serde_json::from_value(v.clone()))
        .transpose()?
        .unwrap_or_default();
    let m = rows_of(&store);
    let d = store.dim;
    Ok(WeightGenerator {
        phi_avg: m.row(0).to_vec(),
        phi_att: m.row(1).to_vec(),
        keys: Matrix {
            rows: m.rows - 2,
            cols: d,
            data: m.data[2 * d..].to_vec(),
        },
        att_scale: attr_f64(&store, "att_scale")?,
        mode,
    })
}

/// One row per class: weights then intercept. Prior scorers are stored in
/// `attrs.priors`.
pub fn save_lr_models(path: &Path, classes: &[String], models: &[LrModel], dim: usize, extra: serde_json::Value) -> Result<()> {
    let mut data = Vec::with_capacity(models.len() * (dim + 1));
    let mut priors = serde_json::Map::new();
    for (c, m) in classes.iter().zip(models) {
        match m {
            LrModel::Linear { w, b } => {
                data.extend(to_f32(w));
                data.push(*b as f32);
            }
            LrModel::Prior { p } => {
                data.extend(std::iter::repeat_n(0.0, dim + 1));
                priors.insert(c.clone(), json!(p));
            }
        }
    }
    let mut store = EmbeddingStore::new(classes.to_vec(), dim + 1, data, None)?;
    store.kind = Some("lr".into());
    store.attrs = Some(json!({ "priors": priors, "info": extra }));
    save_store(path, &store)
}

pub fn load_lr_models(path: &Path) -> Result<(Vec<String>, Vec<LrModel>)> {
    let store = load_store(path)?;
    expect_kind(&store, "lr")?;
    let priors = store.attrs.as_ref().and_then(|a| a.get("priors")).cloned();
    let m = rows_of(&store);
    let d = store.dim.saturating_sub(1);
    let models = store
        .ids
        .iter()
        .enumerate()
        .map(|(i, c)| match priors.as_ref().and_then(|p| p.get(c)).and_then(|v| v.as_f64()) {
            Some(p) => LrModel::Prior { p },
            None => LrModel::Linear {
                w: m.row(i)[..d].to_vec(),
                b: m.row(i)[d],
            },
        })
        .collect();
    Ok((store.ids.clone(), models))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let clf = BaseClassifier {
            classes: vec!["a".into(), "b".into()],
            weights: Matrix::from_rows(&[vec![0.5, -0.25], vec![1.0, 2.0]]).unwrap(),
            scale: 9.5,
            center: Some(vec![0.25, -1.5]),
        };
        let p = dir.path().join("base.bin");
        save_base(&p, &clf, json!({})).unwrap();
        assert_eq!(load_base(&p).unwrap(), clf);

        let gen = WeightGenerator::init(&clf, AttentionMode::Mean).unwrap();
        let g = dir.path().join("gen.bin");
        save_generator(&g, &gen, &clf.classes, json!({})).unwrap();
        let back = load_generator(&g).unwrap();
        assert_eq!(back.mode, AttentionMode::Mean);
        assert_eq!(back.keys.rows, 2);
        assert!(load_base(&g).is_err());

        let models = vec![
            LrModel::Linear { w: vec![0.5, 1.0], b: -0.25 },
            LrModel::Prior { p: 0.125 },
        ];
        let l = dir.path().join("lr.bin");
        save_lr_models(&l, &clf.classes, &models, 2, json!({})).unwrap();
        assert_eq!(load_lr_models(&l).unwrap().1, models);
    }
}
