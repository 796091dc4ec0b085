use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::embeddings::EmbeddingStore;
use crate::error::{Error, Result};
use crate::eval::f_measure;
use crate::rng::Rng;

use super::data::LabeledSet;
use super::linalg::{bce_with_logit, dot, norm, sigmoid, Adam, Matrix};

/// Cosine classifier: `score_k(z) = sigmoid(scale * cos(w_k, z))`.
#[derive(Debug, Clone, PartialEq)]
pub struct BaseClassifier {
    pub classes: Vec<String>,
    pub weights: Matrix,
    pub scale: f64,
    /// Mean embedding subtracted from every input before normalization.
    pub center: Option<Vec<f64>>,
}

impl BaseClassifier {
    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn dim(&self) -> usize {
        self.weights.cols
    }

    /// Embeddings as every model in this crate sees them: centered (when
    /// the classifier was trained with centering) and unit-norm.
    pub fn prepare(&self, store: &EmbeddingStore) -> Result<LabeledSet> {
        LabeledSet::from_store_centered(store, &self.classes, self.center.as_deref())
    }

    /// Weight rows scaled to unit length.
    pub fn normalized_weights(&self) -> Result<Matrix> {
        self.weights.normalized_rows()
    }

    /// Scores for unit-norm queries.
    pub fn scores(&self, queries: &Matrix) -> Result<Matrix> {
        if queries.cols != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: queries.cols,
            });
        }
        let w = self.normalized_weights()?;
        let mut out = Matrix::zeros(queries.rows, self.n_classes());
        for (q, z) in queries.iter_rows().enumerate() {
            for (k, wk) in w.iter_rows().enumerate() {
                out.row_mut(q)[k] = sigmoid(self.scale * dot(wk, z));
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BaseTrainConfig {
    pub lr: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    pub init_scale: f64,
    pub threshold: f64,
    /// Subtract the mean training embedding from all inputs. Helps when
    /// embeddings share a dominant common direction, at the cost of the
    /// implicit bias that direction gives a cosine head.
    pub center: bool,
    /// Restrict training to these classes; by default every label in the
    /// training store.
    pub classes: Option<Vec<String>>,
}

impl Default for BaseTrainConfig {
    fn default() -> Self {
        Self {
            lr: 0.001,
            batch_size: 64,
            max_epochs: 200,
            patience: 5,
            init_scale: 10.0,
            threshold: 0.5,
            center: false,
            classes: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_f: f64,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct TrainLog {
    pub epochs: Vec<EpochLog>,
    pub best_epoch: usize,
    pub best_val_f: f64,
    pub excluded_classes: Vec<String>,
}

fn init_weights(rows: usize, dim: usize, rng: &mut Rng) -> Matrix {
    let mut w = Matrix::zeros(rows, dim);
    for v in w.data.iter_mut() {
        let g: f64 = StandardNormal.sample(rng);
        *v = g / (dim as f64).sqrt();
    }
    w
}

fn mean_f(clf: &BaseClassifier, set: &LabeledSet, threshold: f64) -> Result<f64> {
    let scores = clf.scores(&set.x)?;
    let rows: Vec<Vec<f64>> = scores.iter_rows().map(<[f64]>::to_vec).collect();
    let prf = f_measure(&rows, &set.y, threshold);
    let with_pos: Vec<f64> = prf.iter().filter(|p| p.support() > 0).map(|p| p.f).collect();
    if with_pos.is_empty() {
        return Ok(0.0);
    }
    Ok(with_pos.iter().sum::<f64>() / with_pos.len() as f64)
}

/// Mean BCE over `batch x classes` and its gradient w.r.t. the raw weights
/// and the scale.
fn batch_grad(clf: &BaseClassifier, set: &LabeledSet, batch: &[usize]) -> (f64, Matrix, f64) {
    let k_n = clf.n_classes();
    let norms: Vec<f64> = clf.weights.iter_rows().map(norm).collect();
    let w_hat = clf.weights.normalized_rows().expect("weights are nonzero");
    let mut d_hat = Matrix::zeros(k_n, clf.dim());
    let mut d_scale = 0.0;
    let mut loss = 0.0;
    let denom = (batch.len() * k_n) as f64;
    for &i in batch {
        let z = set.x.row(i);
        for k in 0..k_n {
            let c = dot(w_hat.row(k), z);
            let logit = clf.scale * c;
            let y = set.y[i][k];
            loss += bce_with_logit(logit, y);
            let dl = (sigmoid(logit) - if y { 1.0 } else { 0.0 }) / denom;
            d_scale += dl * c;
            let g = dl * clf.scale;
            d_hat.row_mut(k).iter_mut().zip(z).for_each(|(o, v)| *o += g * v);
        }
    }
    let mut dw = Matrix::zeros(k_n, clf.dim());
    for k in 0..k_n {
        let wh = w_hat.row(k);
        let proj = dot(d_hat.row(k), wh);
        for (j, o) in dw.row_mut(k).iter_mut().enumerate() {
            *o = (d_hat.row(k)[j] - proj * wh[j]) / norms[k];
        }
    }
    (loss / denom, dw, d_scale)
}

/// Adam training of the cosine classifier with early stopping on validation
/// mean F-measure; returns the best validation snapshot.
pub fn train_base(
    train: &EmbeddingStore,
    val: &EmbeddingStore,
    cfg: &BaseTrainConfig,
    rng: &mut Rng,
) -> Result<(BaseClassifier, TrainLog)> {
    let present: BTreeSet<String> = train.classes().into_iter().collect();
    let mut excluded = Vec::new();
    let classes: Vec<String> = match &cfg.classes {
        Some(list) => list
            .iter()
            .filter(|c| {
                let keep = present.contains(*c);
                if !keep {
                    log::warn!("class {c:?} has no positive training examples; excluded");
                    excluded.push((*c).clone());
                }
                keep
            })
            .cloned()
            .collect(),
        None => present.into_iter().collect(),
    };
    if classes.len() < 2 {
        return Err(Error::InsufficientClasses {
            needed: 2,
            available: classes.len(),
        });
    }
    let center = if cfg.center && !train.is_empty() {
        let mut m = vec![0.0; train.dim];
        for i in 0..train.len() {
            m.iter_mut().zip(train.row(i)).for_each(|(o, &v)| *o += v as f64);
        }
        let n = train.len() as f64;
        m.iter_mut().for_each(|v| *v /= n);
        Some(m)
    } else {
        None
    };
    let train_set = LabeledSet::from_store_centered(train, &classes, center.as_deref())?;
    let val_set = LabeledSet::from_store_centered(val, &classes, center.as_deref())?;
    if val_set.is_empty() {
        return Err(Error::InvalidArgument("validation store is empty".into()));
    }
    let mut clf = BaseClassifier {
        weights: init_weights(train_set.classes.len(), train_set.dim(), rng),
        classes,
        scale: cfg.init_scale,
        center,
    };

    let mut log = TrainLog {
        best_val_f: mean_f(&clf, &val_set, cfg.threshold)?,
        excluded_classes: excluded,
        ..TrainLog::default()
    };
    let mut best = clf.clone();
    let n_params = clf.weights.data.len() + 1;
    let mut opt = Adam::new(n_params, cfg.lr);
    let mut params = vec![0.0; n_params];
    let mut grads = vec![0.0; n_params];
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut stale = 0;
    for epoch in 1..=cfg.max_epochs {
        order.shuffle(rng);
        let mut total = 0.0;
        for batch in order.chunks(cfg.batch_size.max(1)) {
            let (loss, dw, ds) = batch_grad(&clf, &train_set, batch);
            total += loss * batch.len() as f64;
            let m = clf.weights.data.len();
            params[..m].copy_from_slice(&clf.weights.data);
            params[m] = clf.scale;
            grads[..m].copy_from_slice(&dw.data);
            grads[m] = ds;
            opt.step(&mut params, &grads);
            clf.weights.data.copy_from_slice(&params[..m]);
            clf.scale = params[m].max(1e-3);
        }
        let val_f = mean_f(&clf, &val_set, cfg.threshold)?;
        log.epochs.push(EpochLog {
            epoch,
            train_loss: total / train_set.len().max(1) as f64,
            val_f,
        });
        if val_f > log.best_val_f {
            log.best_val_f = val_f;
            log.best_epoch = epoch;
            best = clf.clone();
            stale = 0;
        } else {
            stale += 1;
            if stale >= cfg.patience {
                break;
            }
        }
    }
    Ok((best, log))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embeddings::ClipMeta;
    use crate::rng::rng_from_seed;

    fn store(rows: &[(Vec<f32>, &str)]) -> EmbeddingStore {
        let dim = rows[0].0.len();
        EmbeddingStore::new(
            (0..rows.len()).map(|i| format!("c{i}")).collect(),
            dim,
            rows.iter().flat_map(|r| r.0.clone()).collect(),
            Some(
                rows.iter()
                    .map(|r| ClipMeta {
                        labels: vec![r.1.to_string()],
                        polyphony: 1,
                        event_snrs: Default::default(),
                    })
                    .collect(),
            ),
        )
        .unwrap()
    }

    fn toy() -> EmbeddingStore {
        let mut rows = Vec::new();
        for i in 0..20 {
            let e = 0.01 * i as f32;
            rows.push((vec![1.0, e], "a"));
            rows.push((vec![-1.0, -e], "b"));
        }
        store(&rows)
    }

    #[test]
    fn separable_toy_reaches_perfect_f() {
        let s = toy();
        let mut rng = rng_from_seed(1);
        let cfg = BaseTrainConfig {
            max_epochs: 5000,
            patience: 1000,
            ..Default::default()
        };
        let (clf, log) = train_base(&s, &s, &cfg, &mut rng).unwrap();
        let set = LabeledSet::from_store(&s, &clf.classes).unwrap();
        assert_eq!(mean_f(&clf, &set, 0.5).unwrap(), 1.0);
        assert_eq!(log.best_val_f, 1.0);
    }

    #[test]
    fn loss_trends_down() {
        let s = toy();
        let cfg = BaseTrainConfig {
            max_epochs: 5,
            patience: 100,
            ..Default::default()
        };
        let (_, log) = train_base(&s, &s, &cfg, &mut rng_from_seed(2)).unwrap();
        let l: Vec<f64> = log.epochs.iter().map(|e| e.train_loss).collect();
        assert_eq!(l.len(), 5);
        assert!(l[4] < l[0]);
    }

    #[test]
    fn zero_epochs_returns_init() {
        let s = toy();
        let cfg = BaseTrainConfig {
            max_epochs: 0,
            ..Default::default()
        };
        let (clf, log) = train_base(&s, &s, &cfg, &mut rng_from_seed(3)).unwrap();
        assert!(log.epochs.is_empty());
        assert_eq!(clf.scale, 10.0);
        let set = LabeledSet::from_store(&s, &clf.classes).unwrap();
        let sc = clf.scores(&set.x).unwrap();
        assert!(sc.data.iter().all(|&v| v > 0.0 && v < 1.0));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let s = toy();
        let classes = vec!["a".to_string(), "b".to_string()];
        let set = LabeledSet::from_store(&s, &classes).unwrap();
        let clf = BaseClassifier {
            classes,
            weights: Matrix::from_rows(&[vec![0.3, 0.9], vec![-0.2, 0.5]]).unwrap(),
            scale: 4.0,
            center: None,
        };
        let batch: Vec<usize> = (0..set.len()).collect();
        let (_, dw, ds) = batch_grad(&clf, &set, &batch);
        let loss = |c: &BaseClassifier| batch_grad(c, &set, &batch).0;
        let h = 1e-6;
        for i in 0..4 {
            let (mut p, mut m) = (clf.clone(), clf.clone());
            p.weights.data[i] += h;
            m.weights.data[i] -= h;
            let fd = (loss(&p) - loss(&m)) / (2.0 * h);
            assert!((fd - dw.data[i]).abs() < 1e-7, "{fd} vs {}", dw.data[i]);
        }
        let (mut p, mut m) = (clf.clone(), clf.clone());
        p.scale += h;
        m.scale -= h;
        assert!(((loss(&p) - loss(&m)) / (2.0 * h) - ds).abs() < 1e-7);
    }

    #[test]
    fn excludes_classes_without_positives() {
        let s = toy();
        let cfg = BaseTrainConfig {
            max_epochs: 1,
            classes: Some(vec!["a".into(), "b".into(), "ghost".into()]),
            ..Default::default()
        };
        let (clf, log) = train_base(&s, &s, &cfg, &mut rng_from_seed(4)).unwrap();
        assert_eq!(clf.classes, vec!["a", "b"]);
        assert_eq!(log.excluded_classes, vec!["ghost"]);
    }
}
