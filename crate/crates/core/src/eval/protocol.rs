use std::collections::BTreeSet;
use std::ops::Range;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::embeddings::{ClipMeta, EmbeddingStore};
use crate::error::{Error, Result};
use crate::fewshot::{
    lr_fit, predict_joint, prototype_weight, BaseClassifier, LabeledSet, LrConfig, Matrix, Method, NovelModel,
    WeightGenerator,
};
use crate::rng::{derive_rng, Rng};

use super::breakdown::{breakdown, Breakdown};
use super::criteria::SupportCriteria;
use super::metrics::{f_measure, Prf};
use super::report::{summarize, EvalReport};
use super::support::sample_support;

pub const LR_NEGATIVE_GRID: [usize; 5] = [100, 500, 1000, 2000, 5000];

/// Salt separating tuning iterations from test iterations.
const TUNE_SALT: u64 = 0x7475_6e65;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProtocolConfig {
    pub method: Method,
    pub criteria: SupportCriteria,
    pub iterations: usize,
    pub seed: u64,
    pub threshold: f64,
    pub lr: LrConfig,
    /// Fixed negative count; when absent it is tuned on novel-val.
    pub lr_negatives: Option<usize>,
    pub lr_grid: Vec<usize>,
    pub tune_iterations: usize,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        Self {
            method: Method::Proto,
            criteria: SupportCriteria::default(),
            iterations: 100,
            seed: 0,
            threshold: 0.5,
            lr: LrConfig::default(),
            lr_negatives: None,
            lr_grid: LR_NEGATIVE_GRID.to_vec(),
            tune_iterations: 10,
        }
    }
}

/// A joint test pool: base clips first, then novel clips that can also
/// supply supports.
#[derive(Debug, Clone)]
pub struct JointPool {
    pub set: LabeledSet,
    pub novel_rows: Range<usize>,
    pub n_base_classes: usize,
}

impl JointPool {
    fn new(
        base_classes: &[String],
        center: Option<&[f64]>,
        novel_classes: &[String],
        base: Option<&EmbeddingStore>,
        novel: &EmbeddingStore,
    ) -> Result<Self> {
        let mut classes = base_classes.to_vec();
        classes.extend(novel_classes.iter().cloned());
        let novel_set = LabeledSet::from_store_centered(novel, &classes, center)?;
        let set = match base {
            Some(b) => {
                let mut s = LabeledSet::from_store_centered(b, &classes, center)?;
                if s.dim() != novel_set.dim() {
                    return Err(Error::DimensionMismatch {
                        expected: s.dim(),
                        got: novel_set.dim(),
                    });
                }
                s.ids.extend(novel_set.ids);
                s.x.data.extend(novel_set.x.data);
                s.x.rows += novel_set.x.rows;
                s.y.extend(novel_set.y);
                s.meta.extend(novel_set.meta);
                s
            }
            None => novel_set,
        };
        let start = base.map_or(0, EmbeddingStore::len);
        Ok(Self {
            novel_rows: start..set.len(),
            set,
            n_base_classes: base_classes.len(),
        })
    }

    fn novel_classes(&self) -> &[String] {
        &self.set.classes[self.n_base_classes..]
    }
}

/// Everything the protocol reads besides the trained models.
#[derive(Debug, Clone)]
pub struct EvalData {
    pub test: JointPool,
    pub tuning: Option<JointPool>,
    /// Unit-norm base training embeddings, the LR negative pool.
    pub negatives: Matrix,
}

fn novel_class_list(store: &EmbeddingStore, base_classes: &[String]) -> Vec<String> {
    let base: BTreeSet<&String> = base_classes.iter().collect();
    store.classes().into_iter().filter(|c| !base.contains(c)).collect()
}

impl EvalData {
    /// Embeddings are prepared the way `base` expects them.
    pub fn new(
        base: &BaseClassifier,
        base_train: &EmbeddingStore,
        base_test: &EmbeddingStore,
        novel_test: &EmbeddingStore,
        novel_val: Option<&EmbeddingStore>,
        base_val: Option<&EmbeddingStore>,
    ) -> Result<Self> {
        let base_classes = &base.classes;
        let center = base.center.as_deref();
        let novel = novel_class_list(novel_test, base_classes);
        if novel.is_empty() {
            return Err(Error::InvalidArgument("novel-test store has no novel classes".into()));
        }
        let test = JointPool::new(base_classes, center, &novel, Some(base_test), novel_test)?;
        let tuning = novel_val
            .map(|nv| {
                let classes = novel_class_list(nv, base_classes);
                JointPool::new(base_classes, center, &classes, base_val, nv)
            })
            .transpose()?;
        let negatives = base.prepare(base_train)?.x;
        Ok(Self {
            test,
            tuning,
            negatives,
        })
    }

    pub fn novel_classes(&self) -> &[String] {
        self.test.novel_classes()
    }
}

/// Outcome of one sampling iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationResult {
    pub iteration: usize,
    /// Per-class F in joint-label order; absent when the class has no test positives.
    pub class_f: Vec<Option<f64>>,
    pub base_mean_f: Option<f64>,
    pub novel_mean_f: Option<f64>,
    pub breakdown: Breakdown,
    pub support_ids: Vec<Vec<String>>,
}

fn mean_present(v: &[Option<f64>]) -> Option<f64> {
    let p: Vec<f64> = v.iter().flatten().copied().collect();
    (!p.is_empty()).then(|| p.iter().sum::<f64>() / p.len() as f64)
}

struct Models<'a> {
    base: &'a BaseClassifier,
    generator: Option<&'a WeightGenerator>,
    base_w_hat: Matrix,
}

#[allow(clippy::too_many_arguments)]
fn run_iteration(
    models: &Models<'_>,
    pool: &JointPool,
    negatives: &Matrix,
    method: Method,
    criteria: &SupportCriteria,
    lr: &LrConfig,
    threshold: f64,
    iteration: usize,
    rng: &mut Rng,
) -> Result<IterationResult> {
    let set = &pool.set;
    let novel_meta = &set.meta[pool.novel_rows.clone()];
    let mut used = BTreeSet::new();
    let mut novel_models = Vec::new();
    let mut support_ids = Vec::new();
    for class in pool.novel_classes() {
        let idx: Vec<usize> = sample_support(novel_meta, class, criteria, rng)?
            .into_iter()
            .map(|i| i + pool.novel_rows.start)
            .collect();
        let supports: Vec<Vec<f64>> = idx.iter().map(|&i| set.x.row(i).to_vec()).collect();
        support_ids.push(idx.iter().map(|&i| set.ids[i].clone()).collect());
        used.extend(idx);
        novel_models.push(match method {
            Method::Proto => NovelModel::Weight(prototype_weight(&supports)?),
            Method::Dfsl => {
                let gen = models
                    .generator
                    .ok_or_else(|| Error::InvalidArgument("dfsl evaluation needs a generator".into()))?;
                NovelModel::Weight(gen.generate(&supports, &models.base_w_hat)?)
            }
            Method::Lr => NovelModel::Lr(lr_fit(&supports, negatives, lr, rng)?),
        });
    }
    let rows: Vec<usize> = (0..set.len()).filter(|i| !used.contains(i)).collect();
    let mut queries = Matrix::zeros(rows.len(), set.dim());
    for (r, &i) in rows.iter().enumerate() {
        queries.row_mut(r).copy_from_slice(set.x.row(i));
    }
    let scores = predict_joint(models.base, &novel_models, &queries)?;
    let scores: Vec<Vec<f64>> = scores.iter_rows().map(<[f64]>::to_vec).collect();
    let labels: Vec<Vec<bool>> = rows.iter().map(|&i| set.y[i].clone()).collect();
    let prf = f_measure(&scores, &labels, threshold);
    let class_f: Vec<Option<f64>> = prf.iter().map(|p: &Prf| (p.support() > 0).then_some(p.f)).collect();
    let nb = pool.n_base_classes;
    let meta: Vec<&ClipMeta> = rows.iter().map(|&i| &set.meta[i]).collect();
    let novel_cols: Vec<usize> = (nb..set.classes.len()).collect();
    Ok(IterationResult {
        iteration,
        base_mean_f: mean_present(&class_f[..nb]),
        novel_mean_f: mean_present(&class_f[nb..]),
        breakdown: breakdown(&scores, &labels, &meta, &novel_cols, pool.novel_classes(), threshold),
        class_f,
        support_ids,
    })
}

fn models<'a>(base: &'a BaseClassifier, generator: Option<&'a WeightGenerator>) -> Result<Models<'a>> {
    Ok(Models {
        base,
        generator,
        base_w_hat: base.normalized_weights()?,
    })
}

/// One protocol iteration on the test pool with an explicit RNG.
pub fn evaluate_iteration(
    base: &BaseClassifier,
    generator: Option<&WeightGenerator>,
    data: &EvalData,
    cfg: &ProtocolConfig,
    iteration: usize,
    rng: &mut Rng,
) -> Result<IterationResult> {
    let lr = LrConfig {
        n_negatives: cfg.lr_negatives.unwrap_or(cfg.lr.n_negatives),
        ..cfg.lr.clone()
    };
    run_iteration(
        &models(base, generator)?,
        &data.test,
        &data.negatives,
        cfg.method,
        &cfg.criteria,
        &lr,
        cfg.threshold,
        iteration,
        rng,
    )
}

/// Picks the negative count for LR by mean novel F on novel-val, drawing
/// supports with the test-time criteria. Ties go to the smaller count.
pub fn tune_lr_negatives(base: &BaseClassifier, data: &EvalData, cfg: &ProtocolConfig) -> Result<(usize, Vec<(usize, f64)>)> {
    let pool = data
        .tuning
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("LR tuning needs a novel-val store".into()))?;
    let m = models(base, None)?;
    let mut grid: Vec<usize> = cfg.lr_grid.iter().map(|&x| x.min(data.negatives.rows).max(1)).collect();
    grid.sort_unstable();
    grid.dedup();
    let mut table = Vec::new();
    for &x in &grid {
        let lr = LrConfig {
            n_negatives: x,
            ..cfg.lr.clone()
        };
        let fs = (0..cfg.tune_iterations)
            .into_par_iter()
            .map(|i| {
                let mut rng = derive_rng(cfg.seed ^ TUNE_SALT, i as u64);
                run_iteration(&m, pool, &data.negatives, Method::Lr, &cfg.criteria, &lr, cfg.threshold, i, &mut rng)
                    .map(|r| r.novel_mean_f.unwrap_or(0.0))
            })
            .collect::<Result<Vec<f64>>>()?;
        table.push((x, fs.iter().sum::<f64>() / fs.len().max(1) as f64));
    }
    let mut best = table[0];
    for &t in &table[1..] {
        if t.1 > best.1 {
            best = t;
        }
    }
    Ok((best.0, table))
}

/// Runs `cfg.iterations` independent sampling iterations and aggregates them.
pub fn run_protocol(
    base: &BaseClassifier,
    generator: Option<&WeightGenerator>,
    data: &EvalData,
    cfg: &ProtocolConfig,
) -> Result<EvalReport> {
    let mut cfg = cfg.clone();
    let mut tuning = None;
    if cfg.method == Method::Lr && cfg.lr_negatives.is_none() {
        if data.tuning.is_some() {
            let (x, table) = tune_lr_negatives(base, data, &cfg)?;
            log::info!("tuned LR negatives: x = {x}");
            cfg.lr_negatives = Some(x);
            tuning = Some(table);
        } else {
            log::warn!("no novel-val data; LR uses {} negatives untuned", cfg.lr.n_negatives);
            cfg.lr_negatives = Some(cfg.lr.n_negatives.min(data.negatives.rows));
        }
    }
    let results = (0..cfg.iterations)
        .into_par_iter()
        .map(|i| {
            let mut rng = derive_rng(cfg.seed, i as u64);
            evaluate_iteration(base, generator, data, &cfg, i, &mut rng)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(summarize(&cfg, data, results, tuning))
}
