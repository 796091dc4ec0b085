use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{conforming_clips, SupportCriteria};
use crate::rng::Rng;

use super::base::BaseClassifier;
use super::data::LabeledSet;
use super::linalg::{bce_with_logit, dot, norm, normalized, sigmoid, softmax, Adam, Matrix};
use super::prototype::prototype_weight;

/// What the attention over base weights is computed from.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttentionMode {
    /// One attention distribution per support example, averaged.
    #[default]
    Example,
    /// A single distribution from the averaged support embedding.
    Mean,
}

impl fmt::Display for AttentionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AttentionMode::Example => "example",
            AttentionMode::Mean => "mean",
        })
    }
}

impl FromStr for AttentionMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "example" => Ok(Self::Example),
            "mean" => Ok(Self::Mean),
            _ => Err(Error::InvalidArgument(format!("unknown attention mode {s:?}"))),
        }
    }
}

/// `w = phi_avg * z_avg + phi_att * w_att`, where `w_att` is an attention
/// blend of the normalized base weights keyed by `keys`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightGenerator {
    pub phi_avg: Vec<f64>,
    pub phi_att: Vec<f64>,
    pub keys: Matrix,
    pub att_scale: f64,
    pub mode: AttentionMode,
}

struct Forward {
    z_avg: Vec<f64>,
    att_queries: Vec<Vec<f64>>,
    att: Vec<Vec<f64>>,
    w_prime: Vec<f64>,
    w: Vec<f64>,
}

impl WeightGenerator {
    /// Starts out equal to the prototype method.
    pub fn init(base: &BaseClassifier, mode: AttentionMode) -> Result<Self> {
        let d = base.dim();
        Ok(Self {
            phi_avg: vec![1.0; d],
            phi_att: vec![0.0; d],
            keys: base.normalized_weights()?,
            att_scale: 10.0,
            mode,
        })
    }

    pub fn dim(&self) -> usize {
        self.phi_avg.len()
    }

    pub fn n_params(&self) -> usize {
        2 * self.dim() + self.keys.data.len() + 1
    }

    /// Parameters laid out as `[phi_avg, phi_att, keys, att_scale]`.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.n_params());
        p.extend_from_slice(&self.phi_avg);
        p.extend_from_slice(&self.phi_att);
        p.extend_from_slice(&self.keys.data);
        p.push(self.att_scale);
        p
    }

    pub fn set_flat(&mut self, p: &[f64]) {
        let d = self.dim();
        let nk = self.keys.data.len();
        self.phi_avg.copy_from_slice(&p[..d]);
        self.phi_att.copy_from_slice(&p[d..2 * d]);
        self.keys.data.copy_from_slice(&p[2 * d..2 * d + nk]);
        self.att_scale = p[2 * d + nk];
    }

    fn unit_keys(&self, memory: &[usize]) -> Result<Vec<Vec<f64>>> {
        memory
            .iter()
            .map(|&b| normalized(self.keys.row(b)).map_err(|_| Error::ZeroNorm(format!("key {b}"))))
            .collect()
    }

    /// Attention of a unit query over the base classes in `memory`.
    pub fn attention(&self, q_hat: &[f64], memory: &[usize]) -> Result<Vec<f64>> {
        let keys = self.unit_keys(memory)?;
        Ok(attend(self.att_scale, q_hat, &keys))
    }

    fn forward(&self, supports: &[Vec<f64>], w_hat: &Matrix, memory: &[usize]) -> Result<Forward> {
        let d = self.dim();
        if w_hat.cols != d || self.keys.rows != w_hat.rows {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: w_hat.cols,
            });
        }
        if memory.is_empty() {
            return Err(Error::InvalidArgument("attention memory is empty".into()));
        }
        if let Some(z) = supports.iter().find(|z| z.len() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: z.len(),
            });
        }
        let z_avg = prototype_weight(supports)?;
        let att_queries = match self.mode {
            AttentionMode::Example => supports.iter().map(|z| normalized(z)).collect::<Result<_>>()?,
            AttentionMode::Mean => vec![normalized(&z_avg)?],
        };
        let keys = self.unit_keys(memory)?;
        let att: Vec<Vec<f64>> = att_queries
            .iter()
            .map(|q| attend(self.att_scale, q, &keys))
            .collect();
        let mut w_prime = vec![0.0; d];
        let inv = 1.0 / att.len() as f64;
        for a in &att {
            for (ab, &b) in a.iter().zip(memory) {
                let c = ab * inv;
                w_prime.iter_mut().zip(w_hat.row(b)).for_each(|(o, v)| *o += c * v);
            }
        }
        let w = (0..d)
            .map(|j| self.phi_avg[j] * z_avg[j] + self.phi_att[j] * w_prime[j])
            .collect();
        Ok(Forward {
            z_avg,
            att_queries,
            att,
            w_prime,
            w,
        })
    }

    /// Novel weight with every base class available to the attention.
    pub fn generate(&self, supports: &[Vec<f64>], w_hat: &Matrix) -> Result<Vec<f64>> {
        let memory: Vec<usize> = (0..w_hat.rows).collect();
        Ok(self.forward(supports, w_hat, &memory)?.w)
    }
}

fn attend(scale: f64, q_hat: &[f64], keys: &[Vec<f64>]) -> Vec<f64> {
    let u: Vec<f64> = keys.iter().map(|k| scale * dot(q_hat, k)).collect();
    softmax(&u)
}

/// Generates a novel-class weight row from its support embeddings.
pub fn dfsl_generate(gen: &WeightGenerator, supports: &[Vec<f64>], base_w_hat: &Matrix) -> Result<Vec<f64>> {
    gen.generate(supports, base_w_hat)
}

/// A simulated few-shot episode drawn from base-class data.
#[derive(Debug, Clone)]
pub struct Episode {
    /// Base classes standing in as novel.
    pub pseudo: Vec<usize>,
    pub supports: Vec<Vec<Vec<f64>>>,
    /// Unit-norm query embeddings.
    pub queries: Matrix,
    /// Multi-hot targets over all base classes.
    pub targets: Vec<Vec<bool>>,
}

fn episode_eval(
    gen: &WeightGenerator,
    w_hat: &Matrix,
    scale: f64,
    ep: &Episode,
    want_grad: bool,
) -> Result<(f64, Vec<f64>)> {
    let n_base = w_hat.rows;
    let d = gen.dim();
    let excluded: BTreeSet<usize> = ep.pseudo.iter().copied().collect();
    let memory: Vec<usize> = (0..n_base).filter(|b| !excluded.contains(b)).collect();
    let fwd: Vec<Forward> = ep
        .supports
        .iter()
        .map(|s| gen.forward(s, w_hat, &memory))
        .collect::<Result<_>>()?;
    let mut rows = w_hat.clone();
    let mut gen_norms = vec![0.0; ep.pseudo.len()];
    for (j, (&k, f)) in ep.pseudo.iter().zip(&fwd).enumerate() {
        let n = norm(&f.w);
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::ZeroNorm(format!("generated weight for class {k}")));
        }
        gen_norms[j] = n;
        rows.row_mut(k).iter_mut().zip(&f.w).for_each(|(o, v)| *o = v / n);
    }

    let denom = (ep.queries.rows * n_base) as f64;
    let mut loss = 0.0;
    let mut g_rows = vec![vec![0.0; d]; ep.pseudo.len()];
    for (q, z) in ep.queries.iter_rows().enumerate() {
        for k in 0..n_base {
            let c = dot(rows.row(k), z);
            let y = ep.targets[q][k];
            loss += bce_with_logit(scale * c, y);
            if !want_grad {
                continue;
            }
            if let Some(j) = ep.pseudo.iter().position(|&p| p == k) {
                let dl = (sigmoid(scale * c) - if y { 1.0 } else { 0.0 }) / denom;
                let f = dl * scale / gen_norms[j];
                let wh = rows.row(k);
                for t in 0..d {
                    g_rows[j][t] += f * (z[t] - c * wh[t]);
                }
            }
        }
    }
    loss /= denom;
    if !want_grad {
        return Ok((loss, Vec::new()));
    }

    let nk = gen.keys.data.len();
    let mut grad = vec![0.0; gen.n_params()];
    let (g_avg, rest) = grad.split_at_mut(d);
    let (g_att, rest) = rest.split_at_mut(d);
    let (g_keys, g_scale) = rest.split_at_mut(nk);
    let mut d_khat = Matrix::zeros(n_base, d);
    for (f, g) in fwd.iter().zip(&g_rows) {
        let mut dw_prime = vec![0.0; d];
        for t in 0..d {
            g_avg[t] += g[t] * f.z_avg[t];
            g_att[t] += g[t] * f.w_prime[t];
            dw_prime[t] = g[t] * gen.phi_att[t];
        }
        let inv = 1.0 / f.att.len() as f64;
        let da_common: Vec<f64> = memory.iter().map(|&b| inv * dot(&dw_prime, w_hat.row(b))).collect();
        let keys = gen.unit_keys(&memory)?;
        for (a, q) in f.att.iter().zip(&f.att_queries) {
            let mean: f64 = a.iter().zip(&da_common).map(|(x, y)| x * y).sum();
            for (m, &b) in memory.iter().enumerate() {
                let du = a[m] * (da_common[m] - mean);
                g_scale[0] += du * dot(q, &keys[m]);
                let c = du * gen.att_scale;
                d_khat.row_mut(b).iter_mut().zip(q).for_each(|(o, v)| *o += c * v);
            }
        }
    }
    for &b in &memory {
        let k = gen.keys.row(b);
        let kn = norm(k);
        let proj: f64 = d_khat.row(b).iter().zip(k).map(|(x, y)| x * y / kn).sum();
        for t in 0..d {
            g_keys[b * d + t] = (d_khat.row(b)[t] - proj * k[t] / kn) / kn;
        }
    }
    Ok((loss, grad))
}

/// Mean BCE over queries and base classes with the pseudo-novel rows
/// replaced by generated weights.
pub fn episode_loss(gen: &WeightGenerator, base_w_hat: &Matrix, scale: f64, ep: &Episode) -> Result<f64> {
    Ok(episode_eval(gen, base_w_hat, scale, ep, false)?.0)
}

/// Loss and its gradient w.r.t. the flat generator parameters.
pub fn episode_loss_grad(
    gen: &WeightGenerator,
    base_w_hat: &Matrix,
    scale: f64,
    ep: &Episode,
) -> Result<(f64, Vec<f64>)> {
    episode_eval(gen, base_w_hat, scale, ep, true)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpisodicConfig {
    pub iters: usize,
    pub lr: f64,
    pub n_pseudo: usize,
    pub queries_per_class: usize,
    pub base_queries: usize,
    pub criteria: SupportCriteria,
}

impl Default for EpisodicConfig {
    fn default() -> Self {
        Self {
            iters: 1000,
            lr: 0.001,
            n_pseudo: 5,
            queries_per_class: 10,
            base_queries: 50,
            criteria: SupportCriteria::default(),
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct EpisodicLog {
    pub losses: Vec<f64>,
    /// Classes never drawn as pseudo-novel for lack of conforming examples.
    pub skipped_classes: Vec<String>,
}

fn eligible_classes(train: &LabeledSet, cfg: &EpisodicConfig) -> (Vec<usize>, Vec<Vec<usize>>, Vec<String>) {
    let mut eligible = Vec::new();
    let mut pools = Vec::new();
    let mut skipped = Vec::new();
    for (k, class) in train.classes.iter().enumerate() {
        let pool = conforming_clips(&train.meta, class, &cfg.criteria);
        if pool.len() >= cfg.criteria.n {
            eligible.push(k);
        } else {
            log::warn!(
                "class {class:?} has {} clips matching {}; never used as pseudo-novel",
                pool.len(),
                cfg.criteria
            );
            skipped.push(class.clone());
        }
        pools.push(pool);
    }
    (eligible, pools, skipped)
}

fn draw_episode(
    train: &LabeledSet,
    eligible: &[usize],
    pools: &[Vec<usize>],
    cfg: &EpisodicConfig,
    rng: &mut Rng,
) -> Result<Episode> {
    if eligible.len() < cfg.n_pseudo {
        return Err(Error::InsufficientClasses {
            needed: cfg.n_pseudo,
            available: eligible.len(),
        });
    }
    let pseudo: Vec<usize> = sample(rng, eligible.len(), cfg.n_pseudo)
        .into_iter()
        .map(|i| eligible[i])
        .collect();
    let mut used = BTreeSet::new();
    let mut supports = Vec::new();
    for &k in &pseudo {
        let pool = &pools[k];
        let idx: Vec<usize> = sample(rng, pool.len(), cfg.criteria.n)
            .into_iter()
            .map(|i| pool[i])
            .collect();
        used.extend(idx.iter().copied());
        supports.push(idx.iter().map(|&i| train.x.row(i).to_vec()).collect());
    }
    let mut query_idx = BTreeSet::new();
    for &k in &pseudo {
        let pos: Vec<usize> = (0..train.len())
            .filter(|&i| train.y[i][k] && !used.contains(&i))
            .collect();
        let take = cfg.queries_per_class.min(pos.len());
        query_idx.extend(sample(rng, pos.len(), take).into_iter().map(|i| pos[i]));
    }
    let rest: Vec<usize> = (0..train.len()).filter(|i| !used.contains(i)).collect();
    let take = cfg.base_queries.min(rest.len());
    query_idx.extend(sample(rng, rest.len(), take).into_iter().map(|i| rest[i]));
    let query_idx: Vec<usize> = query_idx.into_iter().collect();
    let mut queries = Matrix::zeros(query_idx.len(), train.dim());
    for (r, &i) in query_idx.iter().enumerate() {
        queries.row_mut(r).copy_from_slice(train.x.row(i));
    }
    Ok(Episode {
        pseudo,
        supports,
        queries,
        targets: query_idx.iter().map(|&i| train.y[i].clone()).collect(),
    })
}

/// Draws one episode from base-class training data.
pub fn sample_episode(train: &LabeledSet, cfg: &EpisodicConfig, rng: &mut Rng) -> Result<Episode> {
    let (eligible, pools, _) = eligible_classes(train, cfg);
    draw_episode(train, &eligible, &pools, cfg, rng)
}

/// Trains only the generator; the base classifier is read-only.
pub fn dfsl_train_episodic(
    init: &WeightGenerator,
    base: &BaseClassifier,
    train: &LabeledSet,
    cfg: &EpisodicConfig,
    rng: &mut Rng,
) -> Result<(WeightGenerator, EpisodicLog)> {
    if train.classes != base.classes {
        return Err(Error::InvalidArgument(
            "episodic training set must use the base class list".into(),
        ));
    }
    if base.n_classes() < cfg.n_pseudo + 1 {
        return Err(Error::InsufficientClasses {
            needed: cfg.n_pseudo + 1,
            available: base.n_classes(),
        });
    }
    let w_hat = base.normalized_weights()?;
    let (eligible, pools, skipped) = eligible_classes(train, cfg);
    let mut gen = init.clone();
    let mut params = gen.to_flat();
    let mut opt = Adam::new(params.len(), cfg.lr);
    let mut log = EpisodicLog {
        skipped_classes: skipped,
        ..Default::default()
    };
    for _ in 0..cfg.iters {
        let ep = draw_episode(train, &eligible, &pools, cfg, rng)?;
        let (loss, grad) = episode_loss_grad(&gen, &w_hat, base.scale, &ep)?;
        opt.step(&mut params, &grad);
        gen.set_flat(&params);
        log.losses.push(loss);
    }
    Ok((gen, log))
}
