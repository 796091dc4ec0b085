//! Synthetic embedding world: class prototypes grouped into families, clips
//! built as SNR-weighted sums of the active classes' prototypes over a
//! shared background, then L2-normalized. Lets the learning half run at
//! scale without audio.

use std::collections::BTreeMap;

use rand::seq::index::sample;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::embeddings::{ClipMeta, EmbeddingStore};
use crate::error::{Error, Result};
use crate::fewshot::linalg::{dot, norm};
use crate::rng::{derive_rng, Rng};
use crate::scene::{sample_class_count, DataSplit, SNR_LEVELS_DB};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WorldConfig {
    pub dim: usize,
    pub n_base: usize,
    pub n_novel_val: usize,
    pub n_novel_test: usize,
    pub n_families: usize,
    /// Weight of the class-specific direction relative to the family center.
    pub class_spread: f64,
    /// Per-clip deviation of an event from its class prototype.
    pub within_class: f64,
    /// Magnitude of the background component shared by all clips.
    pub background: f64,
    /// Per-clip background noise magnitude.
    pub background_noise: f64,
    /// Event amplitude at 0 dB.
    pub amplitude: f64,
    /// Chance that each extra class of a scene overlaps the clip.
    pub overlap_prob: f64,
    /// Gram-Schmidt the prototypes (used for the noiseless limit).
    pub orthogonal: bool,
    pub clips: BTreeMap<DataSplit, usize>,
}

impl Default for WorldConfig {
    fn default() -> Self {
        Self {
            dim: 64,
            n_base: 20,
            n_novel_val: 5,
            n_novel_test: 5,
            n_families: 5,
            class_spread: 1.0,
            within_class: 0.5,
            background: 1.0,
            background_noise: 0.5,
            amplitude: 0.5,
            overlap_prob: 0.5,
            orthogonal: false,
            clips: BTreeMap::from([
                (DataSplit::BaseTrain, 1500),
                (DataSplit::BaseVal, 300),
                (DataSplit::BaseTest, 600),
                (DataSplit::NovelVal, 1000),
                (DataSplit::NovelTest, 1500),
            ]),
        }
    }
}

impl WorldConfig {
    /// Clips are exactly their prototype: no background, no variation, one class each.
    pub fn noiseless() -> Self {
        Self {
            within_class: 0.0,
            background: 0.0,
            background_noise: 0.0,
            overlap_prob: 0.0,
            orthogonal: true,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone)]
pub struct World {
    pub config: WorldConfig,
    pub seed: u64,
    pub classes: BTreeMap<DataSplit, Vec<String>>,
    pub prototypes: BTreeMap<String, Vec<f64>>,
    pub background_dir: Vec<f64>,
}

/// All five stores of a world.
#[derive(Debug, Clone)]
pub struct WorldStores {
    pub base_train: EmbeddingStore,
    pub base_val: EmbeddingStore,
    pub base_test: EmbeddingStore,
    pub novel_val: EmbeddingStore,
    pub novel_test: EmbeddingStore,
}

fn randn(rng: &mut Rng, d: usize) -> Vec<f64> {
    (0..d).map(|_| StandardNormal.sample(rng)).collect()
}

fn unit(v: &[f64]) -> Vec<f64> {
    let n = norm(v);
    v.iter().map(|x| x / n).collect()
}

impl World {
    pub fn new(config: WorldConfig, seed: u64) -> Result<Self> {
        let d = config.dim;
        let n_classes = config.n_base + config.n_novel_val + config.n_novel_test;
        if d == 0 || config.n_families == 0 || n_classes == 0 {
            return Err(Error::InvalidArgument("world needs dim, families and classes".into()));
        }
        if config.orthogonal && n_classes + 1 > d {
            return Err(Error::InvalidArgument(format!(
                "orthogonal prototypes need dim > {n_classes}"
            )));
        }
        let mut rng = derive_rng(seed, 0);
        let families: Vec<Vec<f64>> = (0..config.n_families).map(|_| unit(&randn(&mut rng, d))).collect();
        let mut protos: Vec<Vec<f64>> = (0..n_classes)
            .map(|i| {
                let r = unit(&randn(&mut rng, d));
                let f = &families[i % config.n_families];
                unit(&f.iter().zip(&r).map(|(a, b)| a + config.class_spread * b).collect::<Vec<_>>())
            })
            .collect();
        let mut background_dir = unit(&randn(&mut rng, d));
        if config.orthogonal {
            let mut basis: Vec<Vec<f64>> = Vec::new();
            for v in protos.iter_mut().chain(std::iter::once(&mut background_dir)) {
                for b in &basis {
                    let c = dot(v, b);
                    v.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
                }
                *v = unit(v);
                basis.push(v.clone());
            }
        }
        let name = |prefix: &str, i: usize| format!("{prefix}{i:02}");
        let mut classes = BTreeMap::new();
        let mut prototypes = BTreeMap::new();
        let mut k = 0;
        for (split, count, prefix) in [
            (DataSplit::BaseTrain, config.n_base, "base_"),
            (DataSplit::NovelVal, config.n_novel_val, "nval_"),
            (DataSplit::NovelTest, config.n_novel_test, "ntest_"),
        ] {
            let names: Vec<String> = (0..count).map(|i| name(prefix, i)).collect();
            for n in &names {
                prototypes.insert(n.clone(), protos[k].clone());
                k += 1;
            }
            classes.insert(split, names);
        }
        let base = classes[&DataSplit::BaseTrain].clone();
        classes.insert(DataSplit::BaseVal, base.clone());
        classes.insert(DataSplit::BaseTest, base);
        Ok(Self {
            config,
            seed,
            classes,
            prototypes,
            background_dir,
        })
    }

    pub fn base_classes(&self) -> &[String] {
        &self.classes[&DataSplit::BaseTrain]
    }

    fn clip(&self, pool: &[String], rng: &mut Rng) -> (Vec<f64>, ClipMeta) {
        let cfg = &self.config;
        let d = cfg.dim;
        let c = sample_class_count(rng).min(pool.len());
        let picked = sample(rng, pool.len(), c).into_vec();
        let mut active = vec![picked[0]];
        for &p in &picked[1..] {
            if rng.random::<f64>() < cfg.overlap_prob {
                active.push(p);
            }
        }
        let noise = randn(rng, d);
        let scale = 1.0 / (d as f64).sqrt();
        let mut x: Vec<f64> = self
            .background_dir
            .iter()
            .zip(&noise)
            .map(|(b, n)| cfg.background * b + cfg.background_noise * scale * n)
            .collect();
        let mut labels = Vec::new();
        let mut event_snrs = BTreeMap::new();
        for &i in &active {
            let class = &pool[i];
            let snr = SNR_LEVELS_DB[rng.random_range(0..SNR_LEVELS_DB.len())];
            let a = cfg.amplitude * 10f64.powf(snr / 20.0);
            let dev = randn(rng, d);
            for ((o, m), e) in x.iter_mut().zip(&self.prototypes[class]).zip(&dev) {
                *o += a * (m + cfg.within_class * scale * e);
            }
            labels.push(class.clone());
            event_snrs.insert(class.clone(), snr);
        }
        labels.sort();
        let n = norm(&x);
        let x = x.iter().map(|v| v / n).collect();
        (
            x,
            ClipMeta {
                polyphony: labels.len(),
                labels,
                event_snrs,
            },
        )
    }

    /// `n` clips drawn from the classes of `split`.
    pub fn sample_store(&self, split: DataSplit, n: usize) -> Result<EmbeddingStore> {
        let pool = &self.classes[&split];
        let index = DataSplit::ALL.iter().position(|s| *s == split).unwrap_or(0) as u64 + 1;
        let mut rng = derive_rng(self.seed, index);
        let mut ids = Vec::with_capacity(n);
        let mut data = Vec::with_capacity(n * self.config.dim);
        let mut meta = Vec::with_capacity(n);
        for i in 0..n {
            let (x, m) = self.clip(pool, &mut rng);
            ids.push(format!("{split}_{i:05}"));
            data.extend(x.iter().map(|&v| v as f32));
            meta.push(m);
        }
        let mut store = EmbeddingStore::new(ids, self.config.dim, data, Some(meta))?;
        store.kind = Some("embeddings".into());
        Ok(store)
    }

    pub fn stores(&self) -> Result<WorldStores> {
        let n = |s: DataSplit| self.config.clips.get(&s).copied().unwrap_or(0);
        Ok(WorldStores {
            base_train: self.sample_store(DataSplit::BaseTrain, n(DataSplit::BaseTrain))?,
            base_val: self.sample_store(DataSplit::BaseVal, n(DataSplit::BaseVal))?,
            base_test: self.sample_store(DataSplit::BaseTest, n(DataSplit::BaseTest))?,
            novel_val: self.sample_store(DataSplit::NovelVal, n(DataSplit::NovelVal))?,
            novel_test: self.sample_store(DataSplit::NovelTest, n(DataSplit::NovelTest))?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_unit_norm() {
        let w = World::new(WorldConfig::default(), 3).unwrap();
        let a = w.sample_store(DataSplit::NovelTest, 50).unwrap();
        let b = World::new(WorldConfig::default(), 3).unwrap().sample_store(DataSplit::NovelTest, 50).unwrap();
        assert_eq!(a, b);
        for i in 0..a.len() {
            let r = a.row_f64(i);
            assert!((norm(&r) - 1.0).abs() < 1e-6);
            assert!(a.meta(i).unwrap().labels.iter().all(|l| l.starts_with("ntest_")));
        }
    }

    #[test]
    fn noiseless_clips_are_prototypes() {
        let w = World::new(WorldConfig::noiseless(), 1).unwrap();
        let s = w.sample_store(DataSplit::BaseTest, 20).unwrap();
        for i in 0..s.len() {
            let m = s.meta(i).unwrap();
            assert_eq!(m.polyphony, 1);
            let p = &w.prototypes[&m.labels[0]];
            assert!((dot(&s.row_f64(i), p) - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn polyphony_is_mixed() {
        let w = World::new(WorldConfig::default(), 2).unwrap();
        let s = w.sample_store(DataSplit::BaseTrain, 500).unwrap();
        let mono = s.meta.as_ref().unwrap().iter().filter(|m| m.polyphony == 1).count();
        assert!(mono > 150 && mono < 450, "{mono}");
    }
}
