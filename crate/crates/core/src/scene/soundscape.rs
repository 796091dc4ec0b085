use rand::seq::index;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::split::ClassPool;
use crate::error::{Error, Result};
use crate::rng::Rng;

/// Per-event SNR choices in dB.
pub const SNR_LEVELS_DB: [f64; 6] = [-5.0, 0.0, 5.0, 10.0, 15.0, 20.0];
pub const MAX_CLASSES_PER_SCENE: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SnrMode {
    /// Uniform over [`SNR_LEVELS_DB`].
    Discrete,
    /// Uniform over the continuous range spanned by [`SNR_LEVELS_DB`].
    Uniform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneConfig {
    pub duration_s: f64,
    pub sample_rate: u32,
    pub background_rms_dbfs: f64,
    pub snr_mode: SnrMode,
    pub max_pitch_semitones: f64,
    pub stretch_range: (f64, f64),
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            duration_s: 10.0,
            sample_rate: 44100,
            background_rms_dbfs: -30.0,
            snr_mode: SnrMode::Discrete,
            max_pitch_semitones: 2.0,
            stretch_range: (0.8, 1.2),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventPlacement {
    pub class_label: String,
    pub source_file: String,
    pub onset_s: f64,
    /// Planned duration after stretching, truncated at the scene end.
    pub event_duration_s: f64,
    pub pitch_semitones: f64,
    pub stretch_ratio: f64,
    pub snr_db: f64,
}

/// Fully determined recipe for one scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoundscapeSpec {
    pub id: String,
    pub duration_s: f64,
    pub sample_rate: u32,
    pub c: usize,
    pub events: Vec<EventPlacement>,
    pub background_rms_dbfs: f64,
    pub seed: u64,
}

impl SoundscapeSpec {
    pub fn background_seed(&self) -> u64 {
        crate::rng::stable_hash(self.seed, u64::MAX)
    }
}

/// Draws `c` in `1..=5` with probability proportional to `1/c`.
pub fn sample_class_count(rng: &mut Rng) -> usize {
    let weights: Vec<f64> = (1..=MAX_CLASSES_PER_SCENE).map(|c| 1.0 / c as f64).collect();
    let total: f64 = weights.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        if u < *w {
            return i + 1;
        }
        u -= w;
    }
    MAX_CLASSES_PER_SCENE
}

/// Exact probability of each class count.
pub fn class_count_pmf() -> [f64; MAX_CLASSES_PER_SCENE] {
    let h: f64 = (1..=MAX_CLASSES_PER_SCENE).map(|c| 1.0 / c as f64).sum();
    std::array::from_fn(|i| 1.0 / ((i + 1) as f64 * h))
}

fn sample_snr(mode: SnrMode, rng: &mut Rng) -> f64 {
    match mode {
        SnrMode::Discrete => SNR_LEVELS_DB[rng.random_range(0..SNR_LEVELS_DB.len())],
        SnrMode::Uniform => rng.random_range(SNR_LEVELS_DB[0]..=SNR_LEVELS_DB[SNR_LEVELS_DB.len() - 1]),
    }
}

/// Samples a scene recipe from the classes of one data split.
pub fn sample_spec(id: &str, pool: &ClassPool<'_>, cfg: &SceneConfig, seed: u64, rng: &mut Rng) -> Result<SoundscapeSpec> {
    if pool.len() < MAX_CLASSES_PER_SCENE {
        return Err(Error::InsufficientClasses {
            needed: MAX_CLASSES_PER_SCENE,
            available: pool.len(),
        });
    }
    let c = sample_class_count(rng);
    sample_spec_with_count(id, pool, cfg, seed, c, rng)
}

/// As [`sample_spec`] with a fixed class count (zero gives a background-only scene).
pub fn sample_spec_with_count(
    id: &str,
    pool: &ClassPool<'_>,
    cfg: &SceneConfig,
    seed: u64,
    c: usize,
    rng: &mut Rng,
) -> Result<SoundscapeSpec> {
    if c > pool.len() {
        return Err(Error::InsufficientClasses {
            needed: c,
            available: pool.len(),
        });
    }
    let classes: Vec<&String> = pool.keys().collect();
    let mut events = Vec::with_capacity(c);
    for k in index::sample(rng, classes.len(), c) {
        let class = classes[k];
        let clips = &pool[class];
        if clips.is_empty() {
            return Err(Error::NoClips { class: class.clone() });
        }
        let clip = clips[rng.random_range(0..clips.len())];
        let pitch = rng.random_range(-cfg.max_pitch_semitones..=cfg.max_pitch_semitones);
        let stretch = rng.random_range(cfg.stretch_range.0..=cfg.stretch_range.1);
        let snr_db = sample_snr(cfg.snr_mode, rng);
        let stretched = clip.duration_s * stretch;
        let (onset_s, event_duration_s) = if stretched >= cfg.duration_s {
            (0.0, cfg.duration_s)
        } else {
            (rng.random_range(0.0..=cfg.duration_s - stretched), stretched)
        };
        events.push(EventPlacement {
            class_label: class.clone(),
            source_file: clip.file_path.clone(),
            onset_s,
            event_duration_s,
            pitch_semitones: pitch,
            stretch_ratio: stretch,
            snr_db,
        });
    }
    Ok(SoundscapeSpec {
        id: id.to_string(),
        duration_s: cfg.duration_s,
        sample_rate: cfg.sample_rate,
        c,
        events,
        background_rms_dbfs: cfg.background_rms_dbfs,
        seed,
    })
}
