use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;

use super::store::{ClipMeta, EmbeddingStore};
use crate::audio::{log_mel, read_wav, resample, AudioBuffer, MelConfig};
use crate::clips::{clip_audio, LabeledClip};
use crate::error::{Error, Result};

/// Per-band mean and standard deviation of the log-mel matrix
/// (`2 * n_mels` values), L2-normalized.
pub fn pool_embed(clip: &AudioBuffer, cfg: &MelConfig) -> Result<Vec<f64>> {
    let mel = log_mel(clip, cfg)?;
    let frames = mel.n_frames as f64;
    let mut out = vec![0.0; 2 * mel.n_mels];
    for m in 0..mel.n_mels {
        let mean = (0..mel.n_frames).map(|t| mel.get(t, m)).sum::<f64>() / frames;
        let var = (0..mel.n_frames).map(|t| (mel.get(t, m) - mean).powi(2)).sum::<f64>() / frames;
        out[m] = mean;
        out[mel.n_mels + m] = var.sqrt();
    }
    let norm = out.iter().map(|v| v * v).sum::<f64>().sqrt();
    if !(norm > 0.0) {
        return Err(Error::ZeroNorm("pooled embedding".into()));
    }
    out.iter_mut().for_each(|v| *v /= norm);
    Ok(out)
}

impl From<&LabeledClip> for ClipMeta {
    fn from(c: &LabeledClip) -> Self {
        ClipMeta {
            labels: c.labels.clone(),
            polyphony: c.polyphony,
            event_snrs: c.event_snrs.clone(),
        }
    }
}

/// Embeds every clip of a clip index, reading scene audio from `scene_dir`.
/// Rows follow the order of `clips`.
pub fn featurize(scene_dir: &Path, clips: &[LabeledClip], cfg: &MelConfig) -> Result<EmbeddingStore> {
    let mut by_scene: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, c) in clips.iter().enumerate() {
        by_scene.entry(c.scene_id.as_str()).or_default().push(i);
    }
    let per_scene: Vec<Result<Vec<(usize, Vec<f64>)>>> = by_scene
        .par_iter()
        .map(|(scene, idx)| {
            let audio = resample(&read_wav(&scene_dir.join(format!("{scene}.wav")))?, cfg.sample_rate);
            idx.iter()
                .map(|&i| Ok((i, pool_embed(&clip_audio(&audio, &clips[i]), cfg)?)))
                .collect()
        })
        .collect();
    let mut rows: Vec<Option<Vec<f64>>> = vec![None; clips.len()];
    for r in per_scene {
        for (i, v) in r? {
            rows[i] = Some(v);
        }
    }
    let dim = 2 * cfg.n_mels;
    let data = rows.into_iter().flat_map(|r| r.unwrap_or_default()).map(|v| v as f32).collect();
    EmbeddingStore::new(
        clips.iter().map(|c| c.id.clone()).collect(),
        dim,
        data,
        Some(clips.iter().map(ClipMeta::from).collect()),
    )
}
