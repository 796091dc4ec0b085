//! Synthetic single-label source corpus for running the pipeline without a
//! real sound collection. Each class has its own fundamental, harmonic
//! profile and envelope; clips vary in pitch, length, level and padding.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use rand::Rng as _;

use super::manifest::{ManifestEntry, SourceManifest};
use crate::audio::{write_wav_pcm16, AudioBuffer};
use crate::error::Result;
use crate::rng::derive_rng;

pub const SYNTH_SAMPLE_RATE: u32 = 22050;

fn class_tone(class: usize, dur: f64, amp: f64, jitter: f64, sr: u32) -> Vec<f64> {
    let f0 = 110.0 * 2f64.powf(class as f64 * 5.0 / 12.0 % 4.0) * jitter;
    let harmonics = 1 + class % 4;
    let n = (dur * sr as f64).round() as usize;
    let envelope = class % 3;
    (0..n)
        .map(|i| {
            let t = i as f64 / sr as f64;
            let env = match envelope {
                0 => (-3.0 * t / dur).exp(),
                1 => (PI * t / dur).sin(),
                _ => 0.75 + 0.25 * (2.0 * PI * (3.0 + class as f64 % 5.0) * t).sin(),
            };
            let tone: f64 = (1..=harmonics)
                .map(|h| (2.0 * PI * f0 * h as f64 * t).sin() / h as f64)
                .sum();
            amp * env * tone / harmonics as f64
        })
        .collect()
}

/// Writes `n_classes * clips_per_class` WAVs plus `manifest.csv` into `out_dir`.
/// Manifest durations are the raw file durations.
pub fn write_synthetic_corpus(out_dir: &Path, n_classes: usize, clips_per_class: usize, seed: u64) -> Result<SourceManifest> {
    fs::create_dir_all(out_dir)?;
    let sr = SYNTH_SAMPLE_RATE;
    let mut entries = Vec::with_capacity(n_classes * clips_per_class);
    for class in 0..n_classes {
        let label = format!("synth{class:02}");
        for k in 0..clips_per_class {
            let mut rng = derive_rng(seed, (class * clips_per_class + k) as u64);
            let dur = rng.random_range(0.4..3.2);
            let amp = rng.random_range(0.1..0.8);
            let jitter = rng.random_range(0.97..1.03);
            let lead = (rng.random_range(0.0..0.2) * sr as f64) as usize;
            let tail = (rng.random_range(0.0..0.2) * sr as f64) as usize;
            let mut samples = vec![0.0; lead];
            samples.extend(class_tone(class, dur, amp, jitter, sr));
            samples.extend(vec![0.0; tail]);
            let buf = AudioBuffer::new(samples, sr)?;
            let file_path = format!("{label}_{k:03}.wav");
            write_wav_pcm16(&out_dir.join(&file_path), &buf)?;
            entries.push(ManifestEntry {
                file_path,
                class_label: label.clone(),
                duration_s: buf.duration_s(),
            });
        }
    }
    let manifest = SourceManifest {
        root: out_dir.to_path_buf(),
        entries,
    };
    manifest.write_csv(&out_dir.join("manifest.csv"))?;
    Ok(manifest)
}
