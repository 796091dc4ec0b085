use serde::{Deserialize, Serialize};

use super::manifest::SourceManifest;
use super::soundscape::SoundscapeSpec;
use crate::audio::{
    brownian_noise, db_to_amplitude, gain_for_snr, mix_into, onset_to_offset, pitch_shift, read_wav, resample, rms,
    time_stretch, trim_silence, AudioBuffer,
};
use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

pub const TRIM_THRESHOLD: f64 = 0.001;
pub const TRIM_MIN_DUR_S: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackgroundInfo {
    pub rms_dbfs: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotatedEvent {
    #[serde(rename = "class")]
    pub class_label: String,
    pub source_file: String,
    pub onset_s: f64,
    pub duration_s: f64,
    pub snr_db: f64,
    pub pitch_semitones: f64,
    pub stretch_ratio: f64,
}

impl AnnotatedEvent {
    pub fn offset_s(&self) -> f64 {
        self.onset_s + self.duration_s
    }
}

/// Strong annotation of a rendered scene, one JSON line per scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneAnnotation {
    pub id: String,
    pub duration_s: f64,
    pub sample_rate: u32,
    pub background: BackgroundInfo,
    pub applied_mix_gain: f64,
    pub events: Vec<AnnotatedEvent>,
}

/// One event after transformation, gain and peak guard, at its offset.
#[derive(Debug, Clone)]
pub struct EventStem {
    pub offset: usize,
    pub audio: AudioBuffer,
}

#[derive(Debug, Clone)]
pub struct RenderedScene {
    pub mix: AudioBuffer,
    /// Background after the peak guard.
    pub background: AudioBuffer,
    pub events: Vec<EventStem>,
    pub annotation: SceneAnnotation,
}

/// Loads a source clip and applies trim, resampling, pitch shift and stretch.
pub fn prepare_event(path: &std::path::Path, sample_rate: u32, semitones: f64, stretch: f64) -> Result<AudioBuffer> {
    let raw = read_wav(path)?;
    let trimmed = trim_silence(&raw, TRIM_THRESHOLD, TRIM_MIN_DUR_S)?;
    let at_rate = resample(&trimmed, sample_rate);
    let shifted = pitch_shift(&at_rate, semitones)?;
    time_stretch(&shifted, stretch)
}

/// Renders a scene and keeps every stem separately.
pub fn render_stems(spec: &SoundscapeSpec, manifest: &SourceManifest) -> Result<RenderedScene> {
    let sr = spec.sample_rate;
    let bg_seed = spec.background_seed();
    let mut background = brownian_noise(
        spec.duration_s,
        sr,
        db_to_amplitude(spec.background_rms_dbfs),
        &mut rng_from_seed(bg_seed),
    )?;
    let bg_rms = rms(&background);
    let scene_len = background.len();
    let mut mix = background.clone();
    let mut stems = Vec::with_capacity(spec.events.len());
    let mut events = Vec::with_capacity(spec.events.len());
    for ev in &spec.events {
        let path = manifest.resolve(&ev.source_file);
        let mut audio = prepare_event(&path, sr, ev.pitch_semitones, ev.stretch_ratio)?;
        let offset = onset_to_offset(ev.onset_s, sr);
        if offset >= scene_len {
            return Err(Error::PlacementOverflow {
                offset,
                event_len: audio.len(),
                base_len: scene_len,
            });
        }
        audio.samples.truncate(scene_len - offset);
        let gain = gain_for_snr(rms(&audio), bg_rms, ev.snr_db)
            .map_err(|_| Error::DegenerateSignal(format!("{} is silent after trimming", ev.source_file)))?;
        let audio = audio.scaled(gain);
        mix_into(&mut mix, &audio, offset as f64 / sr as f64, 1.0)?;
        events.push(AnnotatedEvent {
            class_label: ev.class_label.clone(),
            source_file: ev.source_file.clone(),
            onset_s: offset as f64 / sr as f64,
            duration_s: audio.len() as f64 / sr as f64,
            snr_db: ev.snr_db,
            pitch_semitones: ev.pitch_semitones,
            stretch_ratio: ev.stretch_ratio,
        });
        stems.push(EventStem { offset, audio });
    }

    let peak = mix.peak();
    let applied_mix_gain = if peak > 1.0 { 1.0 / peak } else { 1.0 };
    if applied_mix_gain < 1.0 {
        mix = mix.scaled(applied_mix_gain);
        background = background.scaled(applied_mix_gain);
        for s in &mut stems {
            s.audio = s.audio.scaled(applied_mix_gain);
        }
    }
    Ok(RenderedScene {
        mix,
        background,
        events: stems,
        annotation: SceneAnnotation {
            id: spec.id.clone(),
            duration_s: spec.duration_s,
            sample_rate: sr,
            background: BackgroundInfo {
                rms_dbfs: spec.background_rms_dbfs,
                seed: bg_seed,
            },
            applied_mix_gain,
            events,
        },
    })
}

pub fn render(spec: &SoundscapeSpec, manifest: &SourceManifest) -> Result<(AudioBuffer, SceneAnnotation)> {
    let r = render_stems(spec, manifest)?;
    Ok((r.mix, r.annotation))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audio::write_wav_pcm16;
    use crate::scene::manifest::ManifestEntry;
    use crate::scene::soundscape::EventPlacement;
    use std::path::Path;

    fn fixture(dir: &Path) -> SourceManifest {
        let mut tone = vec![0.0; 2205];
        tone.extend(AudioBuffer::sine(660.0, 0.4, 1.5, 22050).samples);
        tone.extend(vec![0.0; 2205]);
        write_wav_pcm16(&dir.join("tone.wav"), &AudioBuffer::new(tone, 22050).unwrap()).unwrap();
        SourceManifest {
            root: dir.to_path_buf(),
            entries: vec![ManifestEntry {
                file_path: "tone.wav".into(),
                class_label: "tone".into(),
                duration_s: 1.5,
            }],
        }
    }

    fn spec(events: Vec<EventPlacement>) -> SoundscapeSpec {
        SoundscapeSpec {
            id: "s0".into(),
            duration_s: 10.0,
            sample_rate: 16000,
            c: events.len(),
            events,
            background_rms_dbfs: -30.0,
            seed: 42,
        }
    }

    fn event(snr_db: f64) -> EventPlacement {
        EventPlacement {
            class_label: "tone".into(),
            source_file: "tone.wav".into(),
            onset_s: 3.0,
            event_duration_s: 1.5 * 1.1,
            pitch_semitones: 1.0,
            stretch_ratio: 1.1,
            snr_db,
        }
    }

    #[test]
    fn background_only_scene() {
        let dir = tempfile::tempdir().unwrap();
        let m = fixture(dir.path());
        let r = render_stems(&spec(vec![]), &m).unwrap();
        assert_eq!(r.mix, r.background);
        assert_eq!(r.annotation.applied_mix_gain, 1.0);
        assert!((rms(&r.mix) - db_to_amplitude(-30.0)).abs() < 1e-9);
    }

    #[test]
    fn zero_db_event_matches_background_level() {
        let dir = tempfile::tempdir().unwrap();
        let m = fixture(dir.path());
        let r = render_stems(&spec(vec![event(0.0)]), &m).unwrap();
        let ratio = rms(&r.events[0].audio) / rms(&r.background);
        assert!((ratio - 1.0).abs() < 1e-6, "{ratio}");
        let a = &r.annotation.events[0];
        // trimming keeps up to one 10 ms window of lead-in on each side
        assert!(a.duration_s >= 1.65 - 1e-3 && a.duration_s <= 1.1 * 1.52 + 1e-3, "{}", a.duration_s);
        assert_eq!(a.onset_s, 3.0);
    }

    #[test]
    fn peak_guard_preserves_ratios() {
        let dir = tempfile::tempdir().unwrap();
        let m = fixture(dir.path());
        let mut s = spec(vec![event(20.0)]);
        s.background_rms_dbfs = -3.0;
        let r = render_stems(&s, &m).unwrap();
        assert!(r.annotation.applied_mix_gain < 1.0);
        assert!(r.mix.peak() <= 1.0 + 1e-12);
        let ratio = rms(&r.events[0].audio) / rms(&r.background);
        assert!((ratio - 10.0).abs() / 10.0 < 1e-6);
    }

    #[test]
    fn rendering_is_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        let m = fixture(dir.path());
        let s = spec(vec![event(5.0)]);
        assert_eq!(render(&s, &m).unwrap(), render(&s, &m).unwrap());
    }

    #[test]
    fn truncates_at_scene_end() {
        let dir = tempfile::tempdir().unwrap();
        let m = fixture(dir.path());
        let mut ev = event(0.0);
        ev.onset_s = 9.5;
        let r = render_stems(&spec(vec![ev]), &m).unwrap();
        let a = &r.annotation.events[0];
        assert!((a.offset_s() - 10.0).abs() < 1e-9);
    }

    #[test]
    fn unreadable_source() {
        let dir = tempfile::tempdir().unwrap();
        let m = fixture(dir.path());
        let mut ev = event(0.0);
        ev.source_file = "nope.wav".into();
        assert!(matches!(render(&spec(vec![ev]), &m), Err(Error::MissingFile(_))));
    }
}
