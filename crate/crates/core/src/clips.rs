//! One-second clip extraction and the overlap labeling rule.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::audio::AudioBuffer;
use crate::error::Result;
use crate::scene::{AnnotatedEvent, SceneAnnotation};

pub const CLIP_DURATION_S: f64 = 1.0;
/// Absolute overlap (seconds) that always qualifies an event.
pub const MIN_OVERLAP_S: f64 = 0.5;
/// Slack for comparing overlaps computed in floating point.
const OVERLAP_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledClip {
    pub id: String,
    pub scene_id: String,
    /// Index of the event this clip is centered on.
    pub anchor_event: usize,
    pub t0: f64,
    pub t1: f64,
    pub labels: Vec<String>,
    pub polyphony: usize,
    pub event_snrs: BTreeMap<String, f64>,
}

fn overlap(window: (f64, f64), ev: &AnnotatedEvent) -> f64 {
    (window.1.min(ev.offset_s()) - window.0.max(ev.onset_s)).max(0.0)
}

/// Whether `ev` counts as present in `window`: its overlap must exceed
/// 0.5 s or half the event's own duration.
pub fn event_in_window(window: (f64, f64), ev: &AnnotatedEvent) -> bool {
    overlap(window, ev) > MIN_OVERLAP_S.min(ev.duration_s / 2.0) + OVERLAP_EPS
}

/// Classes present in `window`; several events of one class collapse to one label.
pub fn label_window(window: (f64, f64), events: &[AnnotatedEvent]) -> BTreeSet<String> {
    events
        .iter()
        .filter(|ev| event_in_window(window, ev))
        .map(|ev| ev.class_label.clone())
        .collect()
}

/// Window of [`CLIP_DURATION_S`] centered on `ev`, shifted inward at scene edges.
pub fn centered_window(ev: &AnnotatedEvent, scene_duration_s: f64) -> (f64, f64) {
    let center = ev.onset_s + ev.duration_s / 2.0;
    let latest = (scene_duration_s - CLIP_DURATION_S).max(0.0);
    let t0 = (center - CLIP_DURATION_S / 2.0).clamp(0.0, latest);
    (t0, t0 + CLIP_DURATION_S)
}

/// One clip per event, labeled by every qualifying event in its window.
pub fn extract_clips(ann: &SceneAnnotation) -> Vec<LabeledClip> {
    ann.events
        .iter()
        .enumerate()
        .map(|(k, ev)| {
            let window = centered_window(ev, ann.duration_s);
            let mut snrs: BTreeMap<String, (f64, f64)> = BTreeMap::new();
            for other in ann.events.iter().filter(|o| event_in_window(window, o)) {
                let ov = overlap(window, other);
                let slot = snrs.entry(other.class_label.clone()).or_insert((ov, other.snr_db));
                if ov > slot.0 {
                    *slot = (ov, other.snr_db);
                }
            }
            let labels: Vec<String> = snrs.keys().cloned().collect();
            LabeledClip {
                id: format!("{}_e{k}", ann.id),
                scene_id: ann.id.clone(),
                anchor_event: k,
                t0: window.0,
                t1: window.1,
                polyphony: labels.len(),
                labels,
                event_snrs: snrs.into_iter().map(|(c, (_, snr))| (c, snr)).collect(),
            }
        })
        .collect()
}

/// Cuts a clip's window out of its scene audio, zero-padding past the end.
pub fn clip_audio(scene: &AudioBuffer, clip: &LabeledClip) -> AudioBuffer {
    let sr = scene.sample_rate as f64;
    let start = (clip.t0 * sr).round() as usize;
    let len = ((clip.t1 - clip.t0) * sr).round() as usize;
    let mut out = scene.slice(start, len);
    out.samples.resize(len, 0.0);
    out
}

pub fn write_clip_index(path: &Path, clips: &[LabeledClip]) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    for c in clips {
        serde_json::to_writer(&mut w, c)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_clip_index(path: &Path) -> Result<Vec<LabeledClip>> {
    let reader = BufReader::new(fs::File::open(path)?);
    let mut out = Vec::new();
    for line in reader.lines() {
        let line = line?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line)?);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::BackgroundInfo;

    fn ev(class: &str, onset: f64, dur: f64) -> AnnotatedEvent {
        AnnotatedEvent {
            class_label: class.into(),
            source_file: format!("{class}.wav"),
            onset_s: onset,
            duration_s: dur,
            snr_db: 5.0,
            pitch_semitones: 0.0,
            stretch_ratio: 1.0,
        }
    }

    fn scene(events: Vec<AnnotatedEvent>) -> SceneAnnotation {
        SceneAnnotation {
            id: "s".into(),
            duration_s: 10.0,
            sample_rate: 16000,
            background: BackgroundInfo { rms_dbfs: -30.0, seed: 0 },
            applied_mix_gain: 1.0,
            events,
        }
    }

    #[test]
    fn rule_examples() {
        let w = (4.0, 5.0);
        // 3 s event overlapping 0.4 s: neither 0.5 s nor 1.5 s is exceeded
        assert!(label_window(w, &[ev("a", 4.6, 3.0)]).is_empty());
        // 0.4 s event fully inside: 0.4 > 0.2
        assert_eq!(label_window(w, &[ev("a", 4.3, 0.4)]).len(), 1);
        // 5 s event overlapping 0.6 s
        assert_eq!(label_window(w, &[ev("a", 4.4, 5.0)]).len(), 1);
        // exactly 0.5 s overlap of a long event is excluded
        assert!(label_window(w, &[ev("a", 4.5, 5.0)]).is_empty());
        // two events of one class give a single label
        assert_eq!(label_window(w, &[ev("a", 4.0, 1.0), ev("a", 4.2, 0.5)]).len(), 1);
    }

    #[test]
    fn centered_and_clamped_windows() {
        let clips = extract_clips(&scene(vec![ev("a", 4.0, 2.0)]));
        assert_eq!(clips.len(), 1);
        assert_eq!((clips[0].t0, clips[0].t1), (4.5, 5.5));
        assert_eq!(clips[0].labels, vec!["a".to_string()]);
        assert_eq!(clips[0].polyphony, 1);

        let clips = extract_clips(&scene(vec![ev("a", 0.1, 0.2), ev("b", 9.8, 0.2)]));
        assert_eq!((clips[0].t0, clips[0].t1), (0.0, 1.0));
        assert_eq!((clips[1].t0, clips[1].t1), (9.0, 10.0));
    }

    #[test]
    fn overlapping_events_raise_polyphony() {
        let clips = extract_clips(&scene(vec![ev("a", 3.0, 4.0), ev("b", 4.5, 1.0), ev("c", 4.0, 2.0)]));
        assert!(clips.iter().any(|c| c.polyphony == 3));
        for c in &clips {
            assert_eq!(c.event_snrs.len(), c.polyphony);
        }
    }

    #[test]
    fn clip_audio_is_one_second() {
        let scene_audio = AudioBuffer::zeros(16000 * 10, 16000);
        let clips = extract_clips(&scene(vec![ev("a", 9.7, 0.3)]));
        assert_eq!(clip_audio(&scene_audio, &clips[0]).len(), 16000);
    }
}
