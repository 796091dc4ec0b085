use serde::{Deserialize, Serialize};

use crate::embeddings::ClipMeta;
use crate::scene::SNR_LEVELS_DB;

/// Clips with more simultaneous classes than this share the top bucket.
pub const POLYPHONY_CAP: usize = 4;

/// Novel-class performance split by test-clip polyphony and event SNR.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Breakdown {
    /// Mean F over novel classes, per polyphony bucket 1..=4.
    pub polyphony_f: Vec<Option<f64>>,
    /// Mean recall over novel classes, per SNR level.
    pub snr_recall: Vec<Option<f64>>,
}

pub fn polyphony_bucket(p: usize) -> usize {
    p.clamp(1, POLYPHONY_CAP)
}

/// Index into the SNR level table closest to `db`.
pub fn nearest_snr_level(db: f64) -> usize {
    let mut best = 0;
    for (i, l) in SNR_LEVELS_DB.iter().enumerate() {
        if (db - l).abs() < (db - SNR_LEVELS_DB[best]).abs() {
            best = i;
        }
    }
    best
}

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

/// `scores`/`labels` are per test clip; `cols` lists the novel-class
/// columns and `names` their class labels as they appear in `meta`.
pub fn breakdown(
    scores: &[Vec<f64>],
    labels: &[Vec<bool>],
    meta: &[&ClipMeta],
    cols: &[usize],
    names: &[String],
    threshold: f64,
) -> Breakdown {
    let mut polyphony_f = Vec::new();
    for bucket in 1..=POLYPHONY_CAP {
        let rows: Vec<usize> = (0..scores.len())
            .filter(|&i| polyphony_bucket(meta[i].polyphony) == bucket)
            .collect();
        let mut fs = Vec::new();
        for &k in cols {
            let (mut tp, mut fp, mut fn_) = (0, 0, 0);
            for &i in &rows {
                match (scores[i][k] > threshold, labels[i][k]) {
                    (true, true) => tp += 1,
                    (true, false) => fp += 1,
                    (false, true) => fn_ += 1,
                    _ => {}
                }
            }
            if tp + fn_ > 0 {
                fs.push(super::Prf::from_counts(tp, fp, fn_).f);
            }
        }
        polyphony_f.push(mean(&fs));
    }

    let mut snr_recall = Vec::new();
    for level in 0..SNR_LEVELS_DB.len() {
        let mut recalls = Vec::new();
        for (&k, name) in cols.iter().zip(names) {
            let (mut hit, mut total) = (0usize, 0usize);
            for i in 0..scores.len() {
                if !labels[i][k] {
                    continue;
                }
                let Some(&db) = meta[i].event_snrs.get(name) else {
                    continue;
                };
                if nearest_snr_level(db) == level {
                    total += 1;
                    hit += usize::from(scores[i][k] > threshold);
                }
            }
            if total > 0 {
                recalls.push(hit as f64 / total as f64);
            }
        }
        snr_recall.push(mean(&recalls));
    }
    Breakdown {
        polyphony_f,
        snr_recall,
    }
}
