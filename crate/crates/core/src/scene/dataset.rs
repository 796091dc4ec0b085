use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use log::warn;
use rayon::prelude::*;

use super::manifest::SourceManifest;
use super::render::{render, SceneAnnotation};
use super::soundscape::{sample_spec, SceneConfig};
use super::split::{DataSplit, DatasetSplit};
use crate::audio::write_wav;
use crate::error::Result;
use crate::rng::{rng_from_seed, stable_hash};

pub const INDEX_FILE: &str = "index.jsonl";

#[derive(Debug, Default)]
pub struct DatasetSummary {
    pub written: usize,
    pub failures: Vec<(usize, String)>,
}

pub fn scene_id(which: DataSplit, index: usize) -> String {
    format!("{}_{index:06}", which.name())
}

/// Renders `n_scenes` scenes of one data split into `out_dir`.
///
/// Scene `i` is seeded by `stable_hash(master_seed, i)` alone, so output does
/// not depend on thread count or order. Failing scenes are skipped and listed
/// in the summary; `index.jsonl` holds the annotations of the written ones.
pub fn generate_dataset(
    manifest: &SourceManifest,
    split: &DatasetSplit,
    which: DataSplit,
    n_scenes: usize,
    out_dir: &Path,
    master_seed: u64,
    cfg: &SceneConfig,
) -> Result<DatasetSummary> {
    fs::create_dir_all(out_dir)?;
    let pool = split.pool(manifest, which);
    let results: Vec<std::result::Result<SceneAnnotation, String>> = (0..n_scenes)
        .into_par_iter()
        .map(|i| {
            let seed = stable_hash(master_seed, i as u64);
            let id = scene_id(which, i);
            let spec = sample_spec(&id, &pool, cfg, seed, &mut rng_from_seed(seed)).map_err(|e| e.to_string())?;
            let (audio, ann) = render(&spec, manifest).map_err(|e| e.to_string())?;
            write_wav(&out_dir.join(format!("{id}.wav")), &audio).map_err(|e| e.to_string())?;
            Ok(ann)
        })
        .collect();

    let mut summary = DatasetSummary::default();
    let mut index = BufWriter::new(fs::File::create(out_dir.join(INDEX_FILE))?);
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(ann) => {
                serde_json::to_writer(&mut index, &ann)?;
                index.write_all(b"\n")?;
                summary.written += 1;
            }
            Err(e) => {
                warn!("scene {i}: {e}");
                summary.failures.push((i, e));
            }
        }
    }
    index.flush()?;
    Ok(summary)
}

pub fn read_annotations(path: &Path) -> Result<Vec<SceneAnnotation>> {
    let reader = BufReader::new(fs::File::open(path)?);
    let mut out = Vec::new();
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line)?);
    }
    Ok(out)
}
