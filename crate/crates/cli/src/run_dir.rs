use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const ARTIFACTS_FILE: &str = "artifacts.json";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Artifact {
    pub stage: String,
    pub bytes: u64,
    pub sha256: String,
}

/// Root of one pipeline run plus its artifact manifest.
#[derive(Debug, Clone)]
pub struct RunDir {
    pub root: PathBuf,
}

impl RunDir {
    pub fn new(root: PathBuf) -> Result<Self> {
        fs::create_dir_all(&root).with_context(|| format!("creating run dir {}", root.display()))?;
        Ok(Self { root })
    }

    pub fn path(&self, rel: impl AsRef<Path>) -> PathBuf {
        self.root.join(rel)
    }

    fn key(&self, p: &Path) -> String {
        p.strip_prefix(&self.root)
            .unwrap_or(p)
            .to_string_lossy()
            .replace('\\', "/")
    }

    /// Adds or refreshes manifest entries for `paths` (files, or directories
    /// whose files are listed recursively).
    pub fn record(&self, stage: &str, paths: &[PathBuf]) -> Result<()> {
        let manifest = self.path(ARTIFACTS_FILE);
        let mut entries: BTreeMap<String, Artifact> = if manifest.exists() {
            serde_json::from_str(&fs::read_to_string(&manifest)?).context("reading artifacts.json")?
        } else {
            BTreeMap::new()
        };
        let mut files = Vec::new();
        for p in paths {
            collect_files(p, &mut files)?;
        }
        for f in files {
            let data = fs::read(&f)?;
            entries.insert(
                self.key(&f),
                Artifact {
                    stage: stage.to_string(),
                    bytes: data.len() as u64,
                    sha256: format!("{:x}", Sha256::digest(&data)),
                },
            );
        }
        fs::write(&manifest, serde_json::to_string_pretty(&entries)? + "\n")?;
        Ok(())
    }
}

fn collect_files(p: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    if p.is_dir() {
        let mut children: Vec<PathBuf> = fs::read_dir(p)?.map(|e| e.map(|e| e.path())).collect::<std::io::Result<_>>()?;
        children.sort();
        for c in children {
            collect_files(&c, out)?;
        }
    } else if p.exists() {
        out.push(p.to_path_buf());
    }
    Ok(())
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, serde_json::to_string_pretty(value)? + "\n").with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}
