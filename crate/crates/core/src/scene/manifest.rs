use std::collections::{BTreeMap, HashSet};
use std::path::{Path, PathBuf};

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Source clips at or above this duration are dropped at ingest.
pub const MAX_SOURCE_DURATION_S: f64 = 4.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub file_path: String,
    pub class_label: String,
    pub duration_s: f64,
}

/// Validated single-label source clips. Relative paths resolve against `root`.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceManifest {
    pub root: PathBuf,
    pub entries: Vec<ManifestEntry>,
}

#[derive(Debug, Clone)]
pub struct Ingested {
    pub manifest: SourceManifest,
    pub warnings: Vec<String>,
}

impl SourceManifest {
    pub fn resolve(&self, file_path: &str) -> PathBuf {
        resolve_path(&self.root, file_path)
    }

    /// Entries grouped by class, classes in lexical order.
    pub fn by_class(&self) -> BTreeMap<&str, Vec<&ManifestEntry>> {
        let mut map: BTreeMap<&str, Vec<&ManifestEntry>> = BTreeMap::new();
        for e in &self.entries {
            map.entry(e.class_label.as_str()).or_default().push(e);
        }
        map
    }

    pub fn entry(&self, file_path: &str) -> Option<&ManifestEntry> {
        self.entries.iter().find(|e| e.file_path == file_path)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        for e in &self.entries {
            w.serialize(e)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn resolve_path(root: &Path, file_path: &str) -> PathBuf {
    let p = Path::new(file_path);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        root.join(p)
    }
}

/// Reads a `file_path,class_label,duration_s` CSV.
///
/// Rows at or above [`MAX_SOURCE_DURATION_S`] are dropped with a warning.
/// Missing files, blank labels, duplicate paths and unparsable rows are errors.
pub fn ingest_manifest(path: &Path) -> Result<Ingested> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let root = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let mut reader = csv::Reader::from_path(path)?;
    let mut entries = Vec::new();
    let mut warnings = Vec::new();
    let mut seen = HashSet::new();
    let mut rows = 0usize;
    for (i, rec) in reader.deserialize::<ManifestEntry>().enumerate() {
        let row = i + 2;
        rows += 1;
        let e = rec.map_err(|err| Error::MalformedRow {
            row,
            reason: err.to_string(),
        })?;
        if e.class_label.trim().is_empty() {
            return Err(Error::EmptyClass(row));
        }
        if !(e.duration_s > 0.0) || !e.duration_s.is_finite() {
            return Err(Error::MalformedRow {
                row,
                reason: format!("duration_s must be positive, got {}", e.duration_s),
            });
        }
        if !seen.insert(e.file_path.clone()) {
            return Err(Error::DuplicateEntry(e.file_path));
        }
        let resolved = resolve_path(&root, &e.file_path);
        if !resolved.exists() {
            return Err(Error::MissingFile(resolved));
        }
        if e.duration_s >= MAX_SOURCE_DURATION_S {
            let msg = format!(
                "row {row}: {} is {:.3} s, not shorter than {MAX_SOURCE_DURATION_S} s; skipped",
                e.file_path, e.duration_s
            );
            warn!("{msg}");
            warnings.push(msg);
            continue;
        }
        entries.push(e);
    }
    if rows == 0 {
        return Err(Error::EmptyManifest);
    }
    Ok(Ingested {
        manifest: SourceManifest { root, entries },
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    fn touch(dir: &Path, name: &str) {
        fs::write(dir.join(name), b"").unwrap();
    }

    #[test]
    fn filters_long_clips() {
        let dir = tempfile::tempdir().unwrap();
        for f in ["a.wav", "b.wav", "c.wav"] {
            touch(dir.path(), f);
        }
        let m = dir.path().join("m.csv");
        fs::write(&m, "file_path,class_label,duration_s\na.wav,dog,1.5\nb.wav,dog,5.2\nc.wav,cat,3.0\n").unwrap();
        let got = ingest_manifest(&m).unwrap();
        assert_eq!(got.manifest.entries.len(), 2);
        assert_eq!(got.warnings.len(), 1);
        assert_eq!(got.manifest.resolve("a.wav"), dir.path().join("a.wav"));
    }

    #[test]
    fn empty_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let m = dir.path().join("m.csv");
        fs::write(&m, "").unwrap();
        assert!(matches!(ingest_manifest(&m), Err(Error::EmptyManifest)));
        fs::write(&m, "file_path,class_label,duration_s\n").unwrap();
        assert!(matches!(ingest_manifest(&m), Err(Error::EmptyManifest)));
    }

    #[test]
    fn duplicate_entry() {
        let dir = tempfile::tempdir().unwrap();
        touch(dir.path(), "a.wav");
        let m = dir.path().join("m.csv");
        fs::write(&m, "file_path,class_label,duration_s\na.wav,dog,1.0\na.wav,dog,1.0\n").unwrap();
        assert!(matches!(ingest_manifest(&m), Err(Error::DuplicateEntry(_))));
    }

    #[test]
    fn row_errors() {
        let dir = tempfile::tempdir().unwrap();
        touch(dir.path(), "a.wav");
        let m = dir.path().join("m.csv");
        fs::write(&m, "file_path,class_label,duration_s\nmissing.wav,dog,1.0\n").unwrap();
        assert!(matches!(ingest_manifest(&m), Err(Error::MissingFile(_))));
        fs::write(&m, "file_path,class_label,duration_s\na.wav,,1.0\n").unwrap();
        assert!(matches!(ingest_manifest(&m), Err(Error::EmptyClass(2))));
        fs::write(&m, "file_path,class_label,duration_s\na.wav,dog,abc\n").unwrap();
        assert!(matches!(ingest_manifest(&m), Err(Error::MalformedRow { row: 2, .. })));
        fs::write(&m, "file_path,class_label,duration_s\na.wav,dog,0\n").unwrap();
        assert!(matches!(ingest_manifest(&m), Err(Error::MalformedRow { .. })));
    }
}
