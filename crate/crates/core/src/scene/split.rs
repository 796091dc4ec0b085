use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::manifest::{ManifestEntry, SourceManifest};
use crate::error::{Error, Result};
use crate::rng::Rng;

/// Classes with fewer source clips than this are not eligible for any split.
pub const DEFAULT_MIN_CLIPS: usize = 20;

/// Class-level partition into base and the two novel splits.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassSplit {
    pub base: Vec<String>,
    pub novel_val: Vec<String>,
    pub novel_test: Vec<String>,
}

/// Data partitions. Base classes are further split by clip into
/// train/val/test; novel classes use all their clips in one partition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DataSplit {
    BaseTrain,
    BaseVal,
    BaseTest,
    NovelVal,
    NovelTest,
}

impl DataSplit {
    pub const ALL: [DataSplit; 5] = [
        DataSplit::BaseTrain,
        DataSplit::BaseVal,
        DataSplit::BaseTest,
        DataSplit::NovelVal,
        DataSplit::NovelTest,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DataSplit::BaseTrain => "base-train",
            DataSplit::BaseVal => "base-val",
            DataSplit::BaseTest => "base-test",
            DataSplit::NovelVal => "novel-val",
            DataSplit::NovelTest => "novel-test",
        }
    }
}

impl fmt::Display for DataSplit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DataSplit {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "base" | "base-train" => Ok(DataSplit::BaseTrain),
            "base-val" => Ok(DataSplit::BaseVal),
            "base-test" => Ok(DataSplit::BaseTest),
            "novel-val" => Ok(DataSplit::NovelVal),
            "novel-test" => Ok(DataSplit::NovelTest),
            other => Err(Error::InvalidArgument(format!("unknown split {other:?}"))),
        }
    }
}

/// Class split plus the per-clip assignment of every eligible source clip.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSplit {
    pub seed: u64,
    pub min_clips: usize,
    /// Base clip ratio train:val:test.
    pub base_ratio: [u32; 3],
    pub classes: ClassSplit,
    pub assignments: BTreeMap<String, DataSplit>,
}

/// Entries of one data split grouped by class.
pub type ClassPool<'a> = BTreeMap<String, Vec<&'a ManifestEntry>>;

impl DatasetSplit {
    pub fn pool<'a>(&self, manifest: &'a SourceManifest, which: DataSplit) -> ClassPool<'a> {
        let mut pool: ClassPool<'a> = BTreeMap::new();
        for e in &manifest.entries {
            if self.assignments.get(&e.file_path) == Some(&which) {
                pool.entry(e.class_label.clone()).or_default().push(e);
            }
        }
        pool
    }
}

/// Randomly partitions the eligible classes into `(n_base, n_val, n_test)`.
pub fn partition_classes(
    manifest: &SourceManifest,
    sizes: (usize, usize, usize),
    min_clips: usize,
    rng: &mut Rng,
) -> Result<ClassSplit> {
    let mut eligible: Vec<String> = manifest
        .by_class()
        .into_iter()
        .filter(|(_, v)| v.len() >= min_clips)
        .map(|(k, _)| k.to_string())
        .collect();
    let needed = sizes.0 + sizes.1 + sizes.2;
    if needed > eligible.len() {
        return Err(Error::InsufficientClasses {
            needed,
            available: eligible.len(),
        });
    }
    eligible.shuffle(rng);
    let take = |range: std::ops::Range<usize>| {
        let mut v = eligible[range].to_vec();
        v.sort();
        v
    };
    Ok(ClassSplit {
        base: take(0..sizes.0),
        novel_val: take(sizes.0..sizes.0 + sizes.1),
        novel_test: take(sizes.0 + sizes.1..needed),
    })
}

/// Partitions classes, then assigns each base clip to train/val/test by
/// `base_ratio` within its class.
pub fn split_dataset(
    manifest: &SourceManifest,
    sizes: (usize, usize, usize),
    min_clips: usize,
    base_ratio: [u32; 3],
    seed: u64,
    rng: &mut Rng,
) -> Result<DatasetSplit> {
    let classes = partition_classes(manifest, sizes, min_clips, rng)?;
    let by_class = manifest.by_class();
    let mut assignments = BTreeMap::new();
    let total: u32 = base_ratio.iter().sum();
    if total == 0 {
        return Err(Error::InvalidArgument("base ratio must not be all zero".into()));
    }
    for class in &classes.base {
        let mut clips: Vec<&str> = by_class[class.as_str()].iter().map(|e| e.file_path.as_str()).collect();
        clips.sort();
        clips.shuffle(rng);
        let n = clips.len();
        let mut n_val = (n as f64 * base_ratio[1] as f64 / total as f64).round() as usize;
        let mut n_test = (n as f64 * base_ratio[2] as f64 / total as f64).round() as usize;
        if base_ratio[1] > 0 {
            n_val = n_val.max(1);
        }
        if base_ratio[2] > 0 {
            n_test = n_test.max(1);
        }
        for (i, clip) in clips.into_iter().enumerate() {
            let which = if i < n_test {
                DataSplit::BaseTest
            } else if i < n_test + n_val {
                DataSplit::BaseVal
            } else {
                DataSplit::BaseTrain
            };
            assignments.insert(clip.to_string(), which);
        }
    }
    for (classes, which) in [(&classes.novel_val, DataSplit::NovelVal), (&classes.novel_test, DataSplit::NovelTest)] {
        for class in classes {
            for e in &by_class[class.as_str()] {
                assignments.insert(e.file_path.clone(), which);
            }
        }
    }
    Ok(DatasetSplit {
        seed,
        min_clips,
        base_ratio,
        classes,
        assignments,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use std::path::PathBuf;

    fn manifest(n_classes: usize, per_class: usize) -> SourceManifest {
        let entries = (0..n_classes)
            .flat_map(|c| {
                (0..per_class).map(move |i| ManifestEntry {
                    file_path: format!("c{c:03}/{i}.wav"),
                    class_label: format!("class{c:03}"),
                    duration_s: 1.0,
                })
            })
            .collect();
        SourceManifest {
            root: PathBuf::from("."),
            entries,
        }
    }

    fn disjoint(s: &ClassSplit) -> bool {
        let mut all: Vec<&String> = s.base.iter().chain(&s.novel_val).chain(&s.novel_test).collect();
        let n = all.len();
        all.sort();
        all.dedup();
        all.len() == n
    }

    #[test]
    fn default_sizes() {
        let m = manifest(89, 20);
        let s = partition_classes(&m, (59, 15, 15), DEFAULT_MIN_CLIPS, &mut rng_from_seed(1)).unwrap();
        assert_eq!((s.base.len(), s.novel_val.len(), s.novel_test.len()), (59, 15, 15));
        assert!(disjoint(&s));
    }

    #[test]
    fn small_split_and_determinism() {
        let m = manifest(10, 20);
        let a = partition_classes(&m, (8, 1, 1), DEFAULT_MIN_CLIPS, &mut rng_from_seed(5)).unwrap();
        let b = partition_classes(&m, (8, 1, 1), DEFAULT_MIN_CLIPS, &mut rng_from_seed(5)).unwrap();
        assert_eq!(a, b);
        assert_eq!((a.base.len(), a.novel_val.len(), a.novel_test.len()), (8, 1, 1));
        assert!(disjoint(&a));
    }

    #[test]
    fn insufficient_classes() {
        let m = manifest(5, 20);
        assert!(matches!(
            partition_classes(&m, (59, 15, 15), DEFAULT_MIN_CLIPS, &mut rng_from_seed(1)),
            Err(Error::InsufficientClasses { needed: 89, available: 5 })
        ));
        // classes below the clip minimum are not eligible
        let m = manifest(10, 19);
        assert!(partition_classes(&m, (1, 1, 1), DEFAULT_MIN_CLIPS, &mut rng_from_seed(1)).is_err());
    }

    #[test]
    fn base_clips_follow_ratio() {
        let m = manifest(12, 24);
        let s = split_dataset(&m, (8, 2, 2), 20, [5, 1, 2], 9, &mut rng_from_seed(9)).unwrap();
        let pool = s.pool(&m, DataSplit::BaseTrain);
        assert_eq!(pool.len(), 8);
        assert!(pool.values().all(|v| v.len() == 15));
        assert!(s.pool(&m, DataSplit::BaseVal).values().all(|v| v.len() == 3));
        assert!(s.pool(&m, DataSplit::BaseTest).values().all(|v| v.len() == 6));
        assert!(s.pool(&m, DataSplit::NovelTest).values().all(|v| v.len() == 24));
    }
}
