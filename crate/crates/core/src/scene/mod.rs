//! Scene synthesis: source manifests, class splits, scene recipes, rendering
//! and dataset generation.

mod dataset;
mod manifest;
mod render;
mod soundscape;
mod split;
mod synth_sources;

pub use dataset::{generate_dataset, read_annotations, scene_id, DatasetSummary, INDEX_FILE};
pub use manifest::{ingest_manifest, Ingested, ManifestEntry, SourceManifest, MAX_SOURCE_DURATION_S};
pub use render::{
    prepare_event, render, render_stems, AnnotatedEvent, BackgroundInfo, EventStem, RenderedScene, SceneAnnotation,
    TRIM_MIN_DUR_S, TRIM_THRESHOLD,
};
pub use soundscape::{
    class_count_pmf, sample_class_count, sample_spec, sample_spec_with_count, EventPlacement, SceneConfig, SnrMode,
    SoundscapeSpec, MAX_CLASSES_PER_SCENE, SNR_LEVELS_DB,
};
pub use split::{partition_classes, split_dataset, ClassPool, ClassSplit, DataSplit, DatasetSplit, DEFAULT_MIN_CLIPS};
pub use synth_sources::{write_synthetic_corpus, SYNTH_SAMPLE_RATE};
