//! The audio path driven through the library: sources, scenes, clips,
//! embeddings, models and the protocol.

use std::path::Path;

use fsmix_core::clips::extract_clips;
use fsmix_core::embeddings::{featurize, EmbeddingStore};
use fsmix_core::eval::{run_protocol, EvalData, PolyphonyMode, ProtocolConfig, SnrFilter, SupportCriteria};
use fsmix_core::fewshot::{train_base, BaseTrainConfig, Method};
use fsmix_core::audio::MelConfig;
use fsmix_core::rng::rng_from_seed;
use fsmix_core::scene::{
    generate_dataset, read_annotations, split_dataset, write_synthetic_corpus, DataSplit, SceneConfig, INDEX_FILE,
};

fn build(root: &Path) -> Vec<EmbeddingStore> {
    let manifest = write_synthetic_corpus(&root.join("sources"), 18, 10, 5).unwrap();
    let split = split_dataset(&manifest, (8, 5, 5), 5, [5, 1, 2], 6, &mut rng_from_seed(6)).unwrap();
    let cfg = SceneConfig {
        duration_s: 4.0,
        sample_rate: 16000,
        ..SceneConfig::default()
    };
    let plan = [
        (DataSplit::BaseTrain, 24),
        (DataSplit::BaseVal, 6),
        (DataSplit::BaseTest, 6),
        (DataSplit::NovelTest, 30),
    ];
    plan.iter()
        .map(|&(which, n)| {
            let dir = root.join(which.name());
            let summary = generate_dataset(&manifest, &split, which, n, &dir, 7, &cfg).unwrap();
            assert_eq!(summary.written, n);
            let clips: Vec<_> = read_annotations(&dir.join(INDEX_FILE))
                .unwrap()
                .iter()
                .flat_map(extract_clips)
                .collect();
            featurize(&dir, &clips, &MelConfig::default()).unwrap()
        })
        .collect()
}

fn bytes(store: &EmbeddingStore) -> Vec<u8> {
    let mut out = Vec::new();
    store.write_to(&mut out).unwrap();
    out
}

#[test]
fn audio_path_is_reproducible_and_evaluable() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let first = build(a.path());
    let second = build(b.path());
    for (x, y) in first.iter().zip(&second) {
        assert_eq!(bytes(x), bytes(y));
    }
    let [train, val, test, novel]: [EmbeddingStore; 4] = first.try_into().unwrap();
    assert_eq!(train.dim, 128);

    let cfg = BaseTrainConfig {
        center: true,
        max_epochs: 30,
        ..BaseTrainConfig::default()
    };
    let (base, log) = train_base(&train, &val, &cfg, &mut rng_from_seed(8)).unwrap();
    assert_eq!(base.classes.len(), train.classes().len());
    assert!(log.best_val_f >= 0.0);

    let data = EvalData::new(&base, &train, &test, &novel, None, None).unwrap();
    let proto = ProtocolConfig {
        method: Method::Proto,
        criteria: SupportCriteria::new(1, PolyphonyMode::Poly, SnrFilter::Mixed),
        iterations: 3,
        seed: 9,
        ..ProtocolConfig::default()
    };
    let r1 = run_protocol(&base, None, &data, &proto).unwrap();
    let r2 = run_protocol(&base, None, &data, &proto).unwrap();
    assert_eq!(r1, r2);
    assert_eq!(r1.per_iteration.len(), 3);
    assert_eq!(r1.novel_classes.len(), 5);
    for it in &r1.per_iteration {
        assert_eq!(it.support_ids.len(), 5);
        assert!(it.support_ids.iter().all(|s| s.len() == 1));
    }
}
