use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use serde_json::{json, Value};

use fsmix_core::audio::{read_wav, write_wav, MelConfig};
use fsmix_core::clips::{self, clip_audio, read_clip_index, write_clip_index};
use fsmix_core::embeddings::{featurize as embed_clips, load_store, save_store, EmbeddingStore};
use fsmix_core::eval::{run_protocol, write_report, EvalData, EvalReport, ProtocolConfig, SupportCriteria};
use fsmix_core::fewshot::{
    dfsl_train_episodic, load_base, load_generator, save_base, save_generator, train_base as fit_base,
    BaseTrainConfig, EpisodicConfig, LrConfig, Method, WeightGenerator,
};
use fsmix_core::rng::rng_from_seed;
use fsmix_core::scene::{
    generate_dataset, ingest_manifest, read_annotations, split_dataset, write_synthetic_corpus, DataSplit,
    DatasetSplit, SceneConfig, SnrMode, SourceManifest, INDEX_FILE,
};
use fsmix_core::world::{World, WorldConfig};
use fsmix_core::Error as CoreError;

use crate::args::*;
use crate::run_dir::{write_json, RunDir};

const STORE_EXT: &str = "emb";

fn require(path: &Path) -> Result<()> {
    if !path.exists() {
        return Err(CoreError::MissingFile(path.to_path_buf()).into());
    }
    Ok(())
}

fn invalid(msg: impl Into<String>) -> anyhow::Error {
    CoreError::InvalidArgument(msg.into()).into()
}

fn parse_ratio(s: &str) -> Result<[u32; 3]> {
    let parts: Vec<u32> = s
        .split(':')
        .map(|p| p.trim().parse::<u32>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| invalid(format!("base ratio {s:?} is not of the form a:b:c")))?;
    match parts.as_slice() {
        [a, b, c] => Ok([*a, *b, *c]),
        _ => Err(invalid(format!("base ratio {s:?} is not of the form a:b:c"))),
    }
}

fn load(path: &Path) -> Result<EmbeddingStore> {
    require(path)?;
    load_store(path).with_context(|| format!("loading {}", path.display()))
}

pub fn prep_sources(run: &RunDir, a: &PrepSources) -> Result<()> {
    let sources = run.path("sources");
    fs::create_dir_all(&sources)?;
    let mut outputs = Vec::new();
    let manifest_path = if a.synthetic {
        let audio = sources.join("audio");
        write_synthetic_corpus(&audio, a.synthetic_classes, a.synthetic_clips, a.seed)?;
        outputs.push(audio.clone());
        audio.join("manifest.csv")
    } else {
        a.manifest.clone().ok_or_else(|| invalid("--manifest is required without --synthetic"))?
    };
    let ingested = ingest_manifest(&manifest_path).with_context(|| format!("ingesting {}", manifest_path.display()))?;
    for w in &ingested.warnings {
        log::warn!("{w}");
    }
    // Re-root entries so the validated manifest resolves from its own directory.
    let entries = ingested
        .manifest
        .entries
        .iter()
        .map(|e| {
            let resolved = ingested.manifest.resolve(&e.file_path);
            let path = match resolved.strip_prefix(&sources) {
                Ok(rel) => rel.to_path_buf(),
                Err(_) => fs::canonicalize(&resolved)?,
            };
            let mut e = e.clone();
            e.file_path = path.to_string_lossy().replace('\\', "/");
            Ok(e)
        })
        .collect::<Result<Vec<_>>>()?;
    let manifest = SourceManifest {
        root: sources.clone(),
        entries,
    };
    let out_manifest = sources.join("manifest.csv");
    manifest.write_csv(&out_manifest)?;

    let sizes = (a.base_classes, a.novel_val_classes, a.novel_test_classes);
    let ratio = parse_ratio(&a.base_ratio)?;
    let split = split_dataset(&manifest, sizes, a.min_clips, ratio, a.seed, &mut rng_from_seed(a.seed))?;
    let split_path = sources.join("split.json");
    write_json(
        &split_path,
        &json!({ "config": a, "warnings": ingested.warnings, "split": split }),
    )?;
    outputs.extend([out_manifest, split_path]);
    run.record("prep-sources", &outputs)?;
    println!(
        "sources: {} clips, classes base={} novel-val={} novel-test={}",
        manifest.entries.len(),
        split.classes.base.len(),
        split.classes.novel_val.len(),
        split.classes.novel_test.len()
    );
    Ok(())
}

fn read_split(path: &Path) -> Result<DatasetSplit> {
    let doc: Value = serde_json::from_str(&fs::read_to_string(path)?)?;
    let split = doc.get("split").cloned().unwrap_or(doc);
    Ok(serde_json::from_value(split)?)
}

/// Split used when no split file exists: class counts in the 59:15:15
/// proportion of the eligible classes.
fn default_split(manifest: &SourceManifest, seed: u64) -> Result<DatasetSplit> {
    let eligible = manifest
        .by_class()
        .values()
        .filter(|v| v.len() >= fsmix_core::scene::DEFAULT_MIN_CLIPS)
        .count();
    let novel = ((eligible as f64) * 15.0 / 89.0).round() as usize;
    let sizes = (eligible.saturating_sub(2 * novel), novel, novel);
    Ok(split_dataset(
        manifest,
        sizes,
        fsmix_core::scene::DEFAULT_MIN_CLIPS,
        [5, 1, 2],
        seed,
        &mut rng_from_seed(seed),
    )?)
}

pub fn gen_sed(run: &RunDir, a: &GenSed) -> Result<()> {
    let manifest_path = a.manifest.clone().unwrap_or_else(|| run.path("sources/manifest.csv"));
    let manifest = ingest_manifest(&manifest_path)
        .with_context(|| format!("ingesting {}", manifest_path.display()))?
        .manifest;
    let split_path = a.split_file.clone().unwrap_or_else(|| run.path("sources/split.json"));
    let split = if split_path.exists() {
        read_split(&split_path).with_context(|| format!("reading {}", split_path.display()))?
    } else if a.split_file.is_some() {
        require(&split_path)?;
        unreachable!()
    } else {
        log::warn!("no split file; splitting {} with seed {}", manifest_path.display(), a.seed);
        default_split(&manifest, a.seed)?
    };
    let snr_mode = match a.snr_mode.as_str() {
        "discrete" => SnrMode::Discrete,
        "uniform" => SnrMode::Uniform,
        other => bail!(invalid(format!("unknown snr mode {other:?}"))),
    };
    let cfg = SceneConfig {
        duration_s: a.duration,
        sample_rate: a.sample_rate,
        background_rms_dbfs: a.background_dbfs,
        snr_mode,
        ..SceneConfig::default()
    };
    let out = a.out.clone().unwrap_or_else(|| run.path(format!("scenes/{}", a.split)));
    let summary = generate_dataset(&manifest, &split, a.split, a.n, &out, a.seed, &cfg)?;
    write_json(
        &out.join("config.json"),
        &json!({
            "stage": "gen-sed",
            "args": a,
            "scene_config": cfg,
            "written": summary.written,
            "failures": summary.failures,
        }),
    )?;
    run.record("gen-sed", &[out.clone()])?;
    println!("{} scenes written to {}", summary.written, out.display());
    if summary.written == 0 && a.n > 0 {
        bail!(invalid(format!("no scene could be rendered ({} failures)", summary.failures.len())));
    }
    Ok(())
}

pub fn extract_clips(run: &RunDir, a: &ExtractClips) -> Result<()> {
    let index = a.scenes.join(INDEX_FILE);
    require(&index)?;
    let anns = read_annotations(&index)?;
    let clips: Vec<_> = anns.iter().flat_map(clips::extract_clips).collect();
    let out = a.out.clone().unwrap_or_else(|| a.scenes.join("clips.jsonl"));
    if let Some(dir) = out.parent() {
        fs::create_dir_all(dir)?;
    }
    write_clip_index(&out, &clips)?;
    let mut outputs = vec![out.clone()];
    if a.write_audio {
        let dir = out.with_extension("").with_file_name("clips");
        fs::create_dir_all(&dir)?;
        let mut by_scene: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
        for (i, c) in clips.iter().enumerate() {
            by_scene.entry(c.scene_id.as_str()).or_default().push(i);
        }
        by_scene
            .par_iter()
            .map(|(scene, idx)| -> Result<()> {
                let audio = read_wav(&a.scenes.join(format!("{scene}.wav")))?;
                for &i in idx {
                    write_wav(&dir.join(format!("{}.wav", clips[i].id)), &clip_audio(&audio, &clips[i]))?;
                }
                Ok(())
            })
            .collect::<Result<Vec<_>>>()?;
        outputs.push(dir);
    }
    run.record("extract-clips", &outputs)?;
    println!("{} clips from {} scenes -> {}", clips.len(), anns.len(), out.display());
    Ok(())
}

pub fn featurize(run: &RunDir, a: &Featurize) -> Result<()> {
    let clips_path = a.clips.clone().unwrap_or_else(|| a.scenes.join("clips.jsonl"));
    require(&clips_path)?;
    let clips = read_clip_index(&clips_path)?;
    let cfg = MelConfig {
        sample_rate: a.mel_sample_rate,
        n_mels: a.n_mels,
        ..MelConfig::default()
    };
    let mut store = embed_clips(&a.scenes, &clips, &cfg)?;
    store.kind = Some("embeddings".into());
    store.attrs = Some(json!({ "stage": "featurize", "args": a, "mel": cfg }));
    let name = a
        .scenes
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "clips".into());
    let out = a.out.clone().unwrap_or_else(|| run.path(format!("features/{name}.{STORE_EXT}")));
    if let Some(dir) = out.parent() {
        fs::create_dir_all(dir)?;
    }
    save_store(&out, &store)?;
    run.record("featurize", &[out.clone()])?;
    println!("{} embeddings of dim {} -> {}", store.len(), store.dim, out.display());
    Ok(())
}

pub fn train_base(run: &RunDir, a: &TrainBase) -> Result<()> {
    let train = load(&a.train)?;
    let val = load(&a.val)?;
    let cfg = BaseTrainConfig {
        lr: a.lr,
        batch_size: a.batch_size,
        max_epochs: a.epochs,
        patience: a.patience,
        center: match a.center {
            Center::On => true,
            Center::Off => false,
            Center::Auto => {
                let stage = train.attrs.as_ref().and_then(|v| v.get("stage")).and_then(|v| v.as_str());
                stage == Some("featurize")
            }
        },
        ..BaseTrainConfig::default()
    };
    let (clf, log) = fit_base(&train, &val, &cfg, &mut rng_from_seed(a.seed))?;
    let out = a.out.clone().unwrap_or_else(|| run.path("models/base.ckpt"));
    if let Some(dir) = out.parent() {
        fs::create_dir_all(dir)?;
    }
    save_base(&out, &clf, json!({ "stage": "train-base", "args": a, "config": cfg, "log": log }))?;
    run.record("train-base", &[out.clone()])?;
    println!(
        "base classifier: {} classes, best val F {:.4} at epoch {} -> {}",
        clf.n_classes(),
        log.best_val_f,
        log.best_epoch,
        out.display()
    );
    Ok(())
}

fn criteria(c: &CriteriaArgs) -> Result<SupportCriteria> {
    if c.n == 0 {
        bail!(invalid("--n must be at least 1"));
    }
    Ok(SupportCriteria::new(c.n, c.poly, c.snr))
}

pub fn train_dfsl(run: &RunDir, a: &TrainDfsl) -> Result<()> {
    let base_path = a.base.clone().unwrap_or_else(|| run.path("models/base.ckpt"));
    require(&base_path)?;
    let base = load_base(&base_path)?;
    let train = base.prepare(&load(&a.train)?)?;
    let cfg = EpisodicConfig {
        iters: a.iters,
        lr: a.lr,
        criteria: criteria(&a.criteria)?,
        ..EpisodicConfig::default()
    };
    let init = WeightGenerator::init(&base, a.att_on)?;
    let (gen, log) = dfsl_train_episodic(&init, &base, &train, &cfg, &mut rng_from_seed(a.seed))?;
    let window = log.losses.len().min(50);
    let mean = |v: &[f64]| if v.is_empty() { f64::NAN } else { v.iter().sum::<f64>() / v.len() as f64 };
    let first = mean(&log.losses[..window]);
    let last = mean(&log.losses[log.losses.len() - window..]);
    let out = a.out.clone().unwrap_or_else(|| run.path("models/dfsl.ckpt"));
    if let Some(dir) = out.parent() {
        fs::create_dir_all(dir)?;
    }
    save_generator(
        &out,
        &gen,
        &base.classes,
        json!({
            "stage": "train-dfsl",
            "args": a,
            "config": cfg,
            "loss_first": first,
            "loss_last": last,
            "skipped_classes": log.skipped_classes,
        }),
    )?;
    run.record("train-dfsl", &[out.clone()])?;
    println!("generator: episode loss {first:.4} -> {last:.4} over {} episodes -> {}", a.iters, out.display());
    Ok(())
}

fn store_path(dir: &Path, split: DataSplit) -> PathBuf {
    dir.join(format!("{split}.{STORE_EXT}"))
}

pub fn eval(run: &RunDir, a: &Eval) -> Result<()> {
    let features = a.features.clone().unwrap_or_else(|| run.path("features"));
    let base_path = a.base.clone().unwrap_or_else(|| run.path("models/base.ckpt"));
    require(&base_path)?;
    let base = load_base(&base_path)?;
    let generator = if a.method == Method::Dfsl {
        let p = a.generator.clone().unwrap_or_else(|| run.path("models/dfsl.ckpt"));
        require(&p)?;
        Some(load_generator(&p)?)
    } else {
        None
    };
    let optional = |s: DataSplit| -> Result<Option<EmbeddingStore>> {
        let p = store_path(&features, s);
        if p.exists() {
            Ok(Some(load(&p)?))
        } else {
            Ok(None)
        }
    };
    let base_train = load(&store_path(&features, DataSplit::BaseTrain))?;
    let base_test = load(&store_path(&features, DataSplit::BaseTest))?;
    let novel_test = load(&store_path(&features, DataSplit::NovelTest))?;
    let novel_val = optional(DataSplit::NovelVal)?;
    let base_val = optional(DataSplit::BaseVal)?;
    let data = EvalData::new(
        &base,
        &base_train,
        &base_test,
        &novel_test,
        novel_val.as_ref(),
        base_val.as_ref(),
    )?;
    let crit = criteria(&a.criteria)?;
    let cfg = ProtocolConfig {
        method: a.method,
        criteria: crit,
        iterations: a.iters,
        seed: a.seed,
        threshold: a.threshold,
        lr: LrConfig::default(),
        lr_negatives: a.lr_negatives,
        tune_iterations: a.tune_iters,
        ..ProtocolConfig::default()
    };
    let report = run_protocol(&base, generator.as_ref(), &data, &cfg)?;
    let out = a.out.clone().unwrap_or_else(|| {
        run.path(format!(
            "eval/{}_n{}_{}_{}",
            a.method, crit.n, crit.polyphony, crit.snr
        ))
    });
    let written = write_report(&out, &report, &json!({ "stage": "eval", "args": a, "protocol": cfg }))?;
    run.record("eval", &written)?;
    let fmt = |s: Option<fsmix_core::eval::Summary>| s.map_or("n/a".to_string(), |s| format!("{:.4} [{:.4}, {:.4}]", s.mean, s.ci_low, s.ci_high));
    println!("base F {} | novel F {} -> {}", fmt(report.base), fmt(report.novel), out.display());
    Ok(())
}

fn find_reports(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    if !dir.is_dir() {
        return Ok(());
    }
    let mut entries: Vec<PathBuf> = fs::read_dir(dir)?.map(|e| e.map(|e| e.path())).collect::<std::io::Result<_>>()?;
    entries.sort();
    for e in entries {
        if e.is_dir() {
            find_reports(&e, out)?;
        } else if e.file_name().is_some_and(|n| n == "report.json") {
            out.push(e);
        }
    }
    Ok(())
}

pub fn report(run: &RunDir, a: &Report) -> Result<()> {
    let mut inputs = a.inputs.clone();
    if inputs.is_empty() {
        find_reports(&run.path("eval"), &mut inputs)?;
    }
    if inputs.is_empty() {
        return Err(anyhow::Error::from(CoreError::MissingFile(run.path("eval"))).context("no report.json inputs found"));
    }
    let mut rows = Vec::new();
    for p in &inputs {
        require(p)?;
        let doc: Value = serde_json::from_str(&fs::read_to_string(p)?).with_context(|| format!("parsing {}", p.display()))?;
        let r: EvalReport = serde_json::from_value(doc.get("report").cloned().unwrap_or(Value::Null))
            .with_context(|| format!("{} is not an evaluation report", p.display()))?;
        rows.push((p.clone(), r));
    }
    let out = a.out.clone().unwrap_or_else(|| run.path("report"));
    fs::create_dir_all(&out)?;
    let csv_path = out.join("comparison.csv");
    let opt = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x:.6}"));
    let mut text = String::from(
        "source,method,n,polyphony,snr,iterations,seed,base_f,base_ci_low,base_ci_high,novel_f,novel_ci_low,novel_ci_high,f_p1,f_p2,f_p3,f_p4plus,recall_m5,recall_0,recall_5,recall_10,recall_15,recall_20\n",
    );
    for (p, r) in &rows {
        let mut cells = vec![
            p.to_string_lossy().into_owned(),
            r.method.to_string(),
            r.criteria.n.to_string(),
            r.criteria.polyphony.to_string(),
            r.criteria.snr.to_string(),
            r.iterations.to_string(),
            r.seed.to_string(),
        ];
        for s in [r.base, r.novel] {
            cells.push(opt(s.map(|s| s.mean)));
            cells.push(opt(s.map(|s| s.ci_low)));
            cells.push(opt(s.map(|s| s.ci_high)));
        }
        cells.extend(r.polyphony_f.iter().map(|b| opt(b.value.map(|s| s.mean))));
        cells.extend(r.snr_recall.iter().map(|b| opt(b.value.map(|s| s.mean))));
        text.push_str(&cells.join(","));
        text.push('\n');
    }
    fs::write(&csv_path, text)?;
    let json_path = out.join("comparison.json");
    write_json(
        &json_path,
        &json!({
            "stage": "report",
            "args": a,
            "runs": rows.iter().map(|(p, r)| json!({
                "source": p,
                "method": r.method,
                "criteria": r.criteria,
                "seed": r.seed,
                "base": r.base,
                "novel": r.novel,
            })).collect::<Vec<_>>(),
        }),
    )?;
    let svg_path = out.join("comparison.svg");
    fs::write(&svg_path, comparison_svg(&rows))?;
    run.record("report", &[csv_path.clone(), json_path, svg_path])?;
    println!("{} reports -> {}", rows.len(), csv_path.display());
    Ok(())
}

fn comparison_svg(rows: &[(PathBuf, EvalReport)]) -> String {
    use std::fmt::Write as _;
    let (pad, group_w, h) = (40.0, 90.0, 280.0);
    let w = pad * 2.0 + group_w * rows.len() as f64;
    let plot_h = h - 2.0 * pad - 20.0;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="10">"#
    );
    let _ = writeln!(s, r#"<text x="{pad}" y="18">Mean F: base (grey) and novel (blue)</text>"#);
    for (i, (_, r)) in rows.iter().enumerate() {
        let x0 = pad + group_w * i as f64;
        for (j, (v, color)) in [(r.base, "#999999"), (r.novel, "#4c72b0")].iter().enumerate() {
            if let Some(v) = v {
                let bh = v.mean.clamp(0.0, 1.0) * plot_h;
                let _ = writeln!(
                    s,
                    r#"<rect x="{x:.1}" y="{y:.2}" width="30" height="{bh:.2}" fill="{color}"/>"#,
                    x = x0 + 10.0 + 32.0 * j as f64,
                    y = h - pad - 20.0 - bh
                );
            }
        }
        let _ = writeln!(
            s,
            r#"<text x="{x0:.1}" y="{y}">{} n={} {}/{}</text>"#,
            r.method,
            r.criteria.n,
            r.criteria.polyphony,
            r.criteria.snr,
            y = h - pad
        );
    }
    s.push_str("</svg>\n");
    s
}

pub fn synth_world(run: &RunDir, a: &SynthWorld) -> Result<()> {
    if !(a.size > 0.0) {
        bail!(invalid("--size must be positive"));
    }
    let mut cfg = if a.noiseless { WorldConfig::noiseless() } else { WorldConfig::default() };
    cfg.dim = a.dim;
    cfg.n_base = a.n_base;
    cfg.n_novel_val = a.n_novel;
    cfg.n_novel_test = a.n_novel;
    for v in cfg.clips.values_mut() {
        *v = ((*v as f64) * a.size).round().max(1.0) as usize;
    }
    let world = World::new(cfg.clone(), a.seed)?;
    let out = a.out.clone().unwrap_or_else(|| run.path("features"));
    fs::create_dir_all(&out)?;
    let mut outputs = Vec::new();
    for split in DataSplit::ALL {
        let n = cfg.clips.get(&split).copied().unwrap_or(0);
        let mut store = world.sample_store(split, n)?;
        store.attrs = Some(json!({ "stage": "synth-world", "args": a, "world": cfg, "split": split }));
        let p = store_path(&out, split);
        save_store(&p, &store)?;
        outputs.push(p);
    }
    let meta = out.join("world.json");
    write_json(
        &meta,
        &json!({ "stage": "synth-world", "args": a, "world": cfg, "seed": a.seed, "classes": world.classes }),
    )?;
    outputs.push(meta);
    run.record("synth-world", &outputs)?;
    println!("synthetic world (seed {}) -> {}", a.seed, out.display());
    Ok(())
}
