use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::fewshot::Method;
use crate::scene::SNR_LEVELS_DB;

use super::breakdown::POLYPHONY_CAP;
use super::criteria::SupportCriteria;
use super::protocol::{EvalData, IterationResult, ProtocolConfig};

/// Mean with a 95% percentile interval across iterations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassSummary {
    pub class: String,
    pub novel: bool,
    pub mean_f: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BucketSummary {
    pub bucket: String,
    /// `None` when no iteration populated the bucket.
    pub value: Option<Summary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub method: Method,
    pub criteria: SupportCriteria,
    pub iterations: usize,
    pub seed: u64,
    pub threshold: f64,
    pub lr_negatives: Option<usize>,
    pub lr_tuning: Option<Vec<(usize, f64)>>,
    pub base_classes: Vec<String>,
    pub novel_classes: Vec<String>,
    pub n_test_base_clips: usize,
    pub n_test_novel_clips: usize,
    pub polyphony_cap: usize,
    pub base: Option<Summary>,
    pub novel: Option<Summary>,
    pub classes: Vec<ClassSummary>,
    pub polyphony_f: Vec<BucketSummary>,
    pub snr_recall: Vec<BucketSummary>,
    pub per_iteration: Vec<IterationResult>,
}

/// Linear-interpolated percentile (`q` in 0..=100) of unsorted values.
pub fn percentile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    if v.len() == 1 {
        return v[0];
    }
    let pos = q / 100.0 * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
}

fn summary(values: impl Iterator<Item = Option<f64>>) -> Option<Summary> {
    let v: Vec<f64> = values.flatten().collect();
    if v.is_empty() {
        return None;
    }
    Some(Summary {
        mean: v.iter().sum::<f64>() / v.len() as f64,
        ci_low: percentile(&v, 2.5),
        ci_high: percentile(&v, 97.5),
        n: v.len(),
    })
}

pub fn summarize(
    cfg: &ProtocolConfig,
    data: &EvalData,
    results: Vec<IterationResult>,
    lr_tuning: Option<Vec<(usize, f64)>>,
) -> EvalReport {
    let pool = &data.test;
    let nb = pool.n_base_classes;
    let classes = pool
        .set
        .classes
        .iter()
        .enumerate()
        .map(|(k, c)| ClassSummary {
            class: c.clone(),
            novel: k >= nb,
            mean_f: summary(results.iter().map(|r| r.class_f[k])).map(|s| s.mean),
        })
        .collect();
    let polyphony_f = (0..POLYPHONY_CAP)
        .map(|b| BucketSummary {
            bucket: if b + 1 == POLYPHONY_CAP {
                format!("{}+", b + 1)
            } else {
                (b + 1).to_string()
            },
            value: summary(results.iter().map(|r| r.breakdown.polyphony_f[b])),
        })
        .collect();
    let snr_recall = SNR_LEVELS_DB
        .iter()
        .enumerate()
        .map(|(i, db)| BucketSummary {
            bucket: format!("{db}"),
            value: summary(results.iter().map(|r| r.breakdown.snr_recall[i])),
        })
        .collect();
    EvalReport {
        method: cfg.method,
        criteria: cfg.criteria,
        iterations: cfg.iterations,
        seed: cfg.seed,
        threshold: cfg.threshold,
        lr_negatives: if cfg.method == crate::fewshot::Method::Lr {
            cfg.lr_negatives
        } else {
            None
        },
        lr_tuning,
        base_classes: pool.set.classes[..nb].to_vec(),
        novel_classes: pool.set.classes[nb..].to_vec(),
        n_test_base_clips: pool.novel_rows.start,
        n_test_novel_clips: pool.novel_rows.len(),
        polyphony_cap: POLYPHONY_CAP,
        base: summary(results.iter().map(|r| r.base_mean_f)),
        novel: summary(results.iter().map(|r| r.novel_mean_f)),
        classes,
        polyphony_f,
        snr_recall,
        per_iteration: results,
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| format!("{x:.6}"))
}

fn bucket_csv(path: &Path, key: &str, rows: &[BucketSummary]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([key, "mean", "ci_low", "ci_high", "n"])?;
    for b in rows {
        let v = b.value;
        w.write_record([
            b.bucket.clone(),
            fmt_opt(v.map(|s| s.mean)),
            fmt_opt(v.map(|s| s.ci_low)),
            fmt_opt(v.map(|s| s.ci_high)),
            v.map_or(String::new(), |s| s.n.to_string()),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn bar_svg(title: &str, rows: &[(String, Option<Summary>)]) -> String {
    let (w, h, pad) = (80.0 * rows.len() as f64 + 80.0, 260.0, 40.0);
    let plot_h = h - 2.0 * pad;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<text x="{pad}" y="20">{title}</text>"#);
    let _ = writeln!(
        s,
        r#"<line x1="{pad}" y1="{y}" x2="{x2}" y2="{y}" stroke="black"/>"#,
        y = h - pad,
        x2 = w - pad / 2.0
    );
    for (i, (label, v)) in rows.iter().enumerate() {
        let x = pad + 10.0 + 80.0 * i as f64;
        if let Some(v) = v {
            let bh = v.mean.clamp(0.0, 1.0) * plot_h;
            let _ = writeln!(
                s,
                r##"<rect x="{x}" y="{y:.2}" width="50" height="{bh:.2}" fill="#4c72b0"/>"##,
                y = h - pad - bh
            );
            let (lo, hi) = (h - pad - v.ci_low * plot_h, h - pad - v.ci_high * plot_h);
            let _ = writeln!(
                s,
                r#"<line x1="{cx}" y1="{lo:.2}" x2="{cx}" y2="{hi:.2}" stroke="black"/>"#,
                cx = x + 25.0
            );
            let _ = writeln!(s, r#"<text x="{x}" y="{ty:.2}">{m:.3}</text>"#, ty = h - pad - bh - 4.0, m = v.mean);
        }
        let _ = writeln!(s, r#"<text x="{x}" y="{ty}">{label}</text>"#, ty = h - pad + 14.0);
    }
    s.push_str("</svg>\n");
    s
}

/// Writes `report.json`, per-table CSVs and SVG bar charts into `dir`;
/// returns the written paths.
pub fn write_report(dir: &Path, report: &EvalReport, config: &serde_json::Value) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let json = dir.join("report.json");
    let doc = serde_json::json!({ "config": config, "report": report });
    fs::write(&json, serde_json::to_string_pretty(&doc)? + "\n")?;
    written.push(json);

    let summary_csv = dir.join("summary.csv");
    let mut w = csv::Writer::from_path(&summary_csv)?;
    w.write_record(["group", "mean", "ci_low", "ci_high", "n"])?;
    for (name, s) in [("base", report.base), ("novel", report.novel)] {
        w.write_record([
            name.to_string(),
            fmt_opt(s.map(|v| v.mean)),
            fmt_opt(s.map(|v| v.ci_low)),
            fmt_opt(s.map(|v| v.ci_high)),
            s.map_or(String::new(), |v| v.n.to_string()),
        ])?;
    }
    w.flush()?;
    written.push(summary_csv);

    let classes_csv = dir.join("classes.csv");
    let mut w = csv::Writer::from_path(&classes_csv)?;
    w.write_record(["class", "split", "mean_f"])?;
    for c in &report.classes {
        w.write_record([c.class.as_str(), if c.novel { "novel" } else { "base" }, &fmt_opt(c.mean_f)])?;
    }
    w.flush()?;
    written.push(classes_csv);

    let poly = dir.join("polyphony.csv");
    bucket_csv(&poly, "polyphony", &report.polyphony_f)?;
    written.push(poly);
    let snr = dir.join("snr.csv");
    bucket_csv(&snr, "snr_db", &report.snr_recall)?;
    written.push(snr);

    let plots: [(&str, &str, Vec<(String, Option<Summary>)>); 3] = [
        (
            "summary.svg",
            "Mean per-class F",
            vec![("base".into(), report.base), ("novel".into(), report.novel)],
        ),
        (
            "polyphony.svg",
            "Novel F by test polyphony",
            report.polyphony_f.iter().map(|b| (b.bucket.clone(), b.value)).collect(),
        ),
        (
            "snr.svg",
            "Novel recall by test SNR (dB)",
            report.snr_recall.iter().map(|b| (b.bucket.clone(), b.value)).collect(),
        ),
    ];
    for (name, title, rows) in plots {
        let p = dir.join(name);
        fs::write(&p, bar_svg(title, &rows))?;
        written.push(p);
    }
    Ok(written)
}
