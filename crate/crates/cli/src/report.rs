//! Files written by each verb.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use autosmote::metrics::{average_rank, RankTable, ScoreTable};
use serde::Serialize;

use crate::runner::{RunRecord, Stat};

pub const METRICS: [&str; 3] = ["precision", "recall", "f1"];

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// Directory name for one record, e.g. `glass/autosmote-self` or `glass/autosmote-self-no-dc2`.
pub fn record_dir(record: &RunRecord) -> String {
    let mut name = format!("{}/{}", record.dataset, record.method);
    let a = record.ablation;
    for (off, tag) in [
        (a.without_participation, "dc1"),
        (a.without_neighbor_count, "dc2"),
        (a.without_aggregator, "dc3"),
    ] {
        if off {
            name.push_str("-no-");
            name.push_str(tag);
        }
    }
    name
}

/// `run.json` with timing and `metrics.json` without it.
pub fn write_record(out: &Path, record: &RunRecord) -> Result<()> {
    let dir = out.join(record_dir(record));
    write_json(&dir.join("run.json"), record)?;
    write_json(&dir.join("metrics.json"), &record.without_timing())
}

fn mean_std(s: &Stat) -> String {
    format!("{:.6},{:.6}", s.mean, s.std)
}

/// One row per record with mean and std of each metric, in percent-free units.
pub fn summary_csv(records: &[RunRecord]) -> String {
    let mut out = String::from(
        "dataset,method,ablation,selected,precision_mean,precision_std,recall_mean,recall_std,f1_mean,f1_std,accuracy_mean,accuracy_std,missing\n",
    );
    for r in records {
        let ablation = record_dir(r).rsplit_once('/').map_or(String::new(), |(_, m)| {
            m.strip_prefix(r.method.name()).unwrap_or("").trim_start_matches('-').to_string()
        });
        let selected = r.selected.map_or_else(String::new, |h| h.to_string());
        let stats = match &r.summary {
            Some(s) => [&s.precision, &s.recall, &s.f1, &s.accuracy].map(mean_std).join(","),
            None => vec![","; 4].join(","),
        };
        let missing = r.missing.as_deref().unwrap_or("").replace([',', '\n'], ";");
        let _ = writeln!(out, "{},{},{},\"{}\",{},{}", r.dataset, r.method, ablation, selected, stats, missing);
    }
    out
}

/// Mean per-epoch curves across seeds, one row per (method, epoch).
pub fn curves_csv(records: &[RunRecord]) -> String {
    let mut out = String::from("dataset,method,epoch,train_loss,train_error,test_f1\n");
    for r in records {
        if r.seeds.is_empty() {
            continue;
        }
        let epochs = r.seeds[0].train_error.len();
        let n = r.seeds.len() as f64;
        for e in 0..epochs {
            let avg = |f: fn(&crate::runner::SeedRecord) -> &Vec<f64>| r.seeds.iter().map(|s| f(s)[e]).sum::<f64>() / n;
            let _ = writeln!(
                out,
                "{},{},{},{:.6},{:.6},{:.6}",
                r.dataset,
                r.method,
                e + 1,
                avg(|s| &s.train_loss),
                avg(|s| &s.train_error),
                avg(|s| &s.test_f1)
            );
        }
    }
    out
}

pub fn timing_csv(records: &[RunRecord], epochs: usize) -> String {
    let mut out = String::from("dataset,method,epochs,seconds_mean,seconds_std,skipped\n");
    for r in records {
        match &r.timing {
            Some(t) => {
                let s = Stat::of(&t.seconds_per_seed);
                let _ = writeln!(out, "{},{},{},{:.6},{:.6},", r.dataset, r.method, epochs, s.mean, s.std);
            }
            None => {
                let why = r.missing.as_deref().unwrap_or("no timing").replace([',', '\n'], ";");
                let _ = writeln!(out, "{},{},{},,,{}", r.dataset, r.method, epochs, why);
            }
        }
    }
    out
}

/// Method × dataset score table for precision, recall and F1.
pub fn score_table(records: &[RunRecord]) -> ScoreTable {
    let mut methods: Vec<String> = Vec::new();
    let mut datasets: Vec<String> = Vec::new();
    for r in records {
        if !methods.contains(&r.method.to_string()) {
            methods.push(r.method.to_string());
        }
        if !datasets.contains(&r.dataset) {
            datasets.push(r.dataset.clone());
        }
    }
    let mut scores = vec![vec![vec![None; methods.len()]; datasets.len()]; METRICS.len()];
    for r in records {
        let (Some(s), Some(d), Some(m)) = (
            &r.summary,
            datasets.iter().position(|d| *d == r.dataset),
            methods.iter().position(|m| *m == r.method.name()),
        ) else {
            continue;
        };
        for (i, stat) in [s.precision, s.recall, s.f1].iter().enumerate() {
            scores[i][d][m] = Some(stat.mean);
        }
    }
    ScoreTable {
        methods,
        datasets,
        metrics: METRICS.iter().map(|s| s.to_string()).collect(),
        scores,
    }
}

pub fn ranking(records: &[RunRecord]) -> Result<RankTable> {
    Ok(average_rank(&score_table(records))?)
}

/// Average rank per metric plus the overall rank, one row per method.
pub fn ranking_csv(table: &RankTable) -> String {
    let mut out = String::from("method");
    for m in &table.metrics {
        let _ = write!(out, ",{m}_rank");
    }
    out.push_str(",overall\n");
    for (j, method) in table.methods.iter().enumerate() {
        out.push_str(method);
        for per_metric in &table.average {
            let _ = write!(out, ",{:.4}", per_metric[j]);
        }
        let _ = writeln!(out, ",{:.4}", table.overall[j]);
    }
    out
}

/// Baseline against each removed criterion, with per-seed F1 and the win count.
#[derive(Debug, Clone, Serialize)]
pub struct AblationRow {
    pub variant: String,
    pub f1_mean: Option<f64>,
    pub f1_std: Option<f64>,
    pub f1_per_seed: Vec<f64>,
    /// Seeds where the baseline beats this variant.
    pub baseline_wins: Option<usize>,
}

pub fn ablation_rows(baseline: &RunRecord, variants: &[(String, RunRecord)]) -> Vec<AblationRow> {
    let base = baseline.f1_per_seed();
    let row = |name: &str, r: &RunRecord, wins: Option<usize>| AblationRow {
        variant: name.to_string(),
        f1_mean: r.summary.as_ref().map(|s| s.f1.mean),
        f1_std: r.summary.as_ref().map(|s| s.f1.std),
        f1_per_seed: r.f1_per_seed(),
        baseline_wins: wins,
    };
    let mut rows = vec![row("baseline", baseline, None)];
    for (name, r) in variants {
        let f = r.f1_per_seed();
        let wins = (f.len() == base.len()).then(|| base.iter().zip(&f).filter(|(b, v)| b > v).count());
        rows.push(row(name, r, wins));
    }
    rows
}

pub fn ablation_csv(dataset: &str, method: &str, rows: &[AblationRow]) -> String {
    let mut out = String::from("dataset,method,variant,f1_mean,f1_std,baseline_wins,seeds\n");
    let opt = |v: Option<f64>| v.map_or_else(String::new, |x| format!("{x:.6}"));
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            dataset,
            method,
            r.variant,
            opt(r.f1_mean),
            opt(r.f1_std),
            r.baseline_wins.map_or_else(String::new, |w| w.to_string()),
            r.f1_per_seed.len()
        );
    }
    out
}
