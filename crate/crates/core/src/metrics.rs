//! Precision, recall and F1, plus cross-method average ranks.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub tp: Vec<usize>,
    pub fp: Vec<usize>,
    pub fn_: Vec<usize>,
    pub precision: Vec<f64>,
    pub recall: Vec<f64>,
    pub f1: Vec<f64>,
    /// Classes that occur in the truth or the predictions; the macro means run over these.
    pub present: Vec<bool>,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub accuracy: f64,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn harmonic(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

impl MetricsReport {
    /// One-vs-rest counts for each of `n_classes` classes.
    pub fn compute(preds: &[usize], truth: &[usize], n_classes: usize) -> Result<Self> {
        if preds.len() != truth.len() {
            return Err(Error::LengthMismatch(preds.len(), truth.len()));
        }
        if let Some(&bad) = preds.iter().chain(truth).find(|&&c| c >= n_classes) {
            return Err(Error::Config(format!("class index {bad} out of range for {n_classes} classes")));
        }
        let mut tp = vec![0; n_classes];
        let mut fp = vec![0; n_classes];
        let mut fn_ = vec![0; n_classes];
        for (&p, &t) in preds.iter().zip(truth) {
            if p == t {
                tp[p] += 1;
            } else {
                fp[p] += 1;
                fn_[t] += 1;
            }
        }
        let precision: Vec<f64> = (0..n_classes).map(|c| ratio(tp[c], tp[c] + fp[c])).collect();
        let recall: Vec<f64> = (0..n_classes).map(|c| ratio(tp[c], tp[c] + fn_[c])).collect();
        let f1: Vec<f64> = precision.iter().zip(&recall).map(|(&p, &r)| harmonic(p, r)).collect();
        let present: Vec<bool> = (0..n_classes).map(|c| tp[c] + fp[c] + fn_[c] > 0).collect();
        let n_present = present.iter().filter(|&&p| p).count();
        let mean = |v: &[f64]| {
            if n_present == 0 {
                0.0
            } else {
                v.iter().zip(&present).filter(|(_, &p)| p).map(|(x, _)| x).sum::<f64>() / n_present as f64
            }
        };
        Ok(Self {
            macro_precision: mean(&precision),
            macro_recall: mean(&recall),
            macro_f1: mean(&f1),
            accuracy: ratio(tp.iter().sum(), truth.len()),
            tp,
            fp,
            fn_,
            precision,
            recall,
            f1,
            present,
        })
    }
}

/// Midranks, 1 = highest score; missing entries share the bottom ranks.
pub fn midranks(scores: &[Option<f64>]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    let key = |i: usize| scores[i].unwrap_or(f64::NEG_INFINITY);
    order.sort_by(|&a, &b| key(b).total_cmp(&key(a)));
    let mut ranks = vec![0.0; scores.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && scores[order[end]] == scores[order[start]] {
            end += 1;
        }
        // positions start+1 ..= end share their mean
        let rank = (start + 1 + end) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = rank;
        }
        start = end;
    }
    ranks
}

/// Scores indexed `[metric][dataset][method]`; higher is better.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreTable {
    pub methods: Vec<String>,
    pub datasets: Vec<String>,
    pub metrics: Vec<String>,
    pub scores: Vec<Vec<Vec<Option<f64>>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankTable {
    pub methods: Vec<String>,
    pub metrics: Vec<String>,
    /// `[metric][dataset][method]`
    pub per_dataset: Vec<Vec<Vec<f64>>>,
    /// `[metric][method]`, averaged over datasets.
    pub average: Vec<Vec<f64>>,
    /// Mean of the per-metric averages, per method.
    pub overall: Vec<f64>,
}

pub fn average_rank(table: &ScoreTable) -> Result<RankTable> {
    let m = table.methods.len();
    if m == 0 || table.datasets.is_empty() || table.metrics.is_empty() {
        return Err(Error::EmptyTable);
    }
    let shape_ok = table.scores.len() == table.metrics.len()
        && table
            .scores
            .iter()
            .all(|by_ds| by_ds.len() == table.datasets.len() && by_ds.iter().all(|row| row.len() == m));
    if !shape_ok {
        return Err(Error::Config("score table shape does not match its labels".into()));
    }
    let per_dataset: Vec<Vec<Vec<f64>>> = table
        .scores
        .iter()
        .map(|by_ds| by_ds.iter().map(|row| midranks(row)).collect())
        .collect();
    let n_ds = table.datasets.len() as f64;
    let average: Vec<Vec<f64>> = per_dataset
        .iter()
        .map(|by_ds| (0..m).map(|j| by_ds.iter().map(|r| r[j]).sum::<f64>() / n_ds).collect())
        .collect();
    let n_metrics = average.len() as f64;
    let overall = (0..m).map(|j| average.iter().map(|a| a[j]).sum::<f64>() / n_metrics).collect();
    Ok(RankTable {
        methods: table.methods.clone(),
        metrics: table.metrics.clone(),
        per_dataset,
        average,
        overall,
    })
}
