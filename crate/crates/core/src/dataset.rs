//! Tabular data: CSV ingestion, imputation and scaling, stratified splits.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gradcore::Matrix;

/// Feature matrix with integer class labels.
///
/// Missing cells are stored as `NaN` until [`impute_and_normalize`] runs.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: Matrix,
    pub labels: Vec<usize>,
    pub class_counts: Vec<usize>,
    pub feature_names: Vec<String>,
    pub label_names: Vec<String>,
    /// Row index of each row in the file it was loaded from.
    pub source_rows: Vec<usize>,
}

impl Dataset {
    pub fn new(
        features: Matrix,
        labels: Vec<usize>,
        feature_names: Vec<String>,
        label_names: Vec<String>,
    ) -> Result<Self> {
        let source_rows = (0..labels.len()).collect();
        Self::with_sources(features, labels, feature_names, label_names, source_rows)
    }

    pub fn with_sources(
        features: Matrix,
        labels: Vec<usize>,
        feature_names: Vec<String>,
        label_names: Vec<String>,
        source_rows: Vec<usize>,
    ) -> Result<Self> {
        if labels.len() != features.rows() {
            return Err(Error::LengthMismatch(features.rows(), labels.len()));
        }
        if source_rows.len() != labels.len() {
            return Err(Error::LengthMismatch(source_rows.len(), labels.len()));
        }
        if feature_names.len() != features.cols() {
            return Err(Error::DimensionMismatch(feature_names.len(), features.cols()));
        }
        let n_classes = label_names.len();
        let mut class_counts = vec![0; n_classes];
        for &y in &labels {
            if y >= n_classes {
                return Err(Error::Config(format!("label {y} outside 0..{n_classes}")));
            }
            class_counts[y] += 1;
        }
        Ok(Self {
            features,
            labels,
            class_counts,
            feature_names,
            label_names,
            source_rows,
        })
    }

    /// Builds a dataset with generated names; handy for fixtures.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R], labels: Vec<usize>, n_classes: usize) -> Result<Self> {
        let features = Matrix::from_rows(rows)?;
        let feature_names = (0..features.cols()).map(|i| format!("x{i}")).collect();
        let label_names = (0..n_classes).map(|c| c.to_string()).collect();
        Self::new(features, labels, feature_names, label_names)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.features.cols()
    }

    pub fn n_classes(&self) -> usize {
        self.label_names.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.features.row(i)
    }

    /// Row indices belonging to class `c`, ascending.
    pub fn class_rows(&self, c: usize) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter(|(_, &y)| y == c)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn majority_count(&self) -> usize {
        self.class_counts.iter().copied().max().unwrap_or(0)
    }

    pub fn has_missing(&self) -> bool {
        self.features.data().iter().any(|v| v.is_nan())
    }

    /// Copies the listed rows, keeping names and the class count.
    pub fn subset(&self, rows: &[usize]) -> Result<Self> {
        let features = self.features.select_rows(rows)?;
        let labels = rows.iter().map(|&i| self.labels[i]).collect();
        let sources = rows.iter().map(|&i| self.source_rows[i]).collect();
        Self::with_sources(
            features,
            labels,
            self.feature_names.clone(),
            self.label_names.clone(),
            sources,
        )
    }

    /// Appends rows; appended rows get `usize::MAX` as their source index.
    pub fn extend(&self, rows: &[Vec<f64>], labels: &[usize]) -> Result<Self> {
        if rows.is_empty() {
            return Ok(self.clone());
        }
        let f = self.n_features();
        let mut data = self.features.data().to_vec();
        for r in rows {
            if r.len() != f {
                return Err(Error::DimensionMismatch(r.len(), f));
            }
            data.extend_from_slice(r);
        }
        let features = Matrix::new(self.len() + rows.len(), f, data)?;
        let mut all_labels = self.labels.clone();
        all_labels.extend_from_slice(labels);
        let mut sources = self.source_rows.clone();
        sources.extend(std::iter::repeat_n(usize::MAX, rows.len()));
        Self::with_sources(
            features,
            all_labels,
            self.feature_names.clone(),
            self.label_names.clone(),
            sources,
        )
    }
}

/// Reads a headed CSV. Non-label columns must be numeric; empty cells are missing.
pub fn load_csv(path: impl AsRef<Path>, label_column: &str) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_csv(file, label_column)
}

pub fn read_csv<R: std::io::Read>(reader: R, label_column: &str) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let label_idx = header
        .iter()
        .position(|h| h == label_column)
        .ok_or_else(|| Error::MissingLabelColumn(label_column.to_string()))?;
    let feature_names: Vec<String> = header
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != label_idx)
        .map(|(_, h)| h.clone())
        .collect();

    let mut data = Vec::new();
    let mut labels = Vec::new();
    let mut label_names: Vec<String> = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        for (i, cell) in rec.iter().enumerate() {
            if i == label_idx {
                let y = match label_names.iter().position(|l| l == cell) {
                    Some(y) => y,
                    None => {
                        label_names.push(cell.to_string());
                        label_names.len() - 1
                    }
                };
                labels.push(y);
            } else if cell.is_empty() {
                data.push(f64::NAN);
            } else {
                let v: f64 = cell.parse().map_err(|_| Error::NonNumericColumn {
                    column: header[i].clone(),
                    row: row + 1,
                    value: cell.to_string(),
                })?;
                data.push(v);
            }
        }
    }
    let features = Matrix::new(labels.len(), feature_names.len(), data)?;
    Dataset::new(features, labels, feature_names, label_names)
}

/// Per-feature training statistics for imputation and min-max scaling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
    pub mean: Vec<f64>,
}

impl NormStats {
    /// Statistics over the non-missing cells of `d`.
    pub fn fit(d: &Dataset) -> Self {
        let f = d.n_features();
        let mut min = vec![f64::INFINITY; f];
        let mut max = vec![f64::NEG_INFINITY; f];
        let mut sum = vec![0.0; f];
        let mut seen = vec![0usize; f];
        for r in 0..d.len() {
            for (j, &v) in d.row(r).iter().enumerate() {
                if v.is_nan() {
                    continue;
                }
                min[j] = min[j].min(v);
                max[j] = max[j].max(v);
                sum[j] += v;
                seen[j] += 1;
            }
        }
        let mean: Vec<f64> = sum
            .iter()
            .zip(&seen)
            .map(|(s, &n)| if n > 0 { s / n as f64 } else { 0.0 })
            .collect();
        for j in 0..f {
            if seen[j] == 0 {
                min[j] = 0.0;
                max[j] = 0.0;
            }
        }
        Self { min, max, mean }
    }

    /// Imputes with the mean, scales to `[0, 1]` and clamps. Constant features map to 0.
    pub fn apply(&self, d: &Dataset) -> Result<Dataset> {
        if self.min.len() != d.n_features() {
            return Err(Error::DimensionMismatch(self.min.len(), d.n_features()));
        }
        let mut out = d.clone();
        let f = d.n_features();
        for (i, v) in out.features.data_mut().iter_mut().enumerate() {
            let j = i % f;
            let raw = if v.is_nan() { self.mean[j] } else { *v };
            let span = self.max[j] - self.min[j];
            *v = if span > 0.0 {
                ((raw - self.min[j]) / span).clamp(0.0, 1.0)
            } else {
                0.0
            };
        }
        Ok(out)
    }
}

/// Fits statistics on `d` when `stats` is `None` (i.e. `d` is the training
/// split) and applies them.
pub fn impute_and_normalize(d: &Dataset, stats: Option<&NormStats>) -> Result<(Dataset, NormStats)> {
    let stats = match stats {
        Some(s) => s.clone(),
        None => NormStats::fit(d),
    };
    let out = stats.apply(d)?;
    Ok((out, stats))
}

/// Train/test partition of one dataset.
#[derive(Debug, Clone)]
pub struct SplitPair {
    pub train: Dataset,
    pub test: Dataset,
    pub seed: u64,
    pub ratio: f64,
    /// Source-dataset row indices of each split, ascending.
    pub train_rows: Vec<usize>,
    pub test_rows: Vec<usize>,
}

/// Per-class shuffled split; each class sends `ceil(ratio · count)` rows to train.
pub fn stratified_split(d: &Dataset, ratio: f64, seed: u64) -> Result<SplitPair> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::InvalidRatio(ratio));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train_rows = Vec::new();
    let mut test_rows = Vec::new();
    for c in 0..d.n_classes() {
        let mut rows = d.class_rows(c);
        if rows.len() < 2 {
            return Err(Error::ClassTooSmall {
                class: c,
                count: rows.len(),
                needed: 2,
            });
        }
        rows.shuffle(&mut rng);
        // the epsilon keeps exact products like 0.8 * 20 from rounding up
        let n_train = ((ratio * rows.len() as f64) - 1e-9).ceil() as usize;
        train_rows.extend_from_slice(&rows[..n_train]);
        test_rows.extend_from_slice(&rows[n_train..]);
    }
    train_rows.sort_unstable();
    test_rows.sort_unstable();
    if test_rows.is_empty() {
        return Err(Error::Config("split leaves the test set empty".into()));
    }
    Ok(SplitPair {
        train: d.subset(&train_rows)?,
        test: d.subset(&test_rows)?,
        seed,
        ratio,
        train_rows,
        test_rows,
    })
}

/// Majority count over minority count.
pub fn imbalance_ratio(d: &Dataset) -> Result<f64> {
    if let Some(c) = d.class_counts.iter().position(|&n| n == 0) {
        return Err(Error::EmptyClass(c));
    }
    let max = d.class_counts.iter().copied().max().ok_or(Error::EmptyClass(0))?;
    let min = d.class_counts.iter().copied().min().ok_or(Error::EmptyClass(0))?;
    Ok(max as f64 / min as f64)
}
