//! One experiment cell: a method on a dataset over a list of seeds.

use std::collections::HashSet;
use std::path::Path;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use autosmote::autosmote::Variant;
use autosmote::classifier::{BatchAugmenter, Trainer};
use autosmote::dataset::{impute_and_normalize, load_csv, stratified_split};
use autosmote::oversample::{adasyn, borderline_smote, random_oversample, smote};
use autosmote::{
    Ablation, AutoSmote, AutoSmoteConfig, Dataset, MetricsReport, MlpClassifier, MlpOversampler, OversamplePlan,
    TrainConfig,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, Method, DEFAULT_K, GROUP_SEARCH, K_SEARCH};

/// Independent random streams derived from one seed.
mod stream {
    pub const CLASSIFIER: u64 = 0;
    pub const SAMPLER: u64 = 1;
    pub const TRAINING: u64 = 2;
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// A normalized train/test split.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub seed: u64,
    pub train: Dataset,
    pub test: Dataset,
}

/// Splits, then fits imputation and scaling on the training rows only.
pub fn prepare(raw: &Dataset, ratio: f64, seed: u64) -> Result<Prepared> {
    let split = stratified_split(raw, ratio, seed)?;
    let train_rows: HashSet<usize> = split.train_rows.iter().copied().collect();
    if split.test_rows.iter().any(|r| train_rows.contains(r)) {
        bail!("leakage guard: test rows overlap the training rows for seed {seed}");
    }
    let (train, stats) = impute_and_normalize(&split.train, None)?;
    let (test, _) = impute_and_normalize(&split.test, Some(&stats))?;
    Ok(Prepared { seed, train, test })
}

/// Hyperparameters picked by the search.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hyper {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub k: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub groups: Option<usize>,
}

impl std::fmt::Display for Hyper {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match (self.k, self.groups) {
            (Some(k), Some(g)) => write!(f, "k={k},groups={g}"),
            (Some(k), None) => write!(f, "k={k}"),
            (None, Some(g)) => write!(f, "groups={g}"),
            (None, None) => f.write_str("-"),
        }
    }
}

/// Candidate hyperparameters; flags pin a value instead of searching.
pub fn search_space(method: Method, cfg: &ExperimentConfig) -> Vec<Hyper> {
    let ks: Vec<usize> = cfg.k.map_or_else(|| K_SEARCH.collect(), |k| vec![k]);
    let groups: Vec<usize> = cfg.groups.map_or_else(|| GROUP_SEARCH.collect(), |g| vec![g]);
    let fixed_k = cfg.ablation().without_neighbor_count.then(|| cfg.k.unwrap_or(DEFAULT_K));
    match method {
        Method::None | Method::Random | Method::MlpOversampler => vec![Hyper::default()],
        Method::Smote | Method::Borderline | Method::Adasyn => {
            ks.into_iter().map(|k| Hyper { k: Some(k), groups: None }).collect()
        }
        Method::AutosmoteSelf => vec![Hyper { k: fixed_k, groups: None }],
        Method::AutosmoteCohort => groups.into_iter().map(|g| Hyper { k: fixed_k, groups: Some(g) }).collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedRecord {
    pub seed: u64,
    pub metrics: MetricsReport,
    pub train_loss: Vec<f64>,
    pub train_error: Vec<f64>,
    pub test_f1: Vec<f64>,
}

/// Trains one method on one split and evaluates it on the test rows.
pub fn run_seed(
    method: Method,
    hyper: Hyper,
    ablation: Ablation,
    cfg: &ExperimentConfig,
    data: &Prepared,
) -> Result<(SeedRecord, f64)> {
    let seed = data.seed;
    let train_cfg = TrainConfig {
        learning_rate: cfg.learning_rate,
        epochs: cfg.epochs,
        batch_size: cfg.batch_size,
        seed,
        tau: cfg.tau,
    };
    let started = Instant::now();
    let mut sampler_rng = rng_for(seed, stream::SAMPLER);
    let plan = OversamplePlan::balanced(&data.train, seed);
    let k = hyper.k.unwrap_or(DEFAULT_K);
    let train = match method {
        Method::Random => random_oversample(&data.train, &plan)?,
        Method::Smote => smote(&data.train, &plan, k)?,
        Method::Borderline => borderline_smote(&data.train, &plan, k)?,
        Method::Adasyn => adasyn(&data.train, &plan, k)?,
        _ => data.train.clone(),
    };
    let f = train.n_features();
    let mut augmenter: Option<Box<dyn BatchAugmenter>> = match method {
        Method::AutosmoteSelf | Method::AutosmoteCohort => {
            let variant = match method {
                Method::AutosmoteSelf => Variant::SelfInstance,
                _ => Variant::Cohort {
                    groups: hyper.groups.unwrap_or(1),
                },
            };
            let config = AutoSmoteConfig {
                variant,
                ablation,
                k,
                tau: cfg.tau,
                learning_rate: cfg.learning_rate,
            };
            Some(Box::new(AutoSmote::new(f, config, &mut sampler_rng)?))
        }
        Method::MlpOversampler => Some(Box::new(MlpOversampler::new(f, cfg.learning_rate, &mut sampler_rng))),
        _ => None,
    };

    let model = MlpClassifier::new(f, train.n_classes(), &mut rng_for(seed, stream::CLASSIFIER));
    let mut trainer = Trainer::new(model, train_cfg)?;
    let mut rng = rng_for(seed, stream::TRAINING);
    let n_classes = data.test.n_classes();
    let mut record = SeedRecord {
        seed,
        metrics: MetricsReport::compute(&[], &[], n_classes)?,
        train_loss: Vec::with_capacity(cfg.epochs),
        train_error: Vec::with_capacity(cfg.epochs),
        test_f1: Vec::with_capacity(cfg.epochs),
    };
    for _ in 0..cfg.epochs {
        let stats = trainer.train_epoch(&train, augmenter.as_mut().map(|a| &mut **a as &mut dyn BatchAugmenter), &mut rng)?;
        record.train_loss.push(stats.loss);
        record.train_error.push(stats.error);
        let preds = trainer.model.predict(&data.test.features)?;
        record
            .test_f1
            .push(MetricsReport::compute(&preds, &data.test.labels, n_classes)?.macro_f1);
    }
    let seconds = started.elapsed().as_secs_f64();
    let preds = trainer.model.predict(&data.test.features)?;
    record.metrics = MetricsReport::compute(&preds, &data.test.labels, n_classes)?;
    Ok((record, seconds))
}

/// Mean and population standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
}

impl Stat {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Self { mean, std: var.sqrt() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub precision: Stat,
    pub recall: Stat,
    pub f1: Stat,
    pub accuracy: Stat,
}

impl Summary {
    pub fn of(seeds: &[SeedRecord]) -> Self {
        let col = |f: fn(&MetricsReport) -> f64| Stat::of(&seeds.iter().map(|s| f(&s.metrics)).collect::<Vec<_>>());
        Self {
            precision: col(|m| m.macro_precision),
            recall: col(|m| m.macro_recall),
            f1: col(|m| m.macro_f1),
            accuracy: col(|m| m.accuracy),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchEntry {
    pub hyper: Hyper,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub mean_f1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub seconds_per_seed: Vec<f64>,
    pub total_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub dataset: String,
    pub method: Method,
    pub ablation: Ablation,
    pub config: ExperimentConfig,
    pub search: Vec<SearchEntry>,
    pub selected: Option<Hyper>,
    pub seeds: Vec<SeedRecord>,
    pub summary: Option<Summary>,
    /// Why no result exists, when every configuration failed.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub missing: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub timing: Option<Timing>,
}

impl RunRecord {
    pub fn without_timing(&self) -> Self {
        Self {
            timing: None,
            ..self.clone()
        }
    }

    pub fn f1_per_seed(&self) -> Vec<f64> {
        self.seeds.iter().map(|s| s.metrics.macro_f1).collect()
    }
}

pub fn dataset_name(path: &Path) -> String {
    path.file_stem().map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned())
}

/// A loaded dataset and its per-seed splits.
pub struct Workbench {
    pub name: String,
    pub splits: Vec<Prepared>,
}

impl Workbench {
    pub fn load(path: &Path, label_col: &str, cfg: &ExperimentConfig) -> Result<Self> {
        let raw = load_csv(path, label_col).with_context(|| format!("loading {}", path.display()))?;
        let splits = cfg
            .seeds
            .0
            .iter()
            .map(|&s| prepare(&raw, cfg.ratio, s))
            .collect::<Result<_>>()?;
        Ok(Self {
            name: dataset_name(path),
            splits,
        })
    }
}

/// Runs one configuration over every seed.
pub fn run_config(
    bench: &Workbench,
    method: Method,
    hyper: Hyper,
    ablation: Ablation,
    cfg: &ExperimentConfig,
) -> Result<(Vec<SeedRecord>, Vec<f64>)> {
    let mut records = Vec::new();
    let mut seconds = Vec::new();
    for split in &bench.splits {
        let (r, s) = run_seed(method, hyper, ablation, cfg, split)?;
        log::debug!("{} {} {} seed {}: f1 {:.4}", bench.name, method, hyper, split.seed, r.metrics.macro_f1);
        records.push(r);
        seconds.push(s);
    }
    Ok((records, seconds))
}

/// Searches the hyperparameters and keeps the best mean test macro-F1.
pub fn run_method(bench: &Workbench, method: Method, ablation: Ablation, cfg: &ExperimentConfig) -> Result<RunRecord> {
    run_with_space(bench, method, ablation, cfg, search_space(method, cfg))
}

pub fn run_with_space(
    bench: &Workbench,
    method: Method,
    ablation: Ablation,
    cfg: &ExperimentConfig,
    space: Vec<Hyper>,
) -> Result<RunRecord> {
    let mut search = Vec::new();
    let mut best: Option<(f64, Hyper, Vec<SeedRecord>, Vec<f64>)> = None;
    for hyper in space {
        match run_config(bench, method, hyper, ablation, cfg) {
            Ok((records, seconds)) => {
                let mean = Stat::of(&records.iter().map(|r| r.metrics.macro_f1).collect::<Vec<_>>()).mean;
                search.push(SearchEntry {
                    hyper,
                    mean_f1: Some(mean),
                    error: None,
                });
                if best.as_ref().is_none_or(|b| mean > b.0) {
                    best = Some((mean, hyper, records, seconds));
                }
            }
            Err(e) if e.downcast_ref::<autosmote::Error>().is_some() => {
                log::warn!("{} {} {}: {e:#}", bench.name, method, hyper);
                search.push(SearchEntry {
                    hyper,
                    mean_f1: None,
                    error: Some(format!("{e:#}")),
                });
            }
            Err(e) => return Err(e),
        }
    }
    let mut record = RunRecord {
        dataset: bench.name.clone(),
        method,
        ablation,
        config: cfg.clone(),
        search,
        selected: None,
        seeds: Vec::new(),
        summary: None,
        missing: None,
        timing: None,
    };
    match best {
        Some((_, hyper, seeds, seconds)) => {
            record.summary = Some(Summary::of(&seeds));
            record.selected = Some(hyper);
            record.seeds = seeds;
            record.timing = Some(Timing {
                total_seconds: seconds.iter().sum(),
                seconds_per_seed: seconds,
            });
        }
        None => {
            record.missing = Some(
                record
                    .search
                    .iter()
                    .filter_map(|s| s.error.clone())
                    .next()
                    .unwrap_or_else(|| "no configuration to run".into()),
            );
        }
    }
    Ok(record)
}
