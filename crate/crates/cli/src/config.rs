//! Experiment configuration: a JSON file, overridden field by field by flags.

use std::collections::HashSet;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use autosmote::autosmote::Criterion;
use autosmote::Ablation;
use clap::ValueEnum;
use serde::{Deserialize, Deserializer, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    None,
    Random,
    Smote,
    Borderline,
    Adasyn,
    AutosmoteSelf,
    AutosmoteCohort,
    MlpOversampler,
}

impl Method {
    pub const ALL: [Method; 8] = [
        Method::None,
        Method::Random,
        Method::Smote,
        Method::Borderline,
        Method::Adasyn,
        Method::AutosmoteSelf,
        Method::AutosmoteCohort,
        Method::MlpOversampler,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::None => "none",
            Method::Random => "random",
            Method::Smote => "smote",
            Method::Borderline => "borderline",
            Method::Adasyn => "adasyn",
            Method::AutosmoteSelf => "autosmote-self",
            Method::AutosmoteCohort => "autosmote-cohort",
            Method::MlpOversampler => "mlp-oversampler",
        }
    }

    /// Oversamples once, before training.
    pub fn is_classical(self) -> bool {
        matches!(self, Method::Random | Method::Smote | Method::Borderline | Method::Adasyn)
    }

    pub fn uses_neighbors(self) -> bool {
        matches!(self, Method::Smote | Method::Borderline | Method::Adasyn)
    }

    pub fn is_autosmote(self) -> bool {
        matches!(self, Method::AutosmoteSelf | Method::AutosmoteCohort)
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// A removable decision criterion, as named on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Ablate {
    Dc1,
    Dc2,
    Dc3,
}

impl Ablate {
    pub const ALL: [Ablate; 3] = [Ablate::Dc1, Ablate::Dc2, Ablate::Dc3];

    pub fn criterion(self) -> Criterion {
        match self {
            Ablate::Dc1 => Criterion::Participation,
            Ablate::Dc2 => Criterion::NeighborCount,
            Ablate::Dc3 => Criterion::Aggregator,
        }
    }
}

pub fn ablation_of(removed: &[Ablate]) -> Ablation {
    let mut a = Ablation::none();
    for r in removed {
        match r {
            Ablate::Dc1 => a.without_participation = true,
            Ablate::Dc2 => a.without_neighbor_count = true,
            Ablate::Dc3 => a.without_aggregator = true,
        }
    }
    a
}

/// Seed lists: `N` means `0..N`, `a..b` a half-open range, `a,b,c` a list.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(transparent)]
pub struct Seeds(pub Vec<u64>);

impl FromStr for Seeds {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let bad = |_| format!("cannot parse seeds `{s}`");
        if let Some((a, b)) = s.split_once("..") {
            let (a, b): (u64, u64) = (a.trim().parse().map_err(bad)?, b.trim().parse().map_err(bad)?);
            return Ok(Seeds((a..b).collect()));
        }
        if s.contains(',') {
            return s
                .split(',')
                .filter(|p| !p.trim().is_empty())
                .map(|p| p.trim().parse().map_err(bad))
                .collect::<Result<_, _>>()
                .map(Seeds);
        }
        let n: u64 = s.parse().map_err(bad)?;
        Ok(Seeds((0..n).collect()))
    }
}

impl<'de> Deserialize<'de> for Seeds {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            List(Vec<u64>),
            Count(u64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::List(v) => Ok(Seeds(v)),
            Raw::Count(n) => Ok(Seeds((0..n).collect())),
            Raw::Text(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

fn one_or_many<'de, D, T>(d: D) -> Result<Vec<T>, D::Error>
where
    D: Deserializer<'de>,
    T: Deserialize<'de>,
{
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw<T> {
        One(T),
        Many(Vec<T>),
    }
    Ok(match Raw::deserialize(d)? {
        Raw::One(t) => vec![t],
        Raw::Many(v) => v,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(deserialize_with = "one_or_many")]
    pub data: Vec<PathBuf>,
    /// One label column for every dataset, or one per dataset.
    #[serde(deserialize_with = "one_or_many")]
    pub label_col: Vec<String>,
    #[serde(deserialize_with = "one_or_many")]
    pub method: Vec<Method>,
    pub seeds: Seeds,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Fixes the neighbor count instead of searching 2..=6.
    pub k: Option<usize>,
    /// Fixes the cohort group count instead of searching 1..=7.
    pub groups: Option<usize>,
    pub tau: f64,
    pub ratio: f64,
    #[serde(deserialize_with = "one_or_many")]
    pub ablate: Vec<Ablate>,
    pub out: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            data: Vec::new(),
            label_col: Vec::new(),
            method: Vec::new(),
            seeds: Seeds((0..10).collect()),
            epochs: 200,
            batch_size: 500,
            learning_rate: 0.05,
            k: None,
            groups: None,
            tau: 1.0,
            ratio: 0.8,
            ablate: Vec::new(),
            out: None,
        }
    }
}

pub const K_SEARCH: std::ops::RangeInclusive<usize> = 2..=6;
pub const GROUP_SEARCH: std::ops::RangeInclusive<usize> = 1..=7;
pub const DEFAULT_K: usize = 5;

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    /// `(path, label column)` pairs.
    pub fn datasets(&self) -> Result<Vec<(PathBuf, String)>> {
        if self.data.is_empty() {
            bail!("no dataset given (--data)");
        }
        let labels: Vec<String> = match self.label_col.len() {
            0 => bail!("no label column given (--label-col)"),
            1 => vec![self.label_col[0].clone(); self.data.len()],
            n if n == self.data.len() => self.label_col.clone(),
            n => bail!("{n} label columns for {} datasets", self.data.len()),
        };
        Ok(self.data.iter().cloned().zip(labels).collect())
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.0.is_empty() {
            bail!("seed list is empty");
        }
        if self.seeds.0.iter().collect::<HashSet<_>>().len() != self.seeds.0.len() {
            bail!("seeds must be distinct");
        }
        if self.epochs == 0 || self.batch_size == 0 {
            bail!("epochs and batch size must be positive");
        }
        if !(self.learning_rate > 0.0) || !(self.tau > 0.0) {
            bail!("learning rate and temperature must be positive");
        }
        if !(self.ratio > 0.0 && self.ratio < 1.0) {
            bail!("split ratio must lie in (0, 1)");
        }
        if let Some(k) = self.k {
            if !(1..=6).contains(&k) {
                bail!("k must be in 1..=6, got {k}");
            }
        }
        if let Some(g) = self.groups {
            if !GROUP_SEARCH.contains(&g) {
                bail!("groups must be in 1..=7, got {g}");
            }
        }
        Ok(())
    }

    pub fn ablation(&self) -> Ablation {
        ablation_of(&self.ablate)
    }
}
