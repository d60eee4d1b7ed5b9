//! The learnable oversampler.
//!
//! Three decision criteria shape every synthetic row: whether the seed
//! participates, how many same-class neighbors it draws on, and which
//! aggregator combines them. Each criterion's choice is sampled with
//! Gumbel-Softmax from logits that are either computed per row (the self
//! variant) or shared by a learned group (the cohort variant).
//!
//! During training every synthetic row is generated and routed so that the
//! classifier loss reaches all three criteria:
//!
//! * participation weighs the row's loss by its soft probability;
//! * the aggregator output is the soft mixture of all six aggregators;
//! * the neighbor count contributes a zero-valued term whose gradient is
//!   that of the soft mixture over the six neighbor counts.
//!
//! At inference only hard decisions are used and non-participating seeds
//! produce nothing.

mod direct;
mod heads;

use log::{debug, warn};
use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

pub use direct::{MlpOversampler, DIRECT_HIDDEN};
pub use heads::{BoundModel, DecisionModel, Logits, HEAD_HIDDEN};

use crate::aggregators::AggregatorKind;
use crate::classifier::{Augmented, BatchAugmenter};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::gradcore::{concat_rows, Adam, Matrix, Param, Parameters, Tape, Var};
use crate::gumbel::{gumbel_sample, gumbel_softmax, select_decision};
use crate::neighbors::{NeighborIndex, DEFAULT_K_MAX};

/// Decision-set sizes for participation, neighbor count and aggregator.
pub const DECISION_SIZES: [usize; 3] = [2, 6, 6];
pub const PARTICIPATION: [bool; 2] = [false, true];
pub const NEIGHBOR_COUNTS: [usize; 6] = [1, 2, 3, 4, 5, 6];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Criterion {
    Participation,
    NeighborCount,
    Aggregator,
}

impl Criterion {
    pub const ALL: [Criterion; 3] = [Criterion::Participation, Criterion::NeighborCount, Criterion::Aggregator];

    pub fn size(self) -> usize {
        DECISION_SIZES[self as usize]
    }
}

/// Criteria switched off for an ablation run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ablation {
    /// Every seed participates with weight 1.
    pub without_participation: bool,
    /// The neighbor count is fixed to the configured `k`.
    pub without_neighbor_count: bool,
    /// The aggregator is fixed to interpolation.
    pub without_aggregator: bool,
}

impl Ablation {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn removing(c: Criterion) -> Self {
        let mut a = Self::default();
        match c {
            Criterion::Participation => a.without_participation = true,
            Criterion::NeighborCount => a.without_neighbor_count = true,
            Criterion::Aggregator => a.without_aggregator = true,
        }
        a
    }

    pub fn is_active(&self, c: Criterion) -> bool {
        match c {
            Criterion::Participation => !self.without_participation,
            Criterion::NeighborCount => !self.without_neighbor_count,
            Criterion::Aggregator => !self.without_aggregator,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    #[serde(rename = "self")]
    SelfInstance,
    Cohort { groups: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AutoSmoteConfig {
    pub variant: Variant,
    pub ablation: Ablation,
    /// Neighbor count used when the neighbor-count criterion is ablated.
    pub k: usize,
    pub tau: f64,
    pub learning_rate: f64,
}

impl Default for AutoSmoteConfig {
    fn default() -> Self {
        Self {
            variant: Variant::SelfInstance,
            ablation: Ablation::none(),
            k: 5,
            tau: 1.0,
            learning_rate: 0.05,
        }
    }
}

impl AutoSmoteConfig {
    pub fn validate(&self) -> Result<()> {
        if !(1..=DEFAULT_K_MAX).contains(&self.k) {
            return Err(Error::InvalidK {
                k: self.k,
                k_max: DEFAULT_K_MAX,
            });
        }
        if !(self.tau > 0.0) {
            return Err(Error::NonPositiveTemperature(self.tau));
        }
        if let Variant::Cohort { groups } = self.variant {
            if !(1..=7).contains(&groups) {
                return Err(Error::Config(format!("group count must be in 1..=7, got {groups}")));
            }
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::Config(format!("learning rate must be positive, got {}", self.learning_rate)));
        }
        Ok(())
    }
}

/// Which synthetic rows a batch needs: per deficient class, the seed of
/// each row to generate, cycling over that class's members.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchPlan {
    pub classes: Vec<usize>,
    pub seeds: Vec<usize>,
}

impl BatchPlan {
    /// Raises each class to the batch majority count; classes with fewer
    /// than `min_members` rows are skipped.
    pub fn balance(batch: &Dataset, min_members: usize) -> Self {
        let target = batch.majority_count();
        let mut classes = Vec::new();
        let mut seeds = Vec::new();
        for (c, &n) in batch.class_counts.iter().enumerate() {
            if n == 0 || n >= target {
                continue;
            }
            if n < min_members {
                debug!("batch class {c} has {n} rows, skipping its oversampling");
                continue;
            }
            let members = batch.class_rows(c);
            for i in 0..target - n {
                classes.push(c);
                seeds.push(members[i % n]);
            }
        }
        Self { classes, seeds }
    }

    pub fn len(&self) -> usize {
        self.seeds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.seeds.is_empty()
    }
}

/// Everything decided for a batch's synthetic rows.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticTrace {
    pub classes: Vec<usize>,
    /// Seed rows, as batch row indices.
    pub seeds: Vec<usize>,
    /// Neighbor rows used for each synthetic row, as batch row indices.
    pub neighbors: Vec<Vec<usize>>,
    pub participate: Vec<bool>,
    pub aggregator: Vec<AggregatorKind>,
    pub groups: Option<Vec<usize>>,
    /// One `n x f` matrix per aggregator, in ordinal order.
    pub candidates: Vec<Matrix>,
}

/// Synthetic rows on the tape.
pub struct SyntheticBatch<'t> {
    pub rows: Var<'t>,
    /// `n x 1` loss weights.
    pub weights: Var<'t>,
    /// Soft decisions, one `n x n_j` node per criterion.
    pub soft: [Var<'t>; 3],
    pub trace: SyntheticTrace,
}

/// Tape-independent inputs for one synthetic row.
struct RowInputs {
    neighbors: Vec<usize>,
    /// One output per aggregator, at the chosen `k`.
    candidates: Vec<Vec<f64>>,
    /// The chosen aggregator's output at each `k` in 1..=6.
    by_k: Vec<Vec<f64>>,
}

/// Aggregates `seed` with its first `k` neighbors; the interpolation
/// partner is the neighbor at relative position `u`.
fn aggregate(
    d: &Dataset,
    index: &NeighborIndex,
    seed: usize,
    k: usize,
    kind: AggregatorKind,
    u: f64,
    lambda: f64,
) -> Result<(Vec<usize>, Vec<f64>)> {
    let nb = index.neighbors_of(seed, k)?;
    let rows: Vec<&[f64]> = nb.rows.iter().map(|&r| d.row(r)).collect();
    let partner = ((u * rows.len() as f64) as usize).min(rows.len() - 1);
    Ok((nb.rows.to_vec(), kind.apply(d.row(seed), &rows, partner, lambda)?))
}

fn row_inputs(
    d: &Dataset,
    index: &NeighborIndex,
    seed: usize,
    k: usize,
    chosen: AggregatorKind,
    u: f64,
    lambda: f64,
) -> Result<RowInputs> {
    let mut neighbors = Vec::new();
    let mut candidates = Vec::with_capacity(6);
    for kind in AggregatorKind::ALL {
        let (nb, out) = aggregate(d, index, seed, k, kind, u, lambda)?;
        neighbors = nb;
        candidates.push(out);
    }
    let by_k = NEIGHBOR_COUNTS
        .iter()
        .map(|&kk| aggregate(d, index, seed, kk, chosen, u, lambda).map(|r| r.1))
        .collect::<Result<_>>()?;
    Ok(RowInputs {
        neighbors,
        candidates,
        by_k,
    })
}

fn stack(rows: impl Iterator<Item = Vec<f64>>, n: usize, f: usize) -> Result<Matrix> {
    let data: Vec<f64> = rows.flatten().collect();
    Matrix::new(n, f, data)
}

/// The learnable oversampler and its optimizer state.
#[derive(Debug, Clone)]
pub struct AutoSmote {
    pub config: AutoSmoteConfig,
    pub model: DecisionModel,
    adam: Adam,
}

impl AutoSmote {
    pub fn new<R: Rng + ?Sized>(n_features: usize, config: AutoSmoteConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let model = match config.variant {
            Variant::SelfInstance => DecisionModel::instance(n_features, rng),
            Variant::Cohort { groups } => DecisionModel::cohort(n_features, groups, rng),
        };
        let adam = Adam::new(config.learning_rate);
        Ok(Self { config, model, adam })
    }

    fn active(&self, c: Criterion) -> bool {
        self.config.ablation.is_active(c)
    }

    /// Builds the synthetic rows a batch needs, or `None` if it is balanced.
    pub fn synthesize<'t>(
        &self,
        tape: &'t Tape,
        bound: &BoundModel<'t>,
        batch: &Dataset,
        rng: &mut dyn RngCore,
    ) -> Result<Option<SyntheticBatch<'t>>> {
        let plan = BatchPlan::balance(batch, 2);
        if plan.is_empty() {
            return Ok(None);
        }
        let n = plan.len();
        let f = batch.n_features();
        let tau = self.config.tau;

        let seeds_x = batch.features.select_rows(&plan.seeds)?;
        let logits = self.model.logits(bound, tape.constant(seeds_x), tau, rng)?;
        let [z1, z2, z3] = logits.criteria;
        let g1 = gumbel_softmax(z1, tau, rng)?;
        let g2 = gumbel_softmax(z2, tau, rng)?;
        let g3 = gumbel_softmax(z3, tau, rng)?;

        let mut indexes: Vec<Option<NeighborIndex>> = vec![None; batch.n_classes()];
        for &c in &plan.classes {
            if indexes[c].is_none() {
                indexes[c] = Some(NeighborIndex::build(batch, c, DEFAULT_K_MAX)?);
            }
        }

        let mut inputs = Vec::with_capacity(n);
        let mut participate = Vec::with_capacity(n);
        let mut aggregator = Vec::with_capacity(n);
        for i in 0..n {
            let index = indexes[plan.classes[i]].as_ref().expect("index built above");
            let k = if self.active(Criterion::NeighborCount) {
                select_decision(&g2.sample(i), &NEIGHBOR_COUNTS)?
            } else {
                self.config.k
            };
            let chosen = if self.active(Criterion::Aggregator) {
                select_decision(&g3.sample(i), &AggregatorKind::ALL)?
            } else {
                AggregatorKind::Interpolation
            };
            let joins = !self.active(Criterion::Participation) || select_decision(&g1.sample(i), &PARTICIPATION)?;
            let u: f64 = rng.random();
            let lambda: f64 = rng.random();
            inputs.push(row_inputs(batch, index, plan.seeds[i], k, chosen, u, lambda)?);
            participate.push(joins);
            aggregator.push(chosen);
        }

        let candidates: Vec<Matrix> = (0..6)
            .map(|a| stack(inputs.iter().map(|r| r.candidates[a].clone()), n, f))
            .collect::<Result<_>>()?;
        let mut rows = if self.active(Criterion::Aggregator) {
            g3.soft.mix(candidates.clone())?
        } else {
            tape.constant(candidates[AggregatorKind::Interpolation.ordinal()].clone())
        };
        if self.active(Criterion::NeighborCount) {
            let by_k: Vec<Matrix> = (0..6)
                .map(|kk| stack(inputs.iter().map(|r| r.by_k[kk].clone()), n, f))
                .collect::<Result<_>>()?;
            rows = rows.add(g2.soft.mix(by_k)?.grad_only()?)?;
        }
        let weights = if self.active(Criterion::Participation) {
            g1.soft.column(1)?
        } else {
            tape.constant(Matrix::ones(n, 1))
        };

        Ok(Some(SyntheticBatch {
            rows,
            weights,
            soft: [g1.soft, g2.soft, g3.soft],
            trace: SyntheticTrace {
                classes: plan.classes,
                seeds: plan.seeds,
                neighbors: inputs.into_iter().map(|r| r.neighbors).collect(),
                participate,
                aggregator,
                groups: logits.groups,
                candidates,
            },
        }))
    }

    /// Oversamples `d` with hard decisions only, raising every class to the
    /// majority count. Seeds that decline to participate are passed over.
    pub fn generate(&self, d: &Dataset, rng: &mut dyn RngCore) -> Result<Dataset> {
        let target = d.majority_count();
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for (c, &count) in d.class_counts.iter().enumerate() {
            if count == 0 || count >= target {
                continue;
            }
            let index = NeighborIndex::build(d, c, DEFAULT_K_MAX)?;
            let members = index.members().to_vec();
            let need = target - count;
            let mut made = 0;
            let mut attempts = 0;
            let max_attempts = 100 * need.max(members.len());
            while made < need && attempts < max_attempts {
                let seed = members[attempts % members.len()];
                attempts += 1;
                let (logits, _) = self.model.logits_eval(d.row(seed), self.config.tau, rng)?;
                let s1 = gumbel_sample(&logits[0], self.config.tau, rng)?;
                let s2 = gumbel_sample(&logits[1], self.config.tau, rng)?;
                let s3 = gumbel_sample(&logits[2], self.config.tau, rng)?;
                let u: f64 = rng.random();
                let lambda: f64 = rng.random();
                if self.active(Criterion::Participation) && !select_decision(&s1, &PARTICIPATION)? {
                    continue;
                }
                let k = if self.active(Criterion::NeighborCount) {
                    select_decision(&s2, &NEIGHBOR_COUNTS)?
                } else {
                    self.config.k
                };
                let kind = if self.active(Criterion::Aggregator) {
                    select_decision(&s3, &AggregatorKind::ALL)?
                } else {
                    AggregatorKind::Interpolation
                };
                rows.push(aggregate(d, &index, seed, k, kind, u, lambda)?.1);
                labels.push(c);
                made += 1;
            }
            if made < need {
                warn!("class {c}: only {made} of {need} seeds chose to participate");
            }
        }
        d.extend(&rows, &labels)
    }
}

impl Parameters for AutoSmote {
    fn params(&self) -> Vec<&Param> {
        self.model.params()
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        self.model.params_mut()
    }
}

/// Prepends the real batch (weight 1) to synthetic rows.
pub(crate) fn join_batch<'t>(
    tape: &'t Tape,
    batch: &Dataset,
    synthetic: Option<(Var<'t>, Option<Var<'t>>, &[usize])>,
    bound: Vec<Var<'t>>,
) -> Result<Augmented<'t>> {
    let real = tape.constant(batch.features.clone());
    let mut labels = batch.labels.clone();
    let Some((rows, weights, classes)) = synthetic else {
        return Ok(Augmented {
            features: real,
            labels,
            weights: None,
            bound,
        });
    };
    labels.extend_from_slice(classes);
    let weights = match weights {
        Some(w) => Some(concat_rows(&[tape.constant(Matrix::ones(batch.len(), 1)), w])?),
        None => None,
    };
    Ok(Augmented {
        features: concat_rows(&[real, rows])?,
        labels,
        weights,
        bound,
    })
}

impl BatchAugmenter for AutoSmote {
    fn augment<'t>(&mut self, tape: &'t Tape, batch: &Dataset, rng: &mut dyn RngCore) -> Result<Augmented<'t>> {
        let bound = self.model.bind(tape);
        let syn = self.synthesize(tape, &bound, batch, rng)?;
        let vars = bound.vars();
        match &syn {
            Some(s) => join_batch(tape, batch, Some((s.rows, Some(s.weights), &s.trace.classes)), vars),
            None => join_batch(tape, batch, None, vars),
        }
    }

    fn update(&mut self, bound: &[Var<'_>]) {
        self.model.pull_grads(bound);
        self.adam.step(&mut self.model.params_mut());
    }
}

#[cfg(test)]
mod tests;
