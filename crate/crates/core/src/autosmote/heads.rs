use rand::{Rng, RngCore};

use super::DECISION_SIZES;
use crate::error::Result;
use crate::gradcore::{BoundMlp, Matrix, Mlp, Param, Parameters, Tape, Var};
use crate::gumbel::{gumbel_sample, gumbel_softmax};

pub const HEAD_HIDDEN: usize = 32;

/// Maps a seed row to one logit row per decision criterion.
#[derive(Debug, Clone, PartialEq)]
pub enum DecisionModel {
    /// One MLP per criterion, applied to each row.
    Instance { heads: [Mlp; 3] },
    /// Rows are assigned to groups; each group owns one logit row per criterion.
    Cohort { assigner: Mlp, tables: [Param; 3] },
}

#[derive(Debug, Clone, Copy)]
pub enum BoundModel<'t> {
    Instance { heads: [BoundMlp<'t>; 3] },
    Cohort { assigner: BoundMlp<'t>, tables: [Var<'t>; 3] },
}

/// Per-criterion logits on the tape, plus the hard group of each row.
pub struct Logits<'t> {
    pub criteria: [Var<'t>; 3],
    pub groups: Option<Vec<usize>>,
}

impl DecisionModel {
    pub fn instance<R: Rng + ?Sized>(n_features: usize, rng: &mut R) -> Self {
        let names = ["dc1", "dc2", "dc3"];
        let heads = std::array::from_fn(|j| Mlp::new(names[j], n_features, HEAD_HIDDEN, DECISION_SIZES[j], rng));
        DecisionModel::Instance { heads }
    }

    pub fn cohort<R: Rng + ?Sized>(n_features: usize, groups: usize, rng: &mut R) -> Self {
        let assigner = Mlp::new("assigner", n_features, HEAD_HIDDEN, groups, rng);
        let names = ["dc1.table", "dc2.table", "dc3.table"];
        let tables = std::array::from_fn(|j| Param::glorot(names[j], groups, DECISION_SIZES[j], rng));
        DecisionModel::Cohort { assigner, tables }
    }

    pub fn groups(&self) -> Option<usize> {
        match self {
            DecisionModel::Instance { .. } => None,
            DecisionModel::Cohort { assigner, .. } => Some(assigner.output_width()),
        }
    }

    pub fn bind<'t>(&self, tape: &'t Tape) -> BoundModel<'t> {
        match self {
            DecisionModel::Instance { heads } => BoundModel::Instance {
                heads: std::array::from_fn(|j| heads[j].bind(tape)),
            },
            DecisionModel::Cohort { assigner, tables } => BoundModel::Cohort {
                assigner: assigner.bind(tape),
                tables: std::array::from_fn(|j| tape.param(&tables[j])),
            },
        }
    }

    /// Logits for every row of `x`; the cohort variant draws a Gumbel group
    /// per row and passes gradient to the assigner straight through.
    pub fn logits<'t>(&self, bound: &BoundModel<'t>, x: Var<'t>, tau: f64, rng: &mut dyn RngCore) -> Result<Logits<'t>> {
        match bound {
            BoundModel::Instance { heads } => Ok(Logits {
                criteria: [heads[0].forward(x)?, heads[1].forward(x)?, heads[2].forward(x)?],
                groups: None,
            }),
            BoundModel::Cohort { assigner, tables } => {
                let g = gumbel_softmax(assigner.forward(x)?, tau, rng)?;
                let pick = g.soft.straight_through(g.one_hot())?;
                Ok(Logits {
                    criteria: [pick.matmul(tables[0])?, pick.matmul(tables[1])?, pick.matmul(tables[2])?],
                    groups: Some(g.hard),
                })
            }
        }
    }

    /// Tape-free logits for one row.
    pub fn logits_eval(&self, x: &[f64], tau: f64, rng: &mut dyn RngCore) -> Result<([Vec<f64>; 3], Option<usize>)> {
        let row = Matrix::new(1, x.len(), x.to_vec())?;
        match self {
            DecisionModel::Instance { heads } => {
                let mut out: [Vec<f64>; 3] = Default::default();
                for (o, h) in out.iter_mut().zip(heads) {
                    *o = h.eval(&row)?.into_data();
                }
                Ok((out, None))
            }
            DecisionModel::Cohort { assigner, tables } => {
                let g = gumbel_sample(assigner.eval(&row)?.data(), tau, rng)?.hard_index;
                Ok((std::array::from_fn(|j| tables[j].value.row(g).to_vec()), Some(g)))
            }
        }
    }
}

impl<'t> BoundModel<'t> {
    pub fn vars(&self) -> Vec<Var<'t>> {
        match self {
            BoundModel::Instance { heads } => heads.iter().flat_map(|h| h.vars()).collect(),
            BoundModel::Cohort { assigner, tables } => assigner.vars().into_iter().chain(tables.iter().copied()).collect(),
        }
    }
}

impl Parameters for DecisionModel {
    fn params(&self) -> Vec<&Param> {
        match self {
            DecisionModel::Instance { heads } => heads.iter().flat_map(|h| h.params()).collect(),
            DecisionModel::Cohort { assigner, tables } => assigner.params().into_iter().chain(tables.iter()).collect(),
        }
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        match self {
            DecisionModel::Instance { heads } => heads.iter_mut().flat_map(|h| h.params_mut()).collect(),
            DecisionModel::Cohort { assigner, tables } => {
                assigner.params_mut().into_iter().chain(tables.iter_mut()).collect()
            }
        }
    }
}
