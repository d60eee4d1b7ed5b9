use rand::{Rng, RngCore};

use super::{join_batch, BatchPlan};
use crate::classifier::{Augmented, BatchAugmenter};
use crate::dataset::Dataset;
use crate::error::Result;
use crate::gradcore::{Adam, Matrix, Mlp, Param, Parameters, Tape, Var};

pub const DIRECT_HIDDEN: usize = 128;

/// Unconstrained baseline: a synthetic row is `x + net(x)` for a seed `x`.
///
/// The output layer starts at zero, so the first synthetic rows are copies
/// of their seeds.
#[derive(Debug, Clone)]
pub struct MlpOversampler {
    pub net: Mlp,
    adam: Adam,
}

impl MlpOversampler {
    pub fn new<R: Rng + ?Sized>(n_features: usize, learning_rate: f64, rng: &mut R) -> Self {
        Self {
            net: Mlp::zero_output("direct", n_features, DIRECT_HIDDEN, n_features, rng),
            adam: Adam::new(learning_rate),
        }
    }

    pub fn transform(&self, x: &Matrix) -> Result<Matrix> {
        let mut out = self.net.eval(x)?;
        out.add_assign(x);
        Ok(out)
    }
}

impl Parameters for MlpOversampler {
    fn params(&self) -> Vec<&Param> {
        self.net.params()
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        self.net.params_mut()
    }
}

impl BatchAugmenter for MlpOversampler {
    fn augment<'t>(&mut self, tape: &'t Tape, batch: &Dataset, _rng: &mut dyn RngCore) -> Result<Augmented<'t>> {
        let bound = self.net.bind(tape);
        let vars = bound.vars().to_vec();
        let plan = BatchPlan::balance(batch, 1);
        if plan.is_empty() {
            return join_batch(tape, batch, None, vars);
        }
        let x = tape.constant(batch.features.select_rows(&plan.seeds)?);
        let rows = x.add(bound.forward(x)?)?;
        join_batch(tape, batch, Some((rows, None, &plan.classes)), vars)
    }

    fn update(&mut self, bound: &[Var<'_>]) {
        self.net.pull_grads(bound);
        self.adam.step(&mut self.net.params_mut());
    }
}
