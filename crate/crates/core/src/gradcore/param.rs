use rand::Rng;

use super::matrix::Matrix;
use super::tape::Var;

/// A learnable matrix together with its accumulated gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub name: String,
    pub value: Matrix,
    pub grad: Matrix,
}

impl Param {
    pub fn new(name: impl Into<String>, value: Matrix) -> Self {
        let (r, c) = value.shape();
        Self {
            name: name.into(),
            value,
            grad: Matrix::zeros(r, c),
        }
    }

    /// Glorot-style uniform initialization in `±sqrt(6 / (fan_in + fan_out))`.
    pub fn glorot<R: Rng + ?Sized>(name: impl Into<String>, fan_in: usize, fan_out: usize, rng: &mut R) -> Self {
        let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
        Self::new(name, Matrix::uniform(fan_in, fan_out, bound, rng))
    }

    pub fn zeros(name: impl Into<String>, rows: usize, cols: usize) -> Self {
        Self::new(name, Matrix::zeros(rows, cols))
    }

    /// Adds the gradient a bound copy of this parameter received on its tape.
    pub fn pull_grad(&mut self, bound: Var<'_>) {
        self.grad.add_assign(&bound.grad());
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(0.0);
    }

    pub fn len(&self) -> usize {
        self.value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.value.is_empty()
    }
}

/// Anything that owns learnable parameters in a stable order.
pub trait Parameters {
    fn params(&self) -> Vec<&Param>;
    fn params_mut(&mut self) -> Vec<&mut Param>;

    fn param_count(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }

    /// Adds tape gradients into the parameters; `bound` must follow `params()` order.
    fn pull_grads(&mut self, bound: &[Var<'_>]) {
        for (p, v) in self.params_mut().into_iter().zip(bound) {
            p.pull_grad(*v);
        }
    }
}
