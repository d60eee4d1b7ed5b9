use rand::Rng;

use super::matrix::Matrix;
use super::param::{Param, Parameters};
use super::tape::{Tape, Var};
use crate::error::Result;

/// One-hidden-layer perceptron, `relu(x·W1 + b1)·W2 + b2`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub w1: Param,
    pub b1: Param,
    pub w2: Param,
    pub b2: Param,
}

/// Tape handles for an [`Mlp`]'s parameters.
#[derive(Debug, Clone, Copy)]
pub struct BoundMlp<'t> {
    pub w1: Var<'t>,
    pub b1: Var<'t>,
    pub w2: Var<'t>,
    pub b2: Var<'t>,
}

impl Mlp {
    pub fn new<R: Rng + ?Sized>(name: &str, input: usize, hidden: usize, output: usize, rng: &mut R) -> Self {
        Self {
            w1: Param::glorot(format!("{name}.w1"), input, hidden, rng),
            b1: Param::zeros(format!("{name}.b1"), 1, hidden),
            w2: Param::glorot(format!("{name}.w2"), hidden, output, rng),
            b2: Param::zeros(format!("{name}.b2"), 1, output),
        }
    }

    /// Same shapes, with the output layer zeroed so the network starts at 0.
    pub fn zero_output<R: Rng + ?Sized>(name: &str, input: usize, hidden: usize, output: usize, rng: &mut R) -> Self {
        let mut m = Self::new(name, input, hidden, output, rng);
        m.w2.value.fill(0.0);
        m
    }

    pub fn input_width(&self) -> usize {
        self.w1.value.rows()
    }

    pub fn hidden_width(&self) -> usize {
        self.w1.value.cols()
    }

    pub fn output_width(&self) -> usize {
        self.w2.value.cols()
    }

    pub fn bind<'t>(&self, tape: &'t Tape) -> BoundMlp<'t> {
        BoundMlp {
            w1: tape.param(&self.w1),
            b1: tape.param(&self.b1),
            w2: tape.param(&self.w2),
            b2: tape.param(&self.b2),
        }
    }

    /// Tape-free forward pass.
    pub fn eval(&self, x: &Matrix) -> Result<Matrix> {
        let mut h = x.matmul(&self.w1.value)?;
        for r in 0..h.rows() {
            for (v, b) in h.row_mut(r).iter_mut().zip(self.b1.value.data()) {
                *v = (*v + b).max(0.0);
            }
        }
        let mut out = h.matmul(&self.w2.value)?;
        for r in 0..out.rows() {
            for (v, b) in out.row_mut(r).iter_mut().zip(self.b2.value.data()) {
                *v += b;
            }
        }
        Ok(out)
    }
}

impl<'t> BoundMlp<'t> {
    pub fn forward(&self, x: Var<'t>) -> Result<Var<'t>> {
        x.matmul(self.w1)?
            .add_row(self.b1)?
            .relu()?
            .matmul(self.w2)?
            .add_row(self.b2)
    }

    pub fn vars(&self) -> [Var<'t>; 4] {
        [self.w1, self.b1, self.w2, self.b2]
    }
}

impl Parameters for Mlp {
    fn params(&self) -> Vec<&Param> {
        vec![&self.w1, &self.b1, &self.w2, &self.b2]
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![&mut self.w1, &mut self.b1, &mut self.w2, &mut self.b2]
    }
}
