//! The downstream one-hidden-layer MLP classifier and its training loop.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::gradcore::{softmax_rows, Adam, BoundMlp, Matrix, Mlp, Param, Parameters, Tape, Var};

pub const HIDDEN_WIDTH: usize = 64;
const PROB_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub tau: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.05,
            epochs: 200,
            batch_size: 500,
            seed: 0,
            tau: 1.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.learning_rate > 0.0 && self.epochs > 0 && self.batch_size > 0 && self.tau > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("non-positive training setting in {self:?}")))
        }
    }
}

/// `softmax(relu(x·W1 + b1)·W2 + b2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpClassifier {
    pub net: Mlp,
}

impl MlpClassifier {
    pub fn new<R: Rng + ?Sized>(n_features: usize, n_classes: usize, rng: &mut R) -> Self {
        Self {
            net: Mlp::new("classifier", n_features, HIDDEN_WIDTH, n_classes, rng),
        }
    }

    pub fn n_features(&self) -> usize {
        self.net.input_width()
    }

    pub fn n_classes(&self) -> usize {
        self.net.output_width()
    }

    pub fn probabilities(&self, x: &Matrix) -> Result<Matrix> {
        self.check_width(x.cols())?;
        Ok(softmax_rows(&self.net.eval(x)?))
    }

    /// Argmax class per row, ties to the lowest index.
    pub fn predict(&self, x: &Matrix) -> Result<Vec<usize>> {
        Ok(self.probabilities(x)?.argmax_rows())
    }

    /// Probabilities as a tape node.
    pub fn forward<'t>(&self, bound: &BoundMlp<'t>, x: Var<'t>) -> Result<Var<'t>> {
        self.check_width(x.shape().1)?;
        bound.forward(x)?.softmax_rows()
    }

    fn check_width(&self, cols: usize) -> Result<()> {
        if cols != self.n_features() {
            return Err(Error::DimensionMismatch(cols, self.n_features()));
        }
        Ok(())
    }
}

impl Parameters for MlpClassifier {
    fn params(&self) -> Vec<&Param> {
        self.net.params()
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        self.net.params_mut()
    }
}

/// Mean negative log-likelihood of the true class, floored at 1e-12.
pub fn cross_entropy<'t>(probs: Var<'t>, labels: &[usize]) -> Result<Var<'t>> {
    let n = labels.len() as f64;
    probs.pick(labels)?.clamp_min(PROB_FLOOR)?.log()?.sum()?.scale(-1.0 / n)
}

/// `Σ w·(-ln p) / Σ w` with per-row weights given as an `n x 1` node.
pub fn weighted_cross_entropy<'t>(probs: Var<'t>, labels: &[usize], weights: Var<'t>) -> Result<Var<'t>> {
    let nll = probs.pick(labels)?.clamp_min(PROB_FLOOR)?.log()?.scale(-1.0)?;
    let total = nll.hadamard(weights)?.sum()?;
    total.div(weights.sum()?.clamp_min(PROB_FLOOR)?)
}

/// An augmented training batch assembled on a tape.
pub struct Augmented<'t> {
    pub features: Var<'t>,
    pub labels: Vec<usize>,
    /// Per-row loss weights; `None` means all ones.
    pub weights: Option<Var<'t>>,
    /// The augmenter's bound parameters, in its own `params()` order.
    pub bound: Vec<Var<'t>>,
}

/// A learnable per-batch oversampler trained alongside the classifier.
pub trait BatchAugmenter {
    fn augment<'t>(&mut self, tape: &'t Tape, batch: &Dataset, rng: &mut dyn rand::RngCore) -> Result<Augmented<'t>>;

    /// Pulls gradients for `bound` and takes one optimizer step.
    fn update(&mut self, bound: &[Var<'_>]);
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub loss: f64,
    pub error: f64,
    pub predictions: Vec<usize>,
    pub targets: Vec<usize>,
}

/// The classifier and its optimizer state.
pub struct Trainer {
    pub model: MlpClassifier,
    pub config: TrainConfig,
    adam: Adam,
}

impl Trainer {
    pub fn new(model: MlpClassifier, config: TrainConfig) -> Result<Self> {
        config.validate()?;
        let adam = Adam::new(config.learning_rate);
        Ok(Self { model, config, adam })
    }

    /// One shuffled pass over `d`; loss is the batch-size weighted mean and
    /// error the 0-1 rate over every row the classifier saw.
    pub fn train_epoch<R: Rng>(
        &mut self,
        d: &Dataset,
        mut augmenter: Option<&mut dyn BatchAugmenter>,
        rng: &mut R,
    ) -> Result<EpochStats> {
        if d.is_empty() {
            return Err(Error::EmptyMatrix { rows: 0, cols: d.n_features() });
        }
        let mut order: Vec<usize> = (0..d.len()).collect();
        order.shuffle(rng);
        let mut loss_sum = 0.0;
        let mut seen = 0usize;
        let mut predictions = Vec::new();
        let mut targets = Vec::new();
        for chunk in order.chunks(self.config.batch_size) {
            let batch = d.subset(chunk)?;
            let tape = Tape::new();
            let net = self.model.net.bind(&tape);
            let aug = match augmenter.as_deref_mut() {
                Some(a) => a.augment(&tape, &batch, rng)?,
                None => Augmented {
                    features: tape.constant(batch.features.clone()),
                    labels: batch.labels.clone(),
                    weights: None,
                    bound: Vec::new(),
                },
            };
            let probs = self.model.forward(&net, aug.features)?;
            let loss = match aug.weights {
                Some(w) => weighted_cross_entropy(probs, &aug.labels, w)?,
                None => cross_entropy(probs, &aug.labels)?,
            };
            tape.backward(loss)?;
            predictions.extend(probs.value().argmax_rows());
            targets.extend_from_slice(&aug.labels);
            loss_sum += loss.item() * aug.labels.len() as f64;
            seen += aug.labels.len();

            self.model.pull_grads(&net.vars());
            self.adam.step(&mut self.model.params_mut());
            if let Some(a) = augmenter.as_deref_mut() {
                a.update(&aug.bound);
            }
        }
        let wrong = predictions.iter().zip(&targets).filter(|(p, t)| p != t).count();
        Ok(EpochStats {
            loss: loss_sum / seen as f64,
            error: wrong as f64 / seen as f64,
            predictions,
            targets,
        })
    }
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn zeroed(f: usize, c: usize) -> MlpClassifier {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut m = MlpClassifier::new(f, c, &mut rng);
        for p in m.params_mut() {
            p.value.fill(0.0);
        }
        m
    }

    #[test]
    fn zero_weights_give_uniform_rows() {
        let m = zeroed(3, 4);
        let p = m.probabilities(&Matrix::filled(2, 3, 0.4)).unwrap();
        assert!(p.data().iter().all(|v| (v - 0.25).abs() < 1e-15));
        assert_eq!(m.predict(&Matrix::filled(1, 3, 0.4)).unwrap(), vec![0]);
        assert!(matches!(m.probabilities(&Matrix::zeros(1, 2)), Err(Error::DimensionMismatch(2, 3))));
    }

    #[test]
    fn rows_are_stochastic_and_shift_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = MlpClassifier::new(5, 3, &mut rng);
        let x = Matrix::uniform(10, 5, 1.0, &mut rng);
        let p = m.probabilities(&x).unwrap();
        for r in 0..10 {
            assert!((p.row(r).iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
        let mut shifted = m.clone();
        shifted.net.b2.value.data_mut().iter_mut().for_each(|b| *b += 3.7);
        let q = shifted.probabilities(&x).unwrap();
        for (a, b) in p.data().iter().zip(q.data()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn cross_entropy_closed_forms() {
        let tape = Tape::new();
        let perfect = tape.constant(Matrix::new(2, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap());
        assert!(cross_entropy(perfect, &[0, 1]).unwrap().item().abs() < 1e-15);
        let uniform = tape.constant(Matrix::filled(3, 2, 0.5));
        assert!((cross_entropy(uniform, &[0, 1, 1]).unwrap().item() - 2f64.ln()).abs() < 1e-15);
        let zero = tape.constant(Matrix::new(1, 2, vec![0.0, 1.0]).unwrap());
        assert!((cross_entropy(zero, &[0]).unwrap().item() - 1e12f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn weighted_loss_ignores_zero_weight_rows() {
        let tape = Tape::new();
        let p = tape.constant(Matrix::new(2, 2, vec![0.9, 0.1, 0.2, 0.8]).unwrap());
        let w = tape.constant(Matrix::column(&[1.0, 0.0]).unwrap());
        let l = weighted_cross_entropy(p, &[0, 0], w).unwrap();
        assert!((l.item() + 0.9f64.ln()).abs() < 1e-12);
        let ones = tape.constant(Matrix::column(&[1.0, 1.0]).unwrap());
        let a = weighted_cross_entropy(p, &[0, 1], ones).unwrap().item();
        let b = cross_entropy(p, &[0, 1]).unwrap().item();
        assert!((a - b).abs() < 1e-15);
    }

    fn max_rel_error(a: &[f64], n: &[f64]) -> f64 {
        a.iter()
            .zip(n)
            .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(1e-6))
            .fold(0.0, f64::max)
    }

    #[test]
    fn loss_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = Matrix::uniform(6, 4, 1.0, &mut rng);
        let labels = vec![0, 1, 1, 0, 1, 0];
        let mut m = MlpClassifier {
            net: Mlp::new("c", 4, 2, 2, &mut rng),
        };
        for p in m.params_mut() {
            p.value = Matrix::uniform(p.value.rows(), p.value.cols(), 1.0, &mut rng);
        }
        let loss_of = |m: &MlpClassifier| {
            let tape = Tape::new();
            let net = m.net.bind(&tape);
            let p = m.forward(&net, tape.constant(x.clone())).unwrap();
            cross_entropy(p, &labels).unwrap().item()
        };
        let tape = Tape::new();
        let net = m.net.bind(&tape);
        let p = m.forward(&net, tape.constant(x.clone())).unwrap();
        tape.backward(cross_entropy(p, &labels).unwrap()).unwrap();
        m.pull_grads(&net.vars());
        let h = 1e-5;
        for pi in 0..4 {
            let analytic = m.params()[pi].grad.data().to_vec();
            let mut numeric = Vec::new();
            for j in 0..analytic.len() {
                let mut plus = m.clone();
                plus.params_mut()[pi].value.data_mut()[j] += h;
                let mut minus = m.clone();
                minus.params_mut()[pi].value.data_mut()[j] -= h;
                numeric.push((loss_of(&plus) - loss_of(&minus)) / (2.0 * h));
            }
            assert!(max_rel_error(&analytic, &numeric) < 1e-3);
        }
    }

    fn separable(n: usize, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..n {
            let c = i % 2;
            let x: f64 = rng.random::<f64>() * 0.4 + 0.6 * c as f64;
            rows.push(vec![x, rng.random::<f64>()]);
            labels.push(c);
        }
        Dataset::from_rows(&rows, labels, 2).unwrap()
    }

    fn run(d: &Dataset, epochs: usize, seed: u64) -> Vec<EpochStats> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let model = MlpClassifier::new(2, 2, &mut rng);
        let cfg = TrainConfig {
            epochs,
            batch_size: 16,
            seed,
            ..TrainConfig::default()
        };
        let mut t = Trainer::new(model, cfg).unwrap();
        (0..epochs).map(|_| t.train_epoch(d, None, &mut rng).unwrap()).collect()
    }

    #[test]
    fn separable_data_reaches_zero_error() {
        let d = separable(40, 2);
        let stats = run(&d, 200, 3);
        assert_eq!(stats.last().unwrap().error, 0.0);
        for s in &stats {
            let wrong = s.predictions.iter().zip(&s.targets).filter(|(p, t)| p != t).count();
            assert_eq!(s.error, wrong as f64 / s.targets.len() as f64);
        }
        let rises = stats[..10].windows(2).filter(|w| w[1].loss > w[0].loss).count();
        assert!(rises as f64 <= 0.05 * 10.0 + 1.0, "{rises} rises");
    }

    #[test]
    fn training_is_deterministic() {
        let d = separable(30, 5);
        let a: Vec<u64> = run(&d, 20, 9).iter().map(|s| s.loss.to_bits()).collect();
        let b: Vec<u64> = run(&d, 20, 9).iter().map(|s| s.loss.to_bits()).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_bad_config() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let m = MlpClassifier::new(2, 2, &mut rng);
        let cfg = TrainConfig {
            batch_size: 0,
            ..TrainConfig::default()
        };
        assert!(Trainer::new(m, cfg).is_err());
    }
}
