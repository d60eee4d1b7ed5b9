//! Gumbel-Softmax relaxation of categorical decisions.

use rand::Rng;

use crate::error::{Error, Result};
use crate::gradcore::{Matrix, Var};

const U_FLOOR: f64 = 1e-12;

/// Standard Gumbel noise, `-ln(-ln U)` with `U` kept away from 0 and 1.
pub fn sample_gumbel_noise<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    (0..n).map(|_| gumbel_from_uniform(rng.random())).collect()
}

pub fn gumbel_from_uniform(u: f64) -> f64 {
    let u = u.clamp(U_FLOOR, 1.0 - U_FLOOR);
    -(-u.ln()).ln()
}

/// One relaxed categorical draw.
#[derive(Debug, Clone, PartialEq)]
pub struct GumbelSample {
    pub soft: Vec<f64>,
    pub hard_index: usize,
    pub tau: f64,
}

/// A batch of relaxed draws: the soft simplex rows stay on the tape.
#[derive(Debug, Clone)]
pub struct GumbelBatch<'t> {
    pub soft: Var<'t>,
    pub hard: Vec<usize>,
    pub tau: f64,
}

impl GumbelBatch<'_> {
    pub fn sample(&self, row: usize) -> GumbelSample {
        GumbelSample {
            soft: self.soft.value().row(row).to_vec(),
            hard_index: self.hard[row],
            tau: self.tau,
        }
    }

    /// Row-wise one-hot of the hard choices.
    pub fn one_hot(&self) -> Matrix {
        let (r, c) = self.soft.shape();
        let mut m = Matrix::zeros(r, c);
        for (i, &h) in self.hard.iter().enumerate() {
            m.set(i, h, 1.0);
        }
        m
    }
}

/// `softmax((logits + g) / tau)` row by row, with fresh noise.
pub fn gumbel_softmax<'t, R: Rng + ?Sized>(logits: Var<'t>, tau: f64, rng: &mut R) -> Result<GumbelBatch<'t>> {
    let (r, c) = logits.shape();
    let noise = Matrix::new(r, c, sample_gumbel_noise(r * c, rng))?;
    gumbel_softmax_with_noise(logits, tau, &noise)
}

/// As [`gumbel_softmax`] with caller-supplied noise.
pub fn gumbel_softmax_with_noise<'t>(logits: Var<'t>, tau: f64, noise: &Matrix) -> Result<GumbelBatch<'t>> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::NonPositiveTemperature(tau));
    }
    let tape = logits.tape();
    let soft = logits
        .add(tape.constant(noise.clone()))?
        .scale(1.0 / tau)?
        .softmax_rows()?;
    let hard = soft.value().argmax_rows();
    Ok(GumbelBatch { soft, hard, tau })
}

/// Tape-free draw for inference.
pub fn gumbel_sample<R: Rng + ?Sized>(logits: &[f64], tau: f64, rng: &mut R) -> Result<GumbelSample> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::NonPositiveTemperature(tau));
    }
    let shifted: Vec<f64> = logits
        .iter()
        .zip(sample_gumbel_noise(logits.len(), rng))
        .map(|(z, g)| (z + g) / tau)
        .collect();
    let m = crate::gradcore::softmax_rows(&Matrix::new(1, logits.len(), shifted)?);
    let hard_index = m.argmax_rows()[0];
    Ok(GumbelSample {
        soft: m.into_data(),
        hard_index,
        tau,
    })
}

/// The decision at the sample's hard index.
pub fn select_decision<T: Clone>(s: &GumbelSample, decision_set: &[T]) -> Result<T> {
    if decision_set.len() != s.soft.len() {
        return Err(Error::DecisionSetSize {
            set: decision_set.len(),
            sample: s.soft.len(),
        });
    }
    Ok(decision_set[s.hard_index].clone())
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::aggregators::AggregatorKind;
    use crate::gradcore::Tape;

    #[test]
    fn noise_closed_form_and_domain() {
        assert!(gumbel_from_uniform(1.0 / std::f64::consts::E).abs() < 1e-15);
        assert!(gumbel_from_uniform(0.0).is_finite());
        assert!(gumbel_from_uniform(1.0).is_finite());
    }

    #[test]
    fn noise_mean_is_euler_mascheroni() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let draws = sample_gumbel_noise(100_000, &mut rng);
        let mean = draws.iter().sum::<f64>() / draws.len() as f64;
        assert!((mean - 0.577_215_664_9).abs() < 0.01, "mean {mean}");
    }

    #[test]
    fn symmetric_logits_give_uniform() {
        let tape = Tape::new();
        let z = tape.variable(Matrix::filled(1, 4, 0.3));
        let s = gumbel_softmax_with_noise(z, 1.0, &Matrix::filled(1, 4, 0.7)).unwrap();
        for v in s.soft.value().data() {
            assert!((v - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn low_temperature_limit() {
        let tape = Tape::new();
        let z = tape.variable(Matrix::new(1, 2, vec![10.0, 0.0]).unwrap());
        let s = gumbel_softmax_with_noise(z, 0.1, &Matrix::zeros(1, 2)).unwrap();
        assert!((s.soft.value().get(0, 0) - 1.0).abs() < 1e-4);
        assert_eq!(s.hard, vec![0]);
    }

    #[test]
    fn rejects_bad_temperature() {
        let tape = Tape::new();
        let z = tape.variable(Matrix::zeros(1, 2));
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(gumbel_softmax(z, 0.0, &mut rng), Err(Error::NonPositiveTemperature(_))));
        assert!(gumbel_sample(&[0.0, 1.0], -1.0, &mut rng).is_err());
    }

    #[test]
    fn hard_frequencies_match_softmax() {
        let logits = [1.0, 0.0, -0.5, 2.0, 0.3, -1.2];
        let expected = crate::gradcore::softmax_rows(&Matrix::new(1, 6, logits.to_vec()).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let n = 100_000;
        let mut counts = [0usize; 6];
        for _ in 0..n {
            counts[gumbel_sample(&logits, 1.0, &mut rng).unwrap().hard_index] += 1;
        }
        for (c, p) in counts.iter().zip(expected.data()) {
            assert!((*c as f64 / n as f64 - p).abs() < 0.01);
        }
    }

    #[test]
    fn simplex_and_argmax_consistency() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for tau in [1.0, 0.5, 0.1, 0.01] {
            for _ in 0..200 {
                let logits: Vec<f64> = sample_gumbel_noise(5, &mut rng);
                let s = gumbel_sample(&logits, tau, &mut rng).unwrap();
                assert!(s.soft.iter().all(|&p| p >= 0.0));
                assert!((s.soft.iter().sum::<f64>() - 1.0).abs() < 1e-9);
                let best = s.soft.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                assert_eq!(s.soft[s.hard_index], best);
            }
        }
    }

    #[test]
    fn off_argmax_mass_shrinks_with_tau() {
        let tape = Tape::new();
        let noise = Matrix::new(1, 3, vec![0.1, -0.2, 0.4]).unwrap();
        let mut last = f64::INFINITY;
        for tau in [1.0, 0.1, 0.01] {
            let z = tape.variable(Matrix::new(1, 3, vec![0.5, 0.2, 0.1]).unwrap());
            let s = gumbel_softmax_with_noise(z, tau, &noise).unwrap();
            let off = 1.0 - s.soft.value().get(0, s.hard[0]);
            assert!(off < last);
            last = off;
        }
        // gap of 0.1 between the top two shifted logits -> about e^-10
        assert!(last < 1e-4);
    }

    #[test]
    fn sum_of_soft_has_zero_gradient() {
        let tape = Tape::new();
        let z = tape.variable(Matrix::new(2, 3, vec![0.2, -1.0, 0.7, 1.5, 0.0, -0.3]).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = gumbel_softmax(z, 0.7, &mut rng).unwrap();
        tape.backward(s.soft.sum().unwrap()).unwrap();
        assert!(z.grad().max_abs() < 1e-12);
    }

    #[test]
    fn decision_mapping() {
        let ks: Vec<usize> = (1..=6).collect();
        let s = GumbelSample {
            soft: vec![0.1, 0.1, 0.5, 0.1, 0.1, 0.1],
            hard_index: 2,
            tau: 1.0,
        };
        assert_eq!(select_decision(&s, &ks).unwrap(), 3);
        assert_eq!(select_decision(&s, &AggregatorKind::ALL).unwrap(), AggregatorKind::Minimum);
        let p = GumbelSample {
            soft: vec![0.3, 0.7],
            hard_index: 1,
            tau: 1.0,
        };
        assert!(select_decision(&p, &[false, true]).unwrap());
        let first = GumbelSample {
            hard_index: 0,
            ..s.clone()
        };
        assert_eq!(select_decision(&first, &AggregatorKind::ALL).unwrap(), AggregatorKind::Interpolation);
        assert!(matches!(select_decision(&p, &ks), Err(Error::DecisionSetSize { set: 6, sample: 2 })));
    }
}
