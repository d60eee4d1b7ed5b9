use super::matrix::Matrix;
use super::param::Param;

/// Adam with bias correction.
#[derive(Debug, Clone)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    step: u64,
    first: Vec<Matrix>,
    second: Vec<Matrix>,
}

impl Adam {
    pub fn new(learning_rate: f64) -> Self {
        Self {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step: 0,
            first: Vec::new(),
            second: Vec::new(),
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// Applies one update in place and zeros the gradients.
    ///
    /// Moment buffers are allocated on the first call; later calls must pass
    /// the same parameters in the same order.
    pub fn step(&mut self, params: &mut [&mut Param]) {
        if self.first.is_empty() {
            self.first = params.iter().map(|p| Matrix::zeros(p.value.rows(), p.value.cols())).collect();
            self.second = self.first.clone();
        }
        assert_eq!(self.first.len(), params.len(), "parameter set changed between steps");
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for ((p, m), v) in params.iter_mut().zip(&mut self.first).zip(&mut self.second) {
            assert_eq!(p.value.shape(), m.shape(), "parameter `{}` changed shape", p.name);
            let grads = p.grad.data().to_vec();
            for (((w, g), m), v) in p
                .value
                .data_mut()
                .iter_mut()
                .zip(&grads)
                .zip(m.data_mut())
                .zip(v.data_mut())
            {
                *m = self.beta1 * *m + (1.0 - self.beta1) * g;
                *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
                let m_hat = *m / c1;
                let v_hat = *v / c2;
                *w -= self.learning_rate * m_hat / (v_hat.sqrt() + self.epsilon);
            }
            p.zero_grad();
        }
    }
}
