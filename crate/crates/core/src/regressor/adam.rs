/// Adam moment estimates for one training run.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    pub fn new(n_params: usize, beta1: f64, beta2: f64, epsilon: f64) -> Self {
        Self {
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            step: 0,
            beta1,
            beta2,
            epsilon,
        }
    }

    /// One bias-corrected Adam update:
    /// `θ ← θ − lr · m̂ / (√v̂ + ε)`, with `m̂ = m / (1 − β1^t)` and
    /// `v̂ = v / (1 − β2^t)`.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64], learning_rate: f64) {
        assert_eq!(params.len(), grads.len(), "parameter/gradient shape mismatch");
        assert_eq!(params.len(), self.m.len(), "optimizer state shape mismatch");
        self.step += 1;
        let t = i32::try_from(self.step).unwrap_or(i32::MAX);
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        let (b1, b2) = (self.beta1, self.beta2);
        for (((p, &g), m), v) in params.iter_mut().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= learning_rate * m_hat / (v_hat.sqrt() + self.epsilon);
        }
    }
}
