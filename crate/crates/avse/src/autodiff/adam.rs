//! Adam optimizer with bias correction.

use super::tensor::{AutodiffError, Scalar, Tensor};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        Self {
            lr,
            ..Self::default()
        }
    }
}

/// Per-parameter first/second moment estimates plus the step counter.
#[derive(Debug, Clone)]
pub struct AdamState<F> {
    cfg: AdamConfig,
    step: u64,
    m: Vec<Tensor<F>>,
    v: Vec<Tensor<F>>,
}

impl<F: Scalar> AdamState<F> {
    pub fn new(cfg: AdamConfig, params: &[Tensor<F>]) -> Self {
        Self {
            cfg,
            step: 0,
            m: params.iter().map(|p| Tensor::zeros(p.shape())).collect(),
            v: params.iter().map(|p| Tensor::zeros(p.shape())).collect(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn config(&self) -> AdamConfig {
        self.cfg
    }

    /// One update. `grads[i] = None` is treated as a zero gradient.
    pub fn step(
        &mut self,
        params: &mut [Tensor<F>],
        grads: &[Option<&Tensor<F>>],
    ) -> Result<(), AutodiffError> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(AutodiffError::ShapeMismatch(format!(
                "adam: {} params, {} grads, state holds {}",
                params.len(),
                grads.len(),
                self.m.len()
            )));
        }
        for (i, p) in params.iter().enumerate() {
            if p.shape() != self.m[i].shape() {
                return Err(AutodiffError::ShapeMismatch(format!(
                    "adam: param {i} shape {:?} vs state {:?}",
                    p.shape(),
                    self.m[i].shape()
                )));
            }
            if let Some(g) = grads[i] {
                if g.shape() != p.shape() {
                    return Err(AutodiffError::ShapeMismatch(format!(
                        "adam: grad {i} shape {:?} vs param {:?}",
                        g.shape(),
                        p.shape()
                    )));
                }
            }
        }

        self.step += 1;
        let b1 = F::from_f64(self.cfg.beta1);
        let b2 = F::from_f64(self.cfg.beta2);
        let one = F::one();
        let lr = F::from_f64(self.cfg.lr);
        let eps = F::from_f64(self.cfg.eps);
        let bc1 = F::from_f64(1.0 - self.cfg.beta1.powi(self.step as i32));
        let bc2 = F::from_f64(1.0 - self.cfg.beta2.powi(self.step as i32));

        for i in 0..params.len() {
            let m = self.m[i].data_mut();
            let v = self.v[i].data_mut();
            let p = params[i].data_mut();
            for j in 0..p.len() {
                let g = grads[i].map_or(F::zero(), |g| g.data()[j]);
                m[j] = b1 * m[j] + (one - b1) * g;
                v[j] = b2 * v[j] + (one - b2) * g * g;
                let m_hat = m[j] / bc1;
                let v_hat = v[j] / bc2;
                p[j] = p[j] - lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}
