use crate::error::{Result, SparkError};
use crate::params::{Gradients, ParamSet};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adam moments for one [`ParamSet`].
#[derive(Clone, Debug, PartialEq)]
pub struct Adam {
    pub config: AdamConfig,
    pub step: u64,
    pub m: Vec<Tensor>,
    pub v: Vec<Tensor>,
}

impl Adam {
    pub fn new(params: &ParamSet, config: AdamConfig) -> Result<Self> {
        if !(config.lr > 0.0) {
            return Err(SparkError::Config(format!(
                "learning rate must be positive, got {}",
                config.lr
            )));
        }
        let zeros: Vec<Tensor> = params.iter().map(|(_, _, t)| Tensor::zeros(t.shape())).collect();
        Ok(Self {
            config,
            step: 0,
            m: zeros.clone(),
            v: zeros,
        })
    }

    /// One bias-corrected Adam update. Parameters absent from `grads` are
    /// treated as having zero gradient.
    pub fn update(&mut self, params: &mut ParamSet, grads: &Gradients) -> Result<()> {
        let AdamConfig { lr, beta1, beta2, eps } = self.config;
        self.step += 1;
        let bc1 = 1.0 - beta1.powi(self.step as i32);
        let bc2 = 1.0 - beta2.powi(self.step as i32);
        for id in params.ids() {
            let p = params.get_mut(id);
            let (m, v) = (&mut self.m[id.0], &mut self.v[id.0]);
            if let Some(g) = grads.get(id) {
                if g.shape() != p.shape() {
                    return Err(SparkError::shape(
                        "adam",
                        format!("grad {:?} vs param {:?}", g.shape(), p.shape()),
                    ));
                }
            }
            let g = grads.get(id).map(Tensor::data);
            for i in 0..p.numel() {
                let gi = g.map_or(0.0, |g| g[i]);
                let mi = beta1 * m.data()[i] + (1.0 - beta1) * gi;
                let vi = beta2 * v.data()[i] + (1.0 - beta2) * gi * gi;
                m.data_mut()[i] = mi;
                v.data_mut()[i] = vi;
                p.data_mut()[i] -= lr * (mi / bc1) / ((vi / bc2).sqrt() + eps);
            }
        }
        Ok(())
    }
}

/// Functional form: `(params, grads, state) → (params', state')`.
pub fn adam_step(params: &ParamSet, grads: &Gradients, state: &Adam) -> Result<(ParamSet, Adam)> {
    if !(state.config.lr > 0.0) {
        return Err(SparkError::Config(format!(
            "learning rate must be positive, got {}",
            state.config.lr
        )));
    }
    let mut p = params.clone();
    let mut s = state.clone();
    s.update(&mut p, grads)?;
    Ok((p, s))
}
