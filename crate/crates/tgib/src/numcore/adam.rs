//! Adam with bias correction, keyed by parameter name so moment slots
//! survive across the per-step tape rebuilds.

use std::collections::HashMap;

use super::{NumError, Tensor};

#[derive(Debug, Clone, Copy)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        AdamConfig {
            lr,
            ..Default::default()
        }
    }
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

struct Moments {
    m: Vec<f64>,
    v: Vec<f64>,
}

/// Optimizer state: first/second moment slots per named parameter plus the
/// shared step counter (incremented once per `step` call).
pub struct AdamState {
    cfg: AdamConfig,
    steps: u64,
    slots: HashMap<String, Moments>,
}

impl AdamState {
    pub fn new(cfg: AdamConfig) -> Self {
        AdamState {
            cfg,
            steps: 0,
            slots: HashMap::new(),
        }
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn config(&self) -> AdamConfig {
        self.cfg
    }

    /// One update over every parameter. Consumes (clears) each parameter's
    /// gradient; a parameter whose gradient is all zeros is left unchanged.
    /// A parameter with no gradient at all is an error: the caller forgot to
    /// run backward or harvest.
    pub fn step<'a>(
        &mut self,
        params: impl IntoIterator<Item = (&'a str, &'a mut Tensor)>,
    ) -> Result<(), NumError> {
        self.steps += 1;
        let t = self.steps as i32;
        let c1 = 1.0 - self.cfg.beta1.powi(t);
        let c2 = 1.0 - self.cfg.beta2.powi(t);
        for (name, p) in params {
            let g = p.grad.take().ok_or_else(|| NumError::MissingGrad {
                name: name.to_string(),
            })?;
            if g.len() != p.data.len() {
                return Err(NumError::LengthMismatch {
                    op: "adam_step",
                    len: g.len(),
                    shape: p.shape,
                });
            }
            let slot = self.slots.entry(name.to_string()).or_insert_with(|| Moments {
                m: vec![0.0; g.len()],
                v: vec![0.0; g.len()],
            });
            if slot.m.len() != g.len() {
                return Err(NumError::LengthMismatch {
                    op: "adam_step",
                    len: slot.m.len(),
                    shape: p.shape,
                });
            }
            for i in 0..g.len() {
                slot.m[i] = self.cfg.beta1 * slot.m[i] + (1.0 - self.cfg.beta1) * g[i];
                slot.v[i] = self.cfg.beta2 * slot.v[i] + (1.0 - self.cfg.beta2) * g[i] * g[i];
                let m_hat = slot.m[i] / c1;
                let v_hat = slot.v[i] / c2;
                p.data[i] -= self.cfg.lr * m_hat / (v_hat.sqrt() + self.cfg.epsilon);
            }
        }
        Ok(())
    }
}
