//! Adam with bias correction and the warmup/decay learning-rate schedule.

use super::{NeuralError, Parameter};
use std::collections::BTreeMap;

#[derive(Debug, Clone)]
struct Moments {
    m: Vec<f64>,
    v: Vec<f64>,
}

/// Adam optimizer state: per-parameter moment buffers and the step counter.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step: u64,
    moments: BTreeMap<String, Moments>,
}

impl AdamState {
    /// Front-end defaults (β2 = 0.98).
    pub fn frontend() -> Self {
        AdamState::new(0.9, 0.98, 1e-9)
    }

    /// Vocoder defaults (β2 = 0.999).
    pub fn vocoder() -> Self {
        AdamState::new(0.9, 0.999, 1e-9)
    }

    pub fn new(beta1: f64, beta2: f64, eps: f64) -> Self {
        AdamState { beta1, beta2, eps, step: 0, moments: BTreeMap::new() }
    }

    /// One bias-corrected update over every trainable parameter.
    ///
    /// Any non-finite gradient aborts the whole step before touching values,
    /// naming the offending parameter.
    pub fn update(
        &mut self,
        params: Vec<&mut Parameter>,
        lr: f64,
    ) -> Result<(), NeuralError> {
        for p in params.iter() {
            if p.trainable && !p.tensor.has_finite_grad() {
                return Err(NeuralError::NonFiniteGradient(p.name.clone()));
            }
        }
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        for p in params {
            if !p.trainable {
                continue;
            }
            let n = p.tensor.len();
            let entry = self
                .moments
                .entry(p.name.clone())
                .or_insert_with(|| Moments { m: vec![0.0; n], v: vec![0.0; n] });
            assert_eq!(entry.m.len(), n, "moment shape for {}", p.name);
            let grad = match p.tensor.grad() {
                Some(g) => g.to_vec(),
                None => continue,
            };
            let data = p.tensor.data_mut();
            for i in 0..n {
                let g = grad[i];
                entry.m[i] = self.beta1 * entry.m[i] + (1.0 - self.beta1) * g;
                entry.v[i] = self.beta2 * entry.v[i] + (1.0 - self.beta2) * g * g;
                let m_hat = entry.m[i] / bc1;
                let v_hat = entry.v[i] / bc2;
                data[i] -= lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
        Ok(())
    }
}

/// Warmup-then-decay rate: `dim^-0.5 * min(step^-0.5, step * warmup^-1.5)`.
pub fn noam_lr(step: u64, model_dim: usize, warmup: u64) -> f64 {
    assert!(step >= 1, "schedule starts at step 1");
    let s = step as f64;
    let w = warmup as f64;
    (model_dim as f64).powf(-0.5) * s.powf(-0.5).min(s * w.powf(-1.5))
}
