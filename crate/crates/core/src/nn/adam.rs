use serde::{Deserialize, Serialize};

use super::{Grads, ParamStore};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 3e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AdamReport {
    /// Arrays left untouched because their gradient had a non-finite entry.
    pub rejected: usize,
}

/// One bias-corrected Adam step. Arrays with a non-finite gradient are
/// skipped (parameters and moments unchanged) and counted.
pub fn adam_update(store: &mut ParamStore, grads: &Grads, cfg: &AdamConfig) -> AdamReport {
    let (params, m, v, step, rejected_total) = store.adam_parts();
    assert_eq!(params.len(), grads.data.len(), "gradient layout does not match the store");
    *step += 1;
    let t = *step as i32;
    let bc1 = 1.0 - cfg.beta1.powi(t);
    let bc2 = 1.0 - cfg.beta2.powi(t);
    let mut report = AdamReport::default();
    for (k, p) in params.iter_mut().enumerate() {
        let g = &grads.data[k];
        assert_eq!(g.len(), p.value.len());
        if !g.iter().all(|x| x.is_finite()) {
            report.rejected += 1;
            continue;
        }
        let (mk, vk) = (&mut m[k], &mut v[k]);
        for i in 0..g.len() {
            mk[i] = cfg.beta1 * mk[i] + (1.0 - cfg.beta1) * g[i];
            vk[i] = cfg.beta2 * vk[i] + (1.0 - cfg.beta2) * g[i] * g[i];
            let m_hat = mk[i] / bc1;
            let v_hat = vk[i] / bc2;
            p.value[i] -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
        }
    }
    *rejected_total += report.rejected as u64;
    report
}

/// Scale gradients so their global L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_global_norm(grads: &mut Grads, max_norm: f64) -> f64 {
    let norm = grads.global_norm();
    if norm > max_norm && norm > 0.0 {
        grads.scale(max_norm / norm);
    }
    norm
}
