//! Squashed Gaussian over normalized actions.
//!
//! A pre-squash sample `z ~ N(mu, exp(log_std))` maps to `a = tanh(z)` in
//! `[-1, 1]` per component and then affinely to physical commands. Log
//! densities are taken with respect to `a`, so they include the tanh
//! correction and not the constant affine factor.

use rand::Rng;
use rand_distr::StandardNormal;

use super::PolicyOutput;
use crate::dynamics::ActuatorLimits;
use crate::env::Action;

pub const LOG_STD_MIN: f64 = -5.0;
pub const LOG_STD_MAX: f64 = 2.0;

/// Guard keeping stored actions strictly inside the open tanh range.
const PRE_IMAGE_EPS: f64 = 1e-6;

const HALF_LOG_TWO_PI: f64 = 0.918_938_533_204_672_8;

/// Affine map between normalized `[-1, 1]²` actions and physical commands.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActionSpace {
    pub delta_max: f64,
    pub n_min: f64,
    pub n_max: f64,
}

impl ActionSpace {
    pub fn from_limits(limits: &ActuatorLimits) -> Self {
        Self {
            delta_max: limits.delta_max,
            n_min: limits.n_min,
            n_max: limits.n_max,
        }
    }

    fn n_mid_half(&self) -> (f64, f64) {
        (0.5 * (self.n_max + self.n_min), 0.5 * (self.n_max - self.n_min))
    }

    pub fn to_physical(&self, a: [f64; 2]) -> Action {
        let (mid, half) = self.n_mid_half();
        Action {
            delta_cmd: self.delta_max * a[0],
            n_cmd: mid + half * a[1],
        }
    }

    pub fn to_normalized(&self, action: &Action) -> [f64; 2] {
        let (mid, half) = self.n_mid_half();
        [action.delta_cmd / self.delta_max, (action.n_cmd - mid) / half]
    }

    /// Pre-squash values reproducing a physical action, clamped away from ±1.
    pub fn pre_image(&self, action: &Action) -> [f64; 2] {
        let lim = 1.0 - PRE_IMAGE_EPS;
        self.to_normalized(action).map(|a| a.clamp(-lim, lim).atanh())
    }
}

/// One draw from the policy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampledAction {
    pub action: Action,
    /// Pre-squash sample; store this for exact log-probability recomputation.
    pub raw: [f64; 2],
    pub log_prob: f64,
}

/// `ln(1 - tanh(z)²)` without cancellation for large `|z|`.
fn log_tanh_jacobian(z: f64) -> f64 {
    let z = z.abs();
    2.0 * (std::f64::consts::LN_2 - z - (-2.0 * z).exp().ln_1p())
}

/// Log density of the squashed sample `tanh(raw)`.
pub fn squashed_log_prob(out: &PolicyOutput, raw: [f64; 2], _space: &ActionSpace) -> f64 {
    (0..2)
        .map(|k| {
            let std = out.log_std[k].exp();
            let e = (raw[k] - out.mu[k]) / std;
            -0.5 * e * e - out.log_std[k] - HALF_LOG_TWO_PI - log_tanh_jacobian(raw[k])
        })
        .sum()
}

/// Gradients of [`squashed_log_prob`] w.r.t. `mu` and `log_std`.
pub fn log_prob_grad(out: &PolicyOutput, raw: [f64; 2]) -> ([f64; 2], [f64; 2]) {
    let mut d_mu = [0.0; 2];
    let mut d_ls = [0.0; 2];
    for k in 0..2 {
        let e = (raw[k] - out.mu[k]) / out.log_std[k].exp();
        d_mu[k] = e / out.log_std[k].exp();
        d_ls[k] = e * e - 1.0;
    }
    (d_mu, d_ls)
}

/// Entropy of the pre-squash Gaussian. Its gradient w.r.t. each log_std is 1.
pub fn gaussian_entropy(log_std: &[f64; 2]) -> f64 {
    log_std.iter().map(|l| 0.5 + HALF_LOG_TWO_PI + l).sum()
}

pub fn sample_action<R: Rng + ?Sized>(out: &PolicyOutput, space: &ActionSpace, rng: &mut R) -> SampledAction {
    let mut raw = [0.0; 2];
    for k in 0..2 {
        let eps: f64 = rng.sample(StandardNormal);
        raw[k] = out.mu[k] + out.log_std[k].exp() * eps;
    }
    SampledAction {
        action: space.to_physical(raw.map(f64::tanh)),
        raw,
        log_prob: squashed_log_prob(out, raw, space),
    }
}
