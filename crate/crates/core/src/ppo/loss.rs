/// Per-sample clipped surrogate `min(ρA, clip(ρ, 1-ε, 1+ε)A)` and its
/// derivative with respect to `ρ`.
pub fn surrogate(ratio: f64, advantage: f64, eps: f64) -> (f64, f64) {
    let unclipped = ratio * advantage;
    let clipped = ratio.clamp(1.0 - eps, 1.0 + eps) * advantage;
    if unclipped <= clipped {
        (unclipped, advantage)
    } else {
        (clipped, 0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolicyLoss {
    pub loss: f64,
    /// Samples dropped for a non-finite ratio.
    pub excluded: usize,
    /// Fraction of included samples with `|ρ - 1| > ε`.
    pub clip_frac: f64,
}

/// `-mean(min(ρA, clip(ρ)A))` with `ρ = exp(new - old)`.
pub fn clipped_policy_loss(new: &[f64], old: &[f64], advantages: &[f64], eps: f64) -> PolicyLoss {
    assert!(new.len() == old.len() && new.len() == advantages.len(), "policy loss batch lengths");
    let mut total = 0.0;
    let mut used = 0usize;
    let mut clipped = 0usize;
    for ((n, o), a) in new.iter().zip(old).zip(advantages) {
        let ratio = (n - o).exp();
        if !ratio.is_finite() || !a.is_finite() {
            continue;
        }
        used += 1;
        if (ratio - 1.0).abs() > eps {
            clipped += 1;
        }
        total += surrogate(ratio, *a, eps).0;
    }
    let denom = used.max(1) as f64;
    PolicyLoss {
        loss: -total / denom,
        excluded: new.len() - used,
        clip_frac: clipped as f64 / denom,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clip_arithmetic() {
        assert_eq!(surrogate(2.0, 1.0, 0.2).0, 1.2);
        assert_eq!(surrogate(2.0, 1.0, 0.2).1, 0.0);
        assert_eq!(surrogate(0.5, -1.0, 0.2), (-0.8, 0.0));
        assert_eq!(surrogate(0.5, 1.0, 0.2), (0.5, 1.0));
        assert_eq!(surrogate(1.1, -2.0, 0.2), (-2.2, -2.0));
    }

    #[test]
    fn equal_log_probs_give_minus_mean_advantage() {
        let adv = [0.5, -1.5, 1.0];
        let lp = [-1.0, 0.3, 2.0];
        let l = clipped_policy_loss(&lp, &lp, &adv, 0.2);
        assert!((l.loss - 0.0).abs() < 1e-15);
        assert_eq!(l.clip_frac, 0.0);
    }

    #[test]
    fn non_finite_ratio_is_excluded() {
        let l = clipped_policy_loss(&[f64::NAN, 0.0], &[0.0, 0.0], &[1.0, 2.0], 0.2);
        assert_eq!(l.excluded, 1);
        assert_eq!(l.loss, -2.0);
    }
}
