use super::PpoError;

/// Generalized advantage estimation over one contiguous window.
///
/// A `done` flag at step `t` cuts both the bootstrap from `t + 1` and the
/// advantage recursion. Returns `(advantages, returns)`.
pub fn compute_gae(
    rewards: &[f64],
    values: &[f64],
    dones: &[bool],
    bootstrap_value: f64,
    gamma: f64,
    lambda: f64,
) -> Result<(Vec<f64>, Vec<f64>), PpoError> {
    let n = rewards.len();
    if values.len() != n || dones.len() != n {
        return Err(PpoError::LengthMismatch(format!(
            "rewards {n}, values {}, dones {}",
            values.len(),
            dones.len()
        )));
    }
    let mut adv = vec![0.0; n];
    let mut next_adv = 0.0;
    let mut next_value = bootstrap_value;
    for t in (0..n).rev() {
        let live = if dones[t] { 0.0 } else { 1.0 };
        let delta = rewards[t] + gamma * next_value * live - values[t];
        next_adv = delta + gamma * lambda * live * next_adv;
        adv[t] = next_adv;
        next_value = values[t];
    }
    let returns = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    Ok((adv, returns))
}

/// Shift to zero mean and scale to unit (population) standard deviation.
pub fn normalize_advantages(adv: &mut [f64]) {
    if adv.len() < 2 {
        return;
    }
    let n = adv.len() as f64;
    let mean = adv.iter().sum::<f64>() / n;
    let var = adv.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n;
    let scale = 1.0 / (var.sqrt() + 1e-8);
    for a in adv.iter_mut() {
        *a = (*a - mean) * scale;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_step() {
        let (a, r) = compute_gae(&[1.0], &[0.0], &[false], 0.0, 1.0, 1.0).unwrap();
        assert_eq!(a, vec![1.0]);
        assert_eq!(r, vec![1.0]);
    }

    #[test]
    fn perfect_critic_has_zero_advantage() {
        let gamma = 0.9;
        let values = [3.0, 2.0, 1.5, 0.7];
        let boot = 0.2;
        let mut rewards = vec![0.0; 4];
        for t in 0..4 {
            let next = if t + 1 < 4 { values[t + 1] } else { boot };
            rewards[t] = values[t] - gamma * next;
        }
        let (a, _) = compute_gae(&rewards, &values, &[false; 4], boot, gamma, 0.95).unwrap();
        assert!(a.iter().all(|x| x.abs() < 1e-15));
    }

    #[test]
    fn done_cuts_bootstrap() {
        let (a, _) = compute_gae(&[1.0, 1.0], &[0.0, 0.0], &[true, false], 100.0, 1.0, 1.0).unwrap();
        assert_eq!(a, vec![1.0, 101.0]);
    }

    #[test]
    fn length_mismatch_is_error() {
        assert!(compute_gae(&[1.0], &[0.0, 1.0], &[false], 0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn normalization_moments() {
        let mut a: Vec<f64> = (0..50).map(|i| (i as f64).sqrt() * 3.0 - 2.0).collect();
        normalize_advantages(&mut a);
        let m = a.iter().sum::<f64>() / 50.0;
        let s = (a.iter().map(|x| (x - m).powi(2)).sum::<f64>() / 50.0).sqrt();
        assert!(m.abs() < 1e-10);
        assert!((s - 1.0).abs() < 1e-6);
        let mut one = vec![4.0];
        normalize_advantages(&mut one);
        assert_eq!(one, vec![4.0]);
    }
}
