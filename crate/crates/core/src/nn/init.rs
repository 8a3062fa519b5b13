use rand::Rng;
use rand_distr::StandardNormal;

/// Uniform in `±1/sqrt(cols)`, row-major `rows × cols`.
pub fn uniform_fan_in<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> Vec<f64> {
    let bound = 1.0 / (cols as f64).sqrt();
    (0..rows * cols)
        .map(|_| bound * (2.0 * rng.random::<f64>() - 1.0))
        .collect()
}

/// A random `n × n` orthogonal matrix (Gram-Schmidt on Gaussian rows).
pub fn orthogonal<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<f64> {
    let mut m: Vec<f64> = (0..n * n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    for i in 0..n {
        // Two passes of modified Gram-Schmidt for numerical orthogonality.
        for _ in 0..2 {
            for j in 0..i {
                let proj: f64 = (0..n).map(|k| m[i * n + k] * m[j * n + k]).sum();
                for k in 0..n {
                    m[i * n + k] -= proj * m[j * n + k];
                }
            }
        }
        let norm: f64 = (0..n).map(|k| m[i * n + k] * m[i * n + k]).sum::<f64>().sqrt();
        for k in 0..n {
            m[i * n + k] /= norm;
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn orthogonal_rows() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 16;
        let m = orthogonal(&mut rng, n);
        for i in 0..n {
            for j in 0..n {
                let d: f64 = (0..n).map(|k| m[i * n + k] * m[j * n + k]).sum();
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((d - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn fan_in_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let w = uniform_fan_in(&mut rng, 8, 25);
        assert!(w.iter().all(|x| x.abs() <= 0.2));
    }
}
