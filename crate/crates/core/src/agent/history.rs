use serde::{Deserialize, Serialize};

/// The last `len` feature vectors, oldest first, zero-padded at the front
/// until `len` pushes have happened.
#[derive(Debug, Clone, PartialEq)]
pub struct StateHistory {
    len: usize,
    features: usize,
    filled: usize,
    data: Vec<f64>,
}

impl StateHistory {
    pub fn new(len: usize, features: usize) -> Self {
        Self {
            len,
            features,
            filled: 0,
            data: vec![0.0; len * features],
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn features(&self) -> usize {
        self.features
    }

    /// Number of real (non-padding) entries.
    pub fn filled(&self) -> usize {
        self.filled
    }

    /// Drop the oldest entry and append `x`.
    ///
    /// # Panics
    /// If `x` does not have `features` entries.
    pub fn push(&mut self, x: &[f64]) {
        assert_eq!(x.len(), self.features, "history feature width");
        let f = self.features;
        self.data.copy_within(f.., 0);
        let end = self.data.len();
        self.data[end - f..].copy_from_slice(x);
        self.filled = (self.filled + 1).min(self.len);
    }

    pub fn clear(&mut self) {
        self.data.fill(0.0);
        self.filled = 0;
    }

    /// Flattened history, `len * features` values.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

/// Running per-feature mean and variance (Welford).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObsNormalizer {
    count: u64,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

const CLIP: f64 = 10.0;

impl ObsNormalizer {
    pub fn new(features: usize) -> Self {
        Self {
            count: 0,
            mean: vec![0.0; features],
            m2: vec![0.0; features],
        }
    }

    pub fn features(&self) -> usize {
        self.mean.len()
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn variance(&self) -> Vec<f64> {
        if self.count < 2 {
            return vec![1.0; self.mean.len()];
        }
        self.m2.iter().map(|m| m / (self.count - 1) as f64).collect()
    }

    pub fn update(&mut self, x: &[f64]) {
        if x.len() != self.mean.len() || x.iter().any(|v| !v.is_finite()) {
            return;
        }
        self.count += 1;
        let n = self.count as f64;
        for ((m, s), &v) in self.mean.iter_mut().zip(&mut self.m2).zip(x) {
            let d = v - *m;
            *m += d / n;
            *s += d * (v - *m);
        }
    }

    /// Standardize and clip to ±10.
    pub fn normalize(&self, x: &[f64]) -> Vec<f64> {
        let var = self.variance();
        x.iter()
            .zip(&self.mean)
            .zip(&var)
            .map(|((v, m), s)| ((v - m) / (s + 1e-8).sqrt()).clamp(-CLIP, CLIP))
            .collect()
    }
}
