//! Recurrent actor-critic.
//!
//! Observations pass through running normalization into a fixed-length
//! history. The flattened history feeds a dense layer, then an LSTM cell,
//! then two heads: tanh-bounded action means and a scalar value. The policy
//! log standard deviation is a free parameter shared across states.

mod distribution;
mod history;

pub use distribution::{
    gaussian_entropy, log_prob_grad, sample_action, squashed_log_prob, ActionSpace, SampledAction, LOG_STD_MAX, LOG_STD_MIN,
};
pub use history::{ObsNormalizer, StateHistory};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::ActuatorLimits;
use crate::env::{Action, Observation};
use crate::nn::{
    check_len, orthogonal, uniform_fan_in, Activation, Dense, DenseTrace, Grads, Lstm, LstmTrace, NnError, ParamId,
    ParamStore, RecurrentState,
};

/// How the heading enters the feature vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PsiEncoding {
    /// `(sin ψ, cos ψ)`: continuous across the ±π wrap.
    SinCos,
    /// The wrapped angle itself.
    Raw,
}

impl PsiEncoding {
    pub fn features(self) -> usize {
        match self {
            PsiEncoding::SinCos => 8,
            PsiEncoding::Raw => 7,
        }
    }

    pub fn encode(self, obs: &Observation) -> Vec<f64> {
        match self {
            PsiEncoding::SinCos => {
                let (s, c) = obs.psi.sin_cos();
                vec![obs.eta, obs.xi, obs.d, s, c, obs.u, obs.v, obs.r]
            }
            PsiEncoding::Raw => obs.to_array().to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AgentConfig {
    pub hl_size: usize,
    pub lstm_size: usize,
    pub history_len: usize,
    pub log_std_init: f64,
    pub normalize_obs: bool,
    pub psi_encoding: PsiEncoding,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            hl_size: 64,
            lstm_size: 256,
            history_len: 128,
            log_std_init: -0.5,
            normalize_obs: true,
            psi_encoding: PsiEncoding::SinCos,
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.hl_size == 0 || self.lstm_size == 0 || self.history_len == 0 {
            return Err("agent sizes must be >= 1".into());
        }
        if !(LOG_STD_MIN..=LOG_STD_MAX).contains(&self.log_std_init) {
            return Err(format!("log_std_init must lie in [{LOG_STD_MIN}, {LOG_STD_MAX}]"));
        }
        Ok(())
    }

    pub fn input_size(&self) -> usize {
        self.history_len * self.psi_encoding.features()
    }
}

/// Network outputs for one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolicyOutput {
    /// Means of the pre-squash Gaussian for (rudder, propeller), in [-1, 1].
    pub mu: [f64; 2],
    /// Effective log standard deviations, clamped to [LOG_STD_MIN, LOG_STD_MAX].
    pub log_std: [f64; 2],
    pub value: f64,
}

/// Upstream gradients on the outputs of one forward pass.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct OutputGrad {
    pub mu: [f64; 2],
    pub log_std: [f64; 2],
    pub value: f64,
}

/// Everything [`Agent::backward`] needs from a forward pass.
#[derive(Debug, Clone)]
pub struct AgentTrace {
    trunk: DenseTrace,
    lstm: LstmTrace,
    policy: DenseTrace,
    value: DenseTrace,
    log_std_raw: [f64; 2],
}

/// Log-probability, value and entropy of a stored action under the current parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActionEval {
    pub log_prob: f64,
    pub value: f64,
    pub entropy: f64,
}

#[derive(Debug, Clone)]
pub struct Agent {
    config: AgentConfig,
    space: ActionSpace,
    store: ParamStore,
    trunk: Dense,
    lstm: Lstm,
    policy: Dense,
    value: Dense,
    log_std: ParamId,
    normalizer: ObsNormalizer,
}

impl Agent {
    pub fn new<R: Rng + ?Sized>(config: AgentConfig, limits: &ActuatorLimits, rng: &mut R) -> Self {
        let input = config.input_size();
        let (hl, n) = (config.hl_size, config.lstm_size);
        let mut store = ParamStore::new();

        let trunk_w = uniform_fan_in(rng, hl, input);
        let trunk = Dense::register(&mut store, "trunk", input, hl, Activation::Tanh, trunk_w);

        let w_input = uniform_fan_in(rng, 4 * n, hl);
        let mut w_hidden = Vec::with_capacity(4 * n * n);
        for _ in 0..4 {
            w_hidden.extend(orthogonal(rng, n));
        }
        let lstm = Lstm::register(&mut store, "lstm", hl, n, w_input, w_hidden);

        let policy_w = uniform_fan_in(rng, 2, n).into_iter().map(|w| 0.01 * w).collect();
        let policy = Dense::register(&mut store, "policy", n, 2, Activation::Tanh, policy_w);
        let value_w = uniform_fan_in(rng, 1, n);
        let value = Dense::register(&mut store, "value", n, 1, Activation::Linear, value_w);
        let log_std = store.add("log_std", 2, 1, vec![config.log_std_init; 2]);

        let normalizer = ObsNormalizer::new(config.psi_encoding.features());
        Self {
            config,
            space: ActionSpace::from_limits(limits),
            store,
            trunk,
            lstm,
            policy,
            value,
            log_std,
            normalizer,
        }
    }

    pub fn config(&self) -> &AgentConfig {
        &self.config
    }

    pub fn action_space(&self) -> &ActionSpace {
        &self.space
    }

    pub fn store(&self) -> &ParamStore {
        &self.store
    }

    pub fn store_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    pub fn normalizer(&self) -> &ObsNormalizer {
        &self.normalizer
    }

    /// Replace parameters and normalizer statistics (checkpoint restore).
    pub fn restore(&mut self, store: ParamStore, normalizer: ObsNormalizer) -> Result<(), String> {
        if !self.store.same_layout(&store) {
            return Err("parameter layout does not match the agent configuration".into());
        }
        if normalizer.features() != self.normalizer.features() {
            return Err("normalizer width does not match the agent configuration".into());
        }
        self.store = store;
        self.normalizer = normalizer;
        Ok(())
    }

    pub fn log_std_id(&self) -> ParamId {
        self.log_std
    }

    pub fn trunk_ids(&self) -> [ParamId; 5] {
        [self.trunk.weight, self.trunk.bias, self.lstm.w_input, self.lstm.w_hidden, self.lstm.bias]
    }

    pub fn initial_state(&self) -> RecurrentState {
        RecurrentState::zeros(self.config.lstm_size)
    }

    pub fn new_history(&self) -> StateHistory {
        StateHistory::new(self.config.history_len, self.config.psi_encoding.features())
    }

    /// Raw feature vector for one observation.
    pub fn encode(&self, obs: &Observation) -> Vec<f64> {
        self.config.psi_encoding.encode(obs)
    }

    /// Fold raw features into the running normalization statistics.
    pub fn update_normalizer(&mut self, raw: &[f64]) {
        if self.config.normalize_obs {
            self.normalizer.update(raw);
        }
    }

    /// Flattened network input for a history of raw features. Filled
    /// entries are normalized with the current statistics; padding stays zero.
    pub fn network_input(&self, history: &StateHistory) -> Vec<f64> {
        let f = history.features();
        let mut out = history.as_slice().to_vec();
        if !self.config.normalize_obs {
            return out;
        }
        let pad = history.len() - history.filled();
        for entry in out.chunks_exact_mut(f).skip(pad) {
            let z = self.normalizer.normalize(entry);
            entry.copy_from_slice(&z);
        }
        out
    }

    fn log_std_eff(&self) -> ([f64; 2], [f64; 2]) {
        let raw = self.store.get(self.log_std);
        let raw = [raw[0], raw[1]];
        (raw, [raw[0].clamp(LOG_STD_MIN, LOG_STD_MAX), raw[1].clamp(LOG_STD_MIN, LOG_STD_MAX)])
    }

    /// One recurrent step from a flattened history.
    pub fn forward(&self, history: &[f64], rec: &RecurrentState) -> Result<(PolicyOutput, RecurrentState), NnError> {
        let features = self.trunk.forward(&self.store, history)?;
        let next = self.lstm.step(&self.store, &features, rec)?;
        let mu = self.policy.forward(&self.store, &next.h)?;
        let value = self.value.forward(&self.store, &next.h)?;
        let (_, log_std) = self.log_std_eff();
        Ok((
            PolicyOutput {
                mu: [mu[0], mu[1]],
                log_std,
                value: value[0],
            },
            next,
        ))
    }

    pub fn forward_traced(
        &self,
        history: &[f64],
        rec: &RecurrentState,
    ) -> Result<(PolicyOutput, RecurrentState, AgentTrace), NnError> {
        let trunk = self.trunk.forward_traced(&self.store, history)?;
        let lstm = self.lstm.step_traced(&self.store, &trunk.output, rec)?;
        let policy = self.policy.forward_traced(&self.store, &lstm.next.h)?;
        let value = self.value.forward_traced(&self.store, &lstm.next.h)?;
        let (log_std_raw, log_std) = self.log_std_eff();
        let out = PolicyOutput {
            mu: [policy.output[0], policy.output[1]],
            log_std,
            value: value.output[0],
        };
        let next = lstm.next.clone();
        Ok((
            out,
            next,
            AgentTrace {
                trunk,
                lstm,
                policy,
                value,
                log_std_raw,
            },
        ))
    }

    /// Accumulate parameter gradients for upstream output gradients `d`.
    /// The incoming recurrent state is treated as a constant.
    pub fn backward(&self, trace: &AgentTrace, d: &OutputGrad, grads: &mut Grads) -> Result<(), NnError> {
        let n = self.config.lstm_size;
        let mut dh = self.policy.backward(&self.store, &trace.policy, &d.mu, grads)?;
        let dh_value = self.value.backward(&self.store, &trace.value, &[d.value], grads)?;
        for (a, b) in dh.iter_mut().zip(&dh_value) {
            *a += b;
        }
        let (d_features, _) = self.lstm.backward(&self.store, &trace.lstm, &dh, &vec![0.0; n], grads)?;
        self.trunk.backward(&self.store, &trace.trunk, &d_features, grads)?;
        let g = grads.get_mut(self.log_std);
        for k in 0..2 {
            if (LOG_STD_MIN..=LOG_STD_MAX).contains(&trace.log_std_raw[k]) {
                g[k] += d.log_std[k];
            }
        }
        Ok(())
    }

    /// Evaluate a stored pre-squash action.
    pub fn evaluate_raw(&self, history: &[f64], rec: &RecurrentState, raw: [f64; 2]) -> Result<ActionEval, NnError> {
        let (out, _) = self.forward(history, rec)?;
        Ok(ActionEval {
            log_prob: squashed_log_prob(&out, raw, &self.space),
            value: out.value,
            entropy: gaussian_entropy(&out.log_std),
        })
    }

    /// Evaluate physical actions; out-of-range actions are clamped before
    /// inverting the squash.
    pub fn evaluate_actions(
        &self,
        histories: &[&[f64]],
        recs: &[RecurrentState],
        actions: &[Action],
    ) -> Result<Vec<ActionEval>, NnError> {
        check_len("batch recurrent states", histories.len(), recs.len())?;
        check_len("batch actions", histories.len(), actions.len())?;
        histories
            .iter()
            .zip(recs)
            .zip(actions)
            .map(|((h, rec), a)| self.evaluate_raw(h, rec, self.space.pre_image(a)))
            .collect()
    }

    /// The mean action with the squash applied: used for evaluation.
    pub fn deterministic_action(&self, out: &PolicyOutput) -> Action {
        self.space.to_physical([out.mu[0].tanh(), out.mu[1].tanh()])
    }
}
