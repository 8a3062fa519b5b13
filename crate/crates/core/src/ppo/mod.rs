//! Proximal policy optimization for the recurrent agent.
//!
//! Rollouts are collected in fixed windows of `rollout_steps` per worker,
//! possibly spanning episode boundaries. Each window is turned into
//! advantages by GAE and consumed by several epochs of shuffled minibatch
//! updates with the clipped surrogate objective.

mod gae;
mod loss;
mod trainer;
mod update;

pub use gae::{compute_gae, normalize_advantages};
pub use loss::{clipped_policy_loss, surrogate, PolicyLoss};
pub use trainer::{
    EpisodeSummary, RewardRow, TrainEvent, Trainer, TrainerState, REWARD_COLUMNS, SMOOTHING, STATS_COLUMNS,
};
pub use update::{sample_loss, sample_loss_gradient, train_update, Record, RolloutBuffer, Segment, TrainStats};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::EnvError;
use crate::nn::NnError;

#[derive(Debug, Error)]
pub enum PpoError {
    #[error("length mismatch: {0}")]
    LengthMismatch(String),
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("rollout buffer is empty")]
    EmptyBuffer,
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error("event handler failed: {0}")]
    Hook(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub clip_epsilon: f64,
    pub gamma: f64,
    pub gae_lambda: f64,
    pub epochs: usize,
    pub minibatch_size: usize,
    pub value_coef: f64,
    pub entropy_coef: f64,
    pub learning_rate: f64,
    /// Decay the learning rate linearly to zero over the episode budget.
    pub lr_anneal: bool,
    /// Environment steps per worker between updates (N).
    pub rollout_steps: usize,
    pub max_grad_norm: f64,
    /// Stop after this many completed episodes (summed over workers).
    pub episodes: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            clip_epsilon: 0.2,
            gamma: 0.99,
            gae_lambda: 0.95,
            epochs: 10,
            minibatch_size: 32,
            value_coef: 0.5,
            entropy_coef: 0.01,
            learning_rate: 3e-4,
            lr_anneal: false,
            rollout_steps: 128,
            max_grad_norm: 0.5,
            episodes: 1000,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), PpoError> {
        let bad = |m: &str| Err(PpoError::InvalidConfig(m.to_string()));
        if !(self.clip_epsilon > 0.0 && self.clip_epsilon < 1.0) {
            return bad("clip_epsilon must lie in (0, 1)");
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) || !(self.gae_lambda > 0.0 && self.gae_lambda <= 1.0) {
            return bad("gamma and gae_lambda must lie in (0, 1]");
        }
        if self.epochs == 0 || self.minibatch_size == 0 || self.rollout_steps == 0 || self.episodes == 0 {
            return bad("epochs, minibatch_size, rollout_steps and episodes must be >= 1");
        }
        // A zero learning rate is the null-control setting.
        if !(self.learning_rate >= 0.0) || !(self.value_coef >= 0.0) || !(self.entropy_coef >= 0.0) {
            return bad("learning_rate, value_coef and entropy_coef must be >= 0");
        }
        if !(self.max_grad_norm > 0.0) {
            return bad("max_grad_norm must be > 0");
        }
        Ok(())
    }
}
