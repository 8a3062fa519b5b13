use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{write_string, HarnessError, RunConfig};
use crate::agent::Agent;
use crate::env::BerthingEnv;
use crate::ppo::TrainerState;

/// Bumped whenever the checkpoint layout changes incompatibly.
pub const CHECKPOINT_VERSION: u32 = 1;

/// Parameters, optimizer moments, normalizer statistics, RNG states and the
/// resolved configuration of a run at one update.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub config: RunConfig,
    pub trainer: TrainerState,
}

impl Checkpoint {
    pub fn new(config: RunConfig, trainer: TrainerState) -> Self {
        Self {
            version: CHECKPOINT_VERSION,
            config,
            trainer,
        }
    }

    pub fn to_json(&self) -> Result<String, HarnessError> {
        serde_json::to_string(self).map_err(|e| HarnessError::Checkpoint(e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<(), HarnessError> {
        write_string(path, &self.to_json()?)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        // Check the version before the full schema so old files get a clear message.
        let probe: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| HarnessError::Checkpoint(format!("{}: {e}", path.display())))?;
        match probe.get("version").and_then(|v| v.as_u64()) {
            Some(v) if v == u64::from(CHECKPOINT_VERSION) => {}
            Some(v) => {
                return Err(HarnessError::Checkpoint(format!(
                    "{}: version {v} is not supported (expected {CHECKPOINT_VERSION})",
                    path.display()
                )))
            }
            None => return Err(HarnessError::Checkpoint(format!("{}: no version field", path.display()))),
        }
        let ckpt: Checkpoint =
            serde_json::from_str(&text).map_err(|e| HarnessError::Checkpoint(format!("{}: {e}", path.display())))?;
        ckpt.config.validate()?;
        Ok(ckpt)
    }

    /// Rebuild the agent with the stored parameters and statistics.
    pub fn agent(&self) -> Result<Agent, HarnessError> {
        let env = self.env()?;
        // Initial values are overwritten by the restore below.
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(0);
        let mut agent = Agent::new(self.config.agent.clone(), env.model().limits(), &mut rng);
        agent
            .restore(self.trainer.params.clone(), self.trainer.normalizer.clone())
            .map_err(HarnessError::Checkpoint)?;
        Ok(agent)
    }

    pub fn env(&self) -> Result<BerthingEnv, HarnessError> {
        Ok(BerthingEnv::new(&self.config.ship, self.config.env.clone())?)
    }
}
