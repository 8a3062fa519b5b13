//! Run configuration: profile defaults, file overrides, validation.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::HarnessError;
use crate::agent::AgentConfig;
use crate::dynamics::ShipConfig;
use crate::env::EnvConfig;
use crate::ppo::TrainConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    /// Full-size network and 3000-step episodes.
    Paper,
    /// Small network and short episodes for a laptop.
    Desk,
}

impl fmt::Display for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Profile::Paper => "paper",
            Profile::Desk => "desk",
        })
    }
}

impl FromStr for Profile {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "paper" => Ok(Profile::Paper),
            "desk" => Ok(Profile::Desk),
            other => Err(format!("unknown profile `{other}` (expected paper or desk)")),
        }
    }
}

/// Harness-level settings that are not part of any module config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSettings {
    /// Periodic checkpoint interval in updates.
    pub checkpoint_every: u64,
    /// Validation interval in updates; 0 disables snapshot evaluation.
    pub eval_every: u64,
    /// Number of random interpolated validation starts.
    pub validation_starts: usize,
    pub validation_seed: u64,
}

impl Default for RunSettings {
    fn default() -> Self {
        Self {
            checkpoint_every: 50,
            eval_every: 20,
            validation_starts: 10,
            validation_seed: 7919,
        }
    }
}

/// Fully resolved configuration of one training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub profile: Profile,
    pub seed: u64,
    pub workers: usize,
    pub ship: ShipConfig,
    pub env: EnvConfig,
    pub agent: AgentConfig,
    pub ppo: TrainConfig,
    pub run: RunSettings,
}

/// Defaults for every section except the ship itself.
pub fn profile_defaults(profile: Profile) -> Value {
    let mut env = EnvConfig::default();
    let mut agent = AgentConfig::default();
    let mut ppo = TrainConfig::default();
    let mut run = RunSettings::default();
    let (dt, workers);
    match profile {
        Profile::Paper => {
            dt = 1.0;
            workers = 1;
        }
        Profile::Desk => {
            dt = 2.0;
            env.max_steps = 600;
            agent.hl_size = 32;
            agent.lstm_size = 64;
            agent.history_len = 8;
            // Tuned on the representative ship.
            workers = 8;
            ppo.episodes = 2000;
            ppo.minibatch_size = 256;
            ppo.entropy_coef = 0.0;
            ppo.lr_anneal = true;
            run.eval_every = 10;
        }
    }
    json!({
        "profile": profile,
        "workers": workers,
        "ship": { "integrator": { "dt": dt } },
        "env": env,
        "agent": agent,
        "ppo": ppo,
        "run": run,
    })
}

/// Recursively merge `over` into `base`. Objects merge key by key; any other
/// value replaces.
pub fn deep_merge(base: &mut Value, over: Value) {
    match (base, over) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => deep_merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

fn read_json(path: &Path) -> Result<Value, HarnessError> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))
}

/// Overrides given on the command line.
#[derive(Debug, Clone, Default)]
pub struct CliOverrides {
    pub profile: Option<Profile>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
}

/// Resolve a config file into a validated [`RunConfig`].
///
/// Precedence, lowest first: profile defaults, the file named by
/// `ship_file` (relative to the config), the config file, the command line.
pub fn load_run_config(path: &Path, cli: &CliOverrides) -> Result<RunConfig, HarnessError> {
    let mut file = read_json(path)?;
    let obj = file
        .as_object_mut()
        .ok_or_else(|| HarnessError::Config(format!("{}: top level must be an object", path.display())))?;

    let profile = match (cli.profile, obj.get("profile")) {
        (Some(p), _) => p,
        (None, Some(v)) => serde_json::from_value(v.clone())
            .map_err(|e| HarnessError::Config(format!("profile: {e}")))?,
        (None, None) => Profile::Paper,
    };
    let mut merged = profile_defaults(profile);

    if let Some(ship_file) = obj.remove("ship_file") {
        let rel = ship_file
            .as_str()
            .ok_or_else(|| HarnessError::Config("ship_file must be a string".into()))?;
        let ship_path: PathBuf = path.parent().unwrap_or(Path::new(".")).join(rel);
        let ship = read_json(&ship_path)?;
        deep_merge(&mut merged, json!({ "ship": ship }));
    }
    deep_merge(&mut merged, file);
    merged["profile"] = json!(profile);
    if let Some(seed) = cli.seed {
        merged["seed"] = json!(seed);
    }
    if let Some(w) = cli.workers {
        merged["workers"] = json!(w);
    }
    from_value(merged)
}

/// Deserialize with the path of any missing or malformed key in the message.
pub fn from_value(value: Value) -> Result<RunConfig, HarnessError> {
    let config: RunConfig = serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        HarnessError::Config(format!("at `{path}`: {}", e.into_inner()))
    })?;
    config.validate()?;
    Ok(config)
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), HarnessError> {
        self.ship.validate().map_err(|e| HarnessError::Config(format!("ship: {e}")))?;
        self.env.validate().map_err(|e| HarnessError::Config(format!("env: {e}")))?;
        self.agent.validate().map_err(|e| HarnessError::Config(format!("agent: {e}")))?;
        self.ppo.validate().map_err(|e| HarnessError::Config(format!("ppo: {e}")))?;
        if self.workers == 0 {
            return Err(HarnessError::Config("workers must be >= 1".into()));
        }
        if self.run.checkpoint_every == 0 {
            return Err(HarnessError::Config("run.checkpoint_every must be >= 1".into()));
        }
        Ok(())
    }

    /// A complete desk-profile config around the built-in reference ship.
    pub fn reference(profile: Profile, seed: u64) -> Self {
        let mut v = profile_defaults(profile);
        deep_merge(&mut v, json!({ "ship": ShipConfig::reference(), "seed": seed }));
        v["ship"]["integrator"]["dt"] = profile_defaults(profile)["ship"]["integrator"]["dt"].clone();
        from_value(v).expect("reference config is valid")
    }
}
