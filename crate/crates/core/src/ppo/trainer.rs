use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{train_update, PpoError, Record, RolloutBuffer, Segment, TrainConfig, TrainStats};
use crate::agent::{sample_action, Agent, AgentConfig, ObsNormalizer, StateHistory};
use crate::dynamics::ShipConfig;
use crate::env::{BerthingEnv, EnvConfig, Termination};
use crate::nn::{ParamStore, RecurrentState};
use crate::par::Execution;

pub const REWARD_COLUMNS: [&str; 5] = ["global_step", "episode", "step_reward", "episode_return", "smoothed"];
pub const STATS_COLUMNS: [&str; 6] = ["update_idx", "policy_loss", "value_loss", "entropy", "kl", "clip_frac"];

/// Coefficient of the exponential reward filter used for plotting.
pub const SMOOTHING: f64 = 0.99;

/// RNG stream ids derived from the run seed.
const STREAM_INIT: u64 = 0;
const STREAM_SHUFFLE: u64 = 1;
const STREAM_WORKERS: u64 = 16;

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardRow {
    pub global_step: u64,
    pub episode: u64,
    pub step_reward: f64,
    /// Return accumulated so far in this episode.
    pub episode_return: f64,
    pub smoothed: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSummary {
    pub episode: u64,
    pub worker: usize,
    pub steps: usize,
    pub episode_return: f64,
    pub final_d: f64,
    pub min_d: f64,
    pub termination: Termination,
}

pub enum TrainEvent<'a> {
    /// Reward rows of one merged rollout window, in global step order.
    Rewards(&'a [RewardRow]),
    EpisodeEnd(&'a EpisodeSummary),
    Update { stats: &'a TrainStats, trainer: &'a Trainer },
}

/// Everything a checkpoint needs to restore the learner and its RNG streams.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainerState {
    pub params: ParamStore,
    pub normalizer: ObsNormalizer,
    pub update_idx: u64,
    pub global_step: u64,
    pub episodes_done: u64,
    pub smoothed: Option<f64>,
    pub shuffle_rng: ChaCha8Rng,
    pub worker_rngs: Vec<[ChaCha8Rng; 2]>,
}

struct StepLog {
    local_episode: u64,
    reward: f64,
    episode_return: f64,
    end: Option<EpisodeSummary>,
}

struct Window {
    segment: Segment,
    features: Vec<Vec<f64>>,
    steps: Vec<StepLog>,
}

#[derive(Debug, Clone)]
struct Worker {
    index: usize,
    env: BerthingEnv,
    history: StateHistory,
    rec: RecurrentState,
    reset_rng: ChaCha8Rng,
    sample_rng: ChaCha8Rng,
    running: bool,
    local_episode: u64,
    episode_return: f64,
    episode_steps: usize,
    min_d: f64,
    /// Global id of the episode with `local_episode`, once assigned.
    global_episode: Option<(u64, u64)>,
}

impl Worker {
    fn collect(&mut self, agent: &Agent, n: usize) -> Result<Window, PpoError> {
        let mut records = Vec::with_capacity(n);
        let mut features = Vec::new();
        let mut steps = Vec::with_capacity(n);
        for _ in 0..n {
            if !self.running {
                let obs = self.env.reset(&mut self.reset_rng);
                self.history.clear();
                self.rec = agent.initial_state();
                let f = agent.encode(&obs);
                self.history.push(&f);
                features.push(f);
                self.running = true;
                self.local_episode += 1;
                self.episode_return = 0.0;
                self.episode_steps = 0;
                self.min_d = obs.d;
            }
            let input = agent.network_input(&self.history);
            let (out, next) = agent.forward(&input, &self.rec)?;
            let sample = sample_action(&out, agent.action_space(), &mut self.sample_rng);
            let step = self.env.step(sample.action)?;
            records.push(Record {
                input,
                rec: std::mem::replace(&mut self.rec, next),
                raw: sample.raw,
                log_prob: sample.log_prob,
                value: out.value,
                reward: step.reward,
                done: step.done,
            });
            self.episode_return += step.reward;
            self.episode_steps += 1;
            self.min_d = self.min_d.min(step.info.d);
            let f = agent.encode(&step.observation);
            self.history.push(&f);
            features.push(f);
            let end = step.done.then(|| {
                self.running = false;
                EpisodeSummary {
                    episode: self.local_episode,
                    worker: self.index,
                    steps: self.episode_steps,
                    episode_return: self.episode_return,
                    final_d: step.info.d,
                    min_d: self.min_d,
                    termination: step.info.termination.clone(),
                }
            });
            steps.push(StepLog {
                local_episode: self.local_episode,
                reward: step.reward,
                episode_return: self.episode_return,
                end,
            });
        }
        let bootstrap_value = if self.running {
            agent.forward(&agent.network_input(&self.history), &self.rec)?.0.value
        } else {
            0.0
        };
        Ok(Window {
            segment: Segment {
                records,
                bootstrap_value,
            },
            features,
            steps,
        })
    }
}

/// Owns the agent, the environments and the training counters.
#[derive(Debug, Clone)]
pub struct Trainer {
    agent: Agent,
    config: TrainConfig,
    workers: Vec<Worker>,
    shuffle_rng: ChaCha8Rng,
    exec: Execution,
    update_idx: u64,
    global_step: u64,
    episodes_started: u64,
    episodes_done: u64,
    smoothed: Option<f64>,
}

impl Trainer {
    /// Build a trainer with `workers` environments. All randomness derives
    /// from `seed`; bit-reproducibility is promised for one worker.
    pub fn new(
        agent_config: AgentConfig,
        ship: &ShipConfig,
        env_config: EnvConfig,
        config: TrainConfig,
        seed: u64,
        workers: usize,
        exec: Execution,
    ) -> Result<Self, PpoError> {
        config.validate()?;
        agent_config.validate().map_err(PpoError::InvalidConfig)?;
        if workers == 0 {
            return Err(PpoError::InvalidConfig("workers must be >= 1".into()));
        }
        let env = BerthingEnv::new(ship, env_config)?;
        let agent = Agent::new(agent_config, env.model().limits(), &mut stream(seed, STREAM_INIT));
        let workers = (0..workers)
            .map(|w| Worker {
                index: w,
                env: env.clone(),
                history: agent.new_history(),
                rec: agent.initial_state(),
                reset_rng: stream(seed, STREAM_WORKERS + 2 * w as u64),
                sample_rng: stream(seed, STREAM_WORKERS + 2 * w as u64 + 1),
                running: false,
                local_episode: 0,
                episode_return: 0.0,
                episode_steps: 0,
                min_d: f64::INFINITY,
                global_episode: None,
            })
            .collect();
        Ok(Self {
            agent,
            config,
            workers,
            shuffle_rng: stream(seed, STREAM_SHUFFLE),
            exec,
            update_idx: 0,
            global_step: 0,
            episodes_started: 0,
            episodes_done: 0,
            smoothed: None,
        })
    }

    pub fn agent(&self) -> &Agent {
        &self.agent
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn update_idx(&self) -> u64 {
        self.update_idx
    }

    pub fn global_step(&self) -> u64 {
        self.global_step
    }

    pub fn episodes_done(&self) -> u64 {
        self.episodes_done
    }

    pub fn is_finished(&self) -> bool {
        self.episodes_done >= self.config.episodes
    }

    /// A template environment (the first worker's), for evaluation.
    pub fn env(&self) -> &BerthingEnv {
        &self.workers[0].env
    }

    pub fn state(&self) -> TrainerState {
        TrainerState {
            params: self.agent.store().clone(),
            normalizer: self.agent.normalizer().clone(),
            update_idx: self.update_idx,
            global_step: self.global_step,
            episodes_done: self.episodes_done,
            smoothed: self.smoothed,
            shuffle_rng: self.shuffle_rng.clone(),
            worker_rngs: self
                .workers
                .iter()
                .map(|w| [w.reset_rng.clone(), w.sample_rng.clone()])
                .collect(),
        }
    }

    /// Collect one window on every worker and run one update.
    pub fn iterate<F>(&mut self, on_event: &mut F) -> Result<TrainStats, PpoError>
    where
        F: FnMut(TrainEvent<'_>) -> Result<(), String>,
    {
        let agent = &self.agent;
        let n = self.config.rollout_steps;
        let windows = self.exec.map_mut(&mut self.workers, |w| w.collect(agent, n));

        let mut buffer = RolloutBuffer::default();
        let mut rows = Vec::new();
        let mut ends = Vec::new();
        for (w, window) in windows.into_iter().enumerate() {
            let window = window?;
            for f in &window.features {
                self.agent.update_normalizer(f);
            }
            for step in window.steps {
                let worker = &mut self.workers[w];
                let episode = match worker.global_episode {
                    Some((local, global)) if local == step.local_episode => global,
                    _ => {
                        self.episodes_started += 1;
                        worker.global_episode = Some((step.local_episode, self.episodes_started));
                        self.episodes_started
                    }
                };
                self.global_step += 1;
                let s = match self.smoothed {
                    None => step.reward,
                    Some(s) => SMOOTHING * s + (1.0 - SMOOTHING) * step.reward,
                };
                self.smoothed = Some(s);
                rows.push(RewardRow {
                    global_step: self.global_step,
                    episode,
                    step_reward: step.reward,
                    episode_return: step.episode_return,
                    smoothed: s,
                });
                if let Some(mut end) = step.end {
                    end.episode = episode;
                    self.episodes_done += 1;
                    ends.push(end);
                }
            }
            buffer.segments.push(window.segment);
        }
        on_event(TrainEvent::Rewards(&rows)).map_err(PpoError::Hook)?;
        for end in &ends {
            on_event(TrainEvent::EpisodeEnd(end)).map_err(PpoError::Hook)?;
        }

        let mut cfg = self.config.clone();
        if cfg.lr_anneal {
            let left = 1.0 - self.episodes_done as f64 / cfg.episodes as f64;
            cfg.learning_rate *= left.max(0.0);
        }
        let mut stats = train_update(&mut self.agent, buffer, &cfg, &mut self.shuffle_rng, self.exec)?;
        self.update_idx += 1;
        stats.update_idx = self.update_idx;
        if stats.initial_ratio_max_dev > 1e-10 || stats.replay_mismatches > 0 {
            log::warn!(
                "update {}: rollout replay drifted (max |ratio - 1| = {:e}, {} value mismatches)",
                self.update_idx,
                stats.initial_ratio_max_dev,
                stats.replay_mismatches
            );
        }
        on_event(TrainEvent::Update { stats: &stats, trainer: self }).map_err(PpoError::Hook)?;
        Ok(stats)
    }

    /// Train until the configured number of episodes has completed.
    pub fn run<F>(&mut self, mut on_event: F) -> Result<(), PpoError>
    where
        F: FnMut(TrainEvent<'_>) -> Result<(), String>,
    {
        while !self.is_finished() {
            self.iterate(&mut on_event)?;
        }
        Ok(())
    }
}
