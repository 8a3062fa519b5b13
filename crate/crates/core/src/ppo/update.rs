use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{compute_gae, normalize_advantages, surrogate, PpoError, TrainConfig};
use crate::agent::{gaussian_entropy, log_prob_grad, squashed_log_prob, Agent, OutputGrad};
use crate::nn::{adam_update, clip_global_norm, AdamConfig, Grads, NnError, RecurrentState};
use crate::par::Execution;

/// Samples per gradient chunk. Chunks are reduced in index order so the
/// summation order never depends on scheduling.
const CHUNK: usize = 8;

/// One environment step as seen by the learner.
#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    /// Network input (normalized, flattened history) used at rollout time.
    pub input: Vec<f64>,
    /// Recurrent state fed into that forward pass.
    pub rec: RecurrentState,
    /// Pre-squash action sample.
    pub raw: [f64; 2],
    pub log_prob: f64,
    pub value: f64,
    pub reward: f64,
    pub done: bool,
}

/// A contiguous window from one worker plus the value of the state after it.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Segment {
    pub records: Vec<Record>,
    pub bootstrap_value: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RolloutBuffer {
    pub segments: Vec<Segment>,
}

impl RolloutBuffer {
    pub fn len(&self) -> usize {
        self.segments.iter().map(|s| s.records.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn records(&self) -> impl Iterator<Item = &Record> {
        self.segments.iter().flat_map(|s| s.records.iter())
    }
}

/// Summary of one call to [`train_update`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainStats {
    pub update_idx: u64,
    /// Means over all minibatches and epochs.
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    /// Estimate of KL(old || new), `mean((ρ - 1) - ln ρ)`.
    pub kl: f64,
    pub clip_frac: f64,
    /// Largest `|ρ - 1|` over the buffer before any parameter change.
    pub initial_ratio_max_dev: f64,
    /// Clip fraction over the buffer before any parameter change.
    pub initial_clip_frac: f64,
    /// Records whose replayed value differs bitwise from the rollout value.
    pub replay_mismatches: usize,
    /// Mean pre-clip gradient norm.
    pub grad_norm: f64,
    /// Parameter arrays skipped by Adam for non-finite gradients.
    pub rejected_arrays: usize,
    /// Samples dropped for non-finite ratios.
    pub excluded_samples: usize,
    pub samples: usize,
    /// Adam step size used for this update.
    pub learning_rate: f64,
}

struct SampleOut {
    objective: f64,
    value_err2: f64,
    entropy: f64,
    ratio: f64,
    excluded: bool,
}

fn sample_gradient(
    agent: &Agent,
    rec: &Record,
    advantage: f64,
    ret: f64,
    cfg: &TrainConfig,
    scale: f64,
    grads: &mut Grads,
) -> Result<SampleOut, NnError> {
    let (out, _, trace) = agent.forward_traced(&rec.input, &rec.rec)?;
    let log_prob = squashed_log_prob(&out, rec.raw, agent.action_space());
    let ratio = (log_prob - rec.log_prob).exp();
    let entropy = gaussian_entropy(&out.log_std);
    let err = out.value - ret;

    let mut d = OutputGrad {
        value: 2.0 * cfg.value_coef * err * scale,
        log_std: [-cfg.entropy_coef * scale; 2],
        ..Default::default()
    };
    let excluded = !ratio.is_finite() || !advantage.is_finite();
    let mut objective = 0.0;
    if !excluded {
        let (obj, d_ratio) = surrogate(ratio, advantage, cfg.clip_epsilon);
        objective = obj;
        let g = -d_ratio * ratio * scale;
        if g != 0.0 {
            let (d_mu, d_ls) = log_prob_grad(&out, rec.raw);
            for k in 0..2 {
                d.mu[k] = g * d_mu[k];
                d.log_std[k] += g * d_ls[k];
            }
        }
    }
    agent.backward(&trace, &d, grads)?;
    Ok(SampleOut {
        objective,
        value_err2: err * err,
        entropy,
        ratio,
        excluded,
    })
}

impl SampleOut {
    fn loss(&self, cfg: &TrainConfig) -> f64 {
        -self.objective + cfg.value_coef * self.value_err2 - cfg.entropy_coef * self.entropy
    }
}

/// Loss of a single record: negated clipped surrogate plus weighted value
/// error minus the entropy bonus. Adds its gradient into `grads`.
pub fn sample_loss_gradient(
    agent: &Agent,
    rec: &Record,
    advantage: f64,
    ret: f64,
    cfg: &TrainConfig,
    grads: &mut Grads,
) -> Result<f64, NnError> {
    Ok(sample_gradient(agent, rec, advantage, ret, cfg, 1.0, grads)?.loss(cfg))
}

/// Same loss as [`sample_loss_gradient`], forward pass only.
pub fn sample_loss(agent: &Agent, rec: &Record, advantage: f64, ret: f64, cfg: &TrainConfig) -> Result<f64, NnError> {
    let out = agent.forward(&rec.input, &rec.rec)?.0;
    let log_prob = squashed_log_prob(&out, rec.raw, agent.action_space());
    let ratio = (log_prob - rec.log_prob).exp();
    let objective = if ratio.is_finite() && advantage.is_finite() {
        surrogate(ratio, advantage, cfg.clip_epsilon).0
    } else {
        0.0
    };
    let err = out.value - ret;
    Ok(-objective + cfg.value_coef * err * err - cfg.entropy_coef * gaussian_entropy(&out.log_std))
}

/// Gradient of the total loss over one minibatch, summed chunk by chunk.
fn minibatch_gradient(
    agent: &Agent,
    records: &[&Record],
    batch: &[usize],
    adv: &[f64],
    ret: &[f64],
    cfg: &TrainConfig,
    exec: Execution,
) -> Result<(Grads, Vec<SampleOut>), NnError> {
    let scale = 1.0 / batch.len() as f64;
    let chunks: Vec<&[usize]> = batch.chunks(CHUNK).collect();
    let parts = exec.map(&chunks, |chunk| {
        let mut g = agent.store().zero_grads();
        let mut outs = Vec::with_capacity(chunk.len());
        for &i in chunk.iter() {
            outs.push(sample_gradient(agent, records[i], adv[i], ret[i], cfg, scale, &mut g)?);
        }
        Ok::<_, NnError>((g, outs))
    });
    let mut total = agent.store().zero_grads();
    let mut samples = Vec::with_capacity(batch.len());
    for part in parts {
        let (g, outs) = part?;
        total.add_assign(&g);
        samples.extend(outs);
    }
    Ok((total, samples))
}

/// Run `epochs` passes of shuffled minibatch updates over `buffer`.
///
/// The buffer is consumed. Advantages come from GAE per segment and are
/// normalized over the whole buffer.
pub fn train_update<R: Rng + ?Sized>(
    agent: &mut Agent,
    buffer: RolloutBuffer,
    cfg: &TrainConfig,
    rng: &mut R,
    exec: Execution,
) -> Result<TrainStats, PpoError> {
    if buffer.is_empty() {
        return Err(PpoError::EmptyBuffer);
    }
    let mut adv = Vec::with_capacity(buffer.len());
    let mut ret = Vec::with_capacity(buffer.len());
    for seg in &buffer.segments {
        let rewards: Vec<f64> = seg.records.iter().map(|r| r.reward).collect();
        let values: Vec<f64> = seg.records.iter().map(|r| r.value).collect();
        let dones: Vec<bool> = seg.records.iter().map(|r| r.done).collect();
        let (a, r) = compute_gae(&rewards, &values, &dones, seg.bootstrap_value, cfg.gamma, cfg.gae_lambda)?;
        adv.extend(a);
        ret.extend(r);
    }
    normalize_advantages(&mut adv);
    let records: Vec<&Record> = buffer.records().collect();
    let n = records.len();

    let mut stats = TrainStats {
        samples: n,
        learning_rate: cfg.learning_rate,
        ..Default::default()
    };

    // Replay check before any parameter change.
    let replay = exec.map(&records, |r| {
        agent.forward(&r.input, &r.rec).map(|(out, _)| {
            let lp = squashed_log_prob(&out, r.raw, agent.action_space());
            ((lp - r.log_prob).exp(), out.value.to_bits() != r.value.to_bits())
        })
    });
    let mut initial_clipped = 0usize;
    for item in replay {
        let (ratio, mismatch) = item?;
        let dev = (ratio - 1.0).abs();
        stats.initial_ratio_max_dev = stats.initial_ratio_max_dev.max(if dev.is_nan() { f64::INFINITY } else { dev });
        if !(dev <= cfg.clip_epsilon) {
            initial_clipped += 1;
        }
        stats.replay_mismatches += usize::from(mismatch);
    }
    stats.initial_clip_frac = initial_clipped as f64 / n as f64;

    let adam = AdamConfig {
        lr: cfg.learning_rate,
        ..Default::default()
    };
    let mut order: Vec<usize> = (0..n).collect();
    let mut minibatches = 0usize;
    let mut included = 0usize;
    let (mut kl, mut clipped) = (0.0, 0usize);
    for _ in 0..cfg.epochs {
        order.shuffle(rng);
        for batch in order.chunks(cfg.minibatch_size) {
            let (mut grads, outs) = minibatch_gradient(agent, &records, batch, &adv, &ret, cfg, exec)?;
            let m = batch.len() as f64;
            let mut policy = 0.0;
            for o in &outs {
                stats.value_loss += o.value_err2 / m;
                stats.entropy += o.entropy / m;
                if o.excluded {
                    stats.excluded_samples += 1;
                    continue;
                }
                policy -= o.objective / m;
                included += 1;
                kl += (o.ratio - 1.0) - o.ratio.ln();
                if (o.ratio - 1.0).abs() > cfg.clip_epsilon {
                    clipped += 1;
                }
            }
            stats.policy_loss += policy;
            stats.grad_norm += clip_global_norm(&mut grads, cfg.max_grad_norm);
            stats.rejected_arrays += adam_update(agent.store_mut(), &grads, &adam).rejected;
            minibatches += 1;
        }
    }
    let mb = minibatches as f64;
    stats.policy_loss /= mb;
    stats.value_loss /= mb;
    stats.entropy /= mb;
    stats.grad_norm /= mb;
    let inc = included.max(1) as f64;
    stats.kl = kl / inc;
    stats.clip_frac = clipped as f64 / inc;
    Ok(stats)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent::{sample_action, AgentConfig};
    use crate::dynamics::ActuatorLimits;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small_agent(seed: u64) -> Agent {
        let cfg = AgentConfig {
            hl_size: 8,
            lstm_size: 6,
            history_len: 2,
            ..Default::default()
        };
        Agent::new(cfg, &ActuatorLimits::default(), &mut ChaCha8Rng::seed_from_u64(seed))
    }

    /// A buffer of random inputs with actions sampled from `agent` itself.
    fn random_buffer(agent: &Agent, n: usize, seed: u64) -> RolloutBuffer {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let width = agent.config().input_size();
        let mut rec = agent.initial_state();
        let mut records = Vec::new();
        for t in 0..n {
            let input: Vec<f64> = (0..width).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
            let (out, next) = agent.forward(&input, &rec).unwrap();
            let s = sample_action(&out, agent.action_space(), &mut rng);
            records.push(Record {
                input,
                rec: std::mem::replace(&mut rec, next),
                raw: s.raw,
                log_prob: s.log_prob,
                value: out.value,
                reward: rng.random::<f64>() - 0.3,
                done: t % 37 == 36,
            });
        }
        RolloutBuffer {
            segments: vec![Segment {
                records,
                bootstrap_value: 0.1,
            }],
        }
    }

    #[test]
    fn first_pass_ratio_is_one() {
        let mut a = small_agent(1);
        let buf = random_buffer(&a, 64, 2);
        let s = train_update(&mut a, buf, &TrainConfig::default(), &mut ChaCha8Rng::seed_from_u64(3), Execution::Sequential)
            .unwrap();
        assert!(s.initial_ratio_max_dev < 1e-10);
        assert_eq!(s.initial_clip_frac, 0.0);
        assert_eq!(s.replay_mismatches, 0);
    }

    #[test]
    fn kl_after_one_update_is_small() {
        let mut a = small_agent(4);
        let buf = random_buffer(&a, 128, 5);
        let s = train_update(&mut a, buf, &TrainConfig::default(), &mut ChaCha8Rng::seed_from_u64(6), Execution::Sequential)
            .unwrap();
        assert!(s.kl.is_finite() && s.kl < 0.1, "{}", s.kl);
        assert!(s.policy_loss.is_finite() && s.value_loss.is_finite());
    }

    #[test]
    fn zero_advantage_moves_only_value_and_entropy_paths() {
        // Constant zero rewards with a zero critic give zero advantages; after
        // normalization they stay zero.
        let mut a = small_agent(7);
        let zero_value = a.store().find("value.weight").unwrap();
        a.store_mut().get_mut(zero_value).fill(0.0);
        let mut buf = random_buffer(&a, 32, 8);
        for r in &mut buf.segments[0].records {
            r.reward = 0.0;
            r.value = 0.0;
        }
        buf.segments[0].bootstrap_value = 0.0;
        let policy_w = a.store().find("policy.weight").unwrap();
        let before = a.store().get(policy_w).to_vec();
        let cfg = TrainConfig { epochs: 1, minibatch_size: 32, ..Default::default() };
        let s = train_update(&mut a, buf, &cfg, &mut ChaCha8Rng::seed_from_u64(9), Execution::Sequential).unwrap();
        assert_eq!(s.policy_loss, 0.0);
        assert_eq!(a.store().get(policy_w), &before[..]);
        let log_std = a.store().get(a.log_std_id());
        assert!(log_std.iter().all(|l| *l > -0.5), "entropy bonus raises log_std");
    }

    #[test]
    fn update_is_deterministic_in_both_modes() {
        let run = |exec| {
            let mut a = small_agent(10);
            let buf = random_buffer(&a, 96, 11);
            let s = train_update(&mut a, buf, &TrainConfig::default(), &mut ChaCha8Rng::seed_from_u64(12), exec).unwrap();
            (s, a.store().flat())
        };
        let seq = run(Execution::Sequential);
        assert_eq!(seq, run(Execution::Sequential));
        assert_eq!(seq, run(Execution::Parallel));
    }

    #[test]
    fn zero_learning_rate_keeps_parameters() {
        let mut a = small_agent(13);
        let before = a.store().flat();
        let buf = random_buffer(&a, 40, 14);
        let cfg = TrainConfig { learning_rate: 0.0, ..Default::default() };
        train_update(&mut a, buf, &cfg, &mut ChaCha8Rng::seed_from_u64(15), Execution::Sequential).unwrap();
        assert_eq!(a.store().flat(), before);
    }

    #[test]
    fn empty_buffer_is_error() {
        let mut a = small_agent(16);
        let r = train_update(&mut a, RolloutBuffer::default(), &TrainConfig::default(), &mut ChaCha8Rng::seed_from_u64(0), Execution::Sequential);
        assert!(matches!(r, Err(PpoError::EmptyBuffer)));
    }
}
