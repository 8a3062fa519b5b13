#![allow(dead_code)]

use berth_core::agent::{Agent, AgentConfig};
use berth_core::dynamics::ActuatorLimits;
use berth_core::nn::RecurrentState;
use berth_core::ppo::{sample_loss, sample_loss_gradient, Record, TrainConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Largest finite-difference disagreement seen in one draw. `max_rel` is
/// taken over components whose absolute error exceeds the floor.
#[derive(Debug, Clone, Copy, Default)]
pub struct GradCheck {
    pub max_rel: f64,
    pub max_abs: f64,
    pub failures: usize,
    pub checked: usize,
}

pub const FD_STEP: f64 = 1e-5;
pub const REL_TOL: f64 = 1e-4;
pub const ABS_FLOOR: f64 = 1e-6;

fn jitter(rng: &mut ChaCha8Rng, xs: &mut [f64], amp: f64) {
    for x in xs {
        *x += rng.random_range(-amp..amp);
    }
}

/// One random draw: random weights, input, recurrent state and sampled
/// action, with the stored log-probability set so the ratio sits inside
/// the clip band. Every analytic gradient entry is compared with a central
/// difference of the per-sample PPO loss.
pub fn gradient_check_draw(config: AgentConfig, seed: u64) -> GradCheck {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut agent = Agent::new(config.clone(), &ActuatorLimits::default(), &mut rng);
    let ids: Vec<_> = agent.store().ids().collect();
    let log_std = agent.log_std_id();
    for &id in &ids {
        if id == log_std {
            for v in agent.store_mut().get_mut(id) {
                *v = rng.random_range(-1.5..0.5);
            }
        } else {
            jitter(&mut rng, agent.store_mut().get_mut(id), 0.1);
        }
    }
    let size = config.lstm_size;
    let mut rec = RecurrentState::zeros(size);
    jitter(&mut rng, &mut rec.h, 0.5);
    jitter(&mut rng, &mut rec.c, 1.0);
    let input: Vec<f64> = (0..config.input_size()).map(|_| rng.random_range(-2.0..2.0)).collect();
    let raw = [rng.random_range(-1.5..1.5), rng.random_range(-1.5..1.5)];

    let cfg = TrainConfig::default();
    let mut record = Record {
        input,
        rec,
        raw,
        log_prob: 0.0,
        value: 0.0,
        reward: 0.0,
        done: false,
    };
    let out = agent.forward(&record.input, &record.rec).unwrap().0;
    let lp = berth_core::agent::squashed_log_prob(&out, raw, agent.action_space());
    record.log_prob = lp + rng.random_range(-0.08..0.08);
    let advantage = rng.random_range(-2.0..2.0);
    let ret = rng.random_range(-1.0..1.0);

    let mut grads = agent.store().zero_grads();
    sample_loss_gradient(&agent, &record, advantage, ret, &cfg, &mut grads).unwrap();

    let mut check = GradCheck::default();
    for &id in &ids {
        let analytic = grads.get(id).to_vec();
        for (k, &a) in analytic.iter().enumerate() {
            let orig = agent.store().get(id)[k];
            agent.store_mut().get_mut(id)[k] = orig + FD_STEP;
            let up = sample_loss(&agent, &record, advantage, ret, &cfg).unwrap();
            agent.store_mut().get_mut(id)[k] = orig - FD_STEP;
            let down = sample_loss(&agent, &record, advantage, ret, &cfg).unwrap();
            agent.store_mut().get_mut(id)[k] = orig;
            let fd = (up - down) / (2.0 * FD_STEP);
            let abs = (a - fd).abs();
            let rel = abs / a.abs().max(fd.abs()).max(f64::MIN_POSITIVE);
            check.checked += 1;
            if abs > ABS_FLOOR {
                check.max_rel = check.max_rel.max(rel);
            }
            if abs > ABS_FLOOR && rel > REL_TOL {
                check.failures += 1;
            }
            check.max_abs = check.max_abs.max(abs);
        }
    }
    check
}
