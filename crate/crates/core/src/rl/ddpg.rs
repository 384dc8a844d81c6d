use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{batch_gradient, check_finite, fit_normalization, scale, LinearSchedule, ReplayBuffer, RlError, TrainingLog, Transition};
use crate::data::TimeSeriesEvent;
use crate::env::{DoneReason, Episode, RewardConfig};
use crate::kinematics::KinematicsConfig;
use crate::models::{NetPolicy, DEFAULT_ACC_SCALE, HISTORY_LEN};
use crate::neural::{Adam, Mlp, Network, OutputActivation};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DdpgConfig {
    pub gamma: f64,
    pub lr: f64,
    pub batch_size: usize,
    /// Environment steps collected before the first update.
    pub training_start: u64,
    pub buffer_size: usize,
    /// Soft update ratio of both target networks.
    pub tau: f64,
    pub total_steps: u64,
    /// Exploration noise on the commanded acceleration, m/s², decayed
    /// linearly to `noise_final` over `total_steps`.
    pub noise_std: f64,
    pub noise_final: f64,
    pub hidden: Vec<usize>,
    /// Environment steps between updates.
    pub train_freq: u64,
    pub reward_scale: f64,
    pub seed: u64,
}

impl Default for DdpgConfig {
    fn default() -> Self {
        Self {
            gamma: 0.96,
            lr: 1e-3,
            batch_size: 256,
            training_start: 100_000,
            buffer_size: 1_000_000,
            tau: 0.005,
            total_steps: 1_000_000,
            noise_std: 0.4,
            noise_final: 0.0,
            hidden: vec![64, 32],
            train_freq: 1,
            reward_scale: 1.0,
            seed: 0,
        }
    }
}

impl DdpgConfig {
    pub fn validate(&self) -> Result<(), RlError> {
        let bad = |m: &str| Err(RlError::Config(m.into()));
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return bad("tau must lie in (0, 1]");
        }
        if self.batch_size == 0 || self.buffer_size == 0 || self.train_freq == 0 {
            return bad("batch_size, buffer_size and train_freq must be positive");
        }
        if !(self.noise_std >= 0.0 && self.noise_final >= 0.0) {
            return bad("noise must be non-negative");
        }
        if !(0.0..=1.0).contains(&self.gamma) || !(self.lr > 0.0) {
            return bad("need gamma in [0, 1] and positive lr");
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct DdpgOutcome {
    pub policy: NetPolicy,
    /// One row per finished episode.
    pub log: TrainingLog,
}

pub const DDPG_LOG_COLUMNS: [&str; 6] = ["step", "episode", "cumulative_reward", "critic_loss", "actor_loss", "noise_std"];

fn critic_input(state: &[f64], action_unit: f64) -> Vec<f64> {
    let mut x = Vec::with_capacity(state.len() + 1);
    x.extend_from_slice(state);
    x.push(action_unit);
    x
}

/// Trains a continuous acceleration policy with deterministic policy
/// gradients against the speed-tracking reward.
///
/// The actor's raw output `u` maps to `4·tanh(u)`; the critic sees the
/// window plus `tanh(u)`.
pub fn train_ddpg_lowlevel(
    events: &[TimeSeriesEvent],
    cfg: &DdpgConfig,
    kin: &KinematicsConfig,
    reward: &RewardConfig,
) -> Result<DdpgOutcome, RlError> {
    cfg.validate()?;
    if events.is_empty() {
        return Err(RlError::NoEvents);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let norm = fit_normalization(events);
    let n_in = 3 * HISTORY_LEN;
    let mut actor_sizes = vec![n_in];
    actor_sizes.extend(&cfg.hidden);
    actor_sizes.push(1);
    let mut critic_sizes = vec![n_in + 1];
    critic_sizes.extend(&cfg.hidden);
    critic_sizes.push(1);
    let mut actor = Mlp::new(&actor_sizes, OutputActivation::Linear, &mut rng)?;
    let mut critic = Mlp::new(&critic_sizes, OutputActivation::Linear, &mut rng)?;
    let mut actor_t = actor.clone();
    let mut critic_t = critic.clone();
    let mut actor_adam = Adam::new(actor.params().len(), cfg.lr);
    let mut critic_adam = Adam::new(critic.params().len(), cfg.lr);
    let mut buffer: ReplayBuffer<Transition<f64>> = ReplayBuffer::new(cfg.buffer_size);
    let noise = LinearSchedule {
        start: cfg.noise_std,
        end: cfg.noise_final,
        horizon: cfg.total_steps,
    };
    let scale_acc = DEFAULT_ACC_SCALE;
    let mut log = TrainingLog::new(&DDPG_LOG_COLUMNS);

    let mut step: u64 = 0;
    let mut episode: u64 = 0;
    while step < cfg.total_steps {
        let event = &events[rng.gen_range(0..events.len())];
        let mut ep = Episode::new(event, *kin, *reward);
        let mut feats = ep.window().flat_features(&norm);
        let mut cum = 0.0;
        let (mut closs_sum, mut aloss_sum, mut updates) = (0.0, 0.0, 0u32);
        while !ep.is_done() && step < cfg.total_steps {
            let raw = actor.predict(&feats)?[0];
            let sigma = noise.value(step);
            let jitter = if sigma > 0.0 { sigma * rng.sample::<f64, _>(StandardNormal) } else { 0.0 };
            let acc = (scale_acc * raw.tanh() + jitter).clamp(-scale_acc, scale_acc);
            let out = ep.step(acc)?;
            let next = ep.window().flat_features(&norm);
            cum += out.reward;
            buffer.push(Transition {
                state: std::mem::replace(&mut feats, next.clone()),
                action: acc / scale_acc,
                reward: out.reward * cfg.reward_scale,
                next_state: next,
                terminal: out.done_reason == DoneReason::Collision,
            });
            step += 1;

            if step >= cfg.training_start && step % cfg.train_freq == 0 {
                let idx = buffer.sample(&mut rng, cfg.batch_size);
                let batch: Vec<&Transition<f64>> = idx.iter().map(|&i| buffer.get(i)).collect();
                let inv = 1.0 / batch.len() as f64;

                let (mut gc, closs) = batch_gradient(&batch, critic.params().len(), |tr, g| {
                    let y = if tr.terminal {
                        tr.reward
                    } else {
                        let a_next = actor_t.predict(&tr.next_state)?[0].tanh();
                        tr.reward + cfg.gamma * critic_t.predict(&critic_input(&tr.next_state, a_next))?[0]
                    };
                    let (q, cache) = critic.forward(&critic_input(&tr.state, tr.action))?;
                    let err = q[0] - y;
                    critic.backward_into(&cache, &[2.0 * err], g)?;
                    Ok(err * err)
                })?;
                scale(&mut gc, inv);
                check_finite(&gc, "critic gradient", step)?;
                critic_adam.step(critic.params_mut(), &gc)?;

                let (mut ga, aloss) = batch_gradient(&batch, actor.params().len(), |tr, g| {
                    let (u, a_cache) = actor.forward(&tr.state)?;
                    let a = u[0].tanh();
                    let (q, c_cache) = critic.forward(&critic_input(&tr.state, a))?;
                    // input gradient only; the critic's parameter gradient is discarded
                    let mut local = vec![0.0; critic.params().len()];
                    let d_in = critic.backward_into(&c_cache, &[-1.0], &mut local)?;
                    let d_u = d_in[n_in] * (1.0 - a * a);
                    actor.backward_into(&a_cache, &[d_u], g)?;
                    Ok(-q[0])
                })?;
                scale(&mut ga, inv);
                check_finite(&ga, "actor gradient", step)?;
                actor_adam.step(actor.params_mut(), &ga)?;

                actor_t.soft_update_from(&actor, cfg.tau)?;
                critic_t.soft_update_from(&critic, cfg.tau)?;
                closs_sum += closs * inv;
                aloss_sum += aloss * inv;
                updates += 1;
            }
        }
        episode += 1;
        let mean = |s: f64| if updates > 0 { s / updates as f64 } else { 0.0 };
        log.push(vec![
            step as f64,
            episode as f64,
            cum,
            mean(closs_sum),
            mean(aloss_sum),
            noise.value(step),
        ]);
        log::debug!("ddpg episode {episode} step {step} reward {cum:.2}");
    }
    Ok(DdpgOutcome {
        policy: NetPolicy::new(Network::Mlp(actor), norm),
        log,
    })
}
