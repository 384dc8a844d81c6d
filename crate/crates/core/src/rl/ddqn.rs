use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{batch_gradient, check_finite, fit_normalization, scale, LinearSchedule, ReplayBuffer, RlError, TrainingLog, Transition};
use super::math::double_q_target;
use crate::data::TimeSeriesEvent;
use crate::ensemble::{argmax, EnsembleMode, EnsemblePolicy, RosterEntry};
use crate::env::{DoneReason, Episode, RewardConfig};
use crate::kinematics::KinematicsConfig;
use crate::models::{CarFollowingModel, HISTORY_LEN};
use crate::neural::{Adam, Mlp, OutputActivation};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DdqnConfig {
    pub lr: f64,
    pub gamma: f64,
    pub batch_size: usize,
    /// Transitions collected with uniformly random choices before learning.
    pub training_start: u64,
    pub buffer_size: usize,
    pub hidden: Vec<usize>,
    /// Environment steps between gradient updates.
    pub train_freq: u64,
    /// Environment steps between hard copies into the target network.
    pub target_update: u64,
    pub eps_initial: f64,
    pub eps_final: f64,
    /// Fraction of `total_steps` over which exploration decays linearly.
    pub eps_fraction: f64,
    pub total_steps: u64,
    /// Multiplies environment rewards before they enter the buffer.
    pub reward_scale: f64,
    pub seed: u64,
}

impl Default for DdqnConfig {
    fn default() -> Self {
        Self {
            lr: 3e-4,
            gamma: 0.99,
            batch_size: 4096,
            training_start: 200_000,
            buffer_size: 1_000_000,
            hidden: vec![64, 32],
            train_freq: 4,
            target_update: 250,
            eps_initial: 1.0,
            eps_final: 0.25,
            eps_fraction: 0.5,
            total_steps: 1_000_000,
            reward_scale: 1.0,
            seed: 0,
        }
    }
}

impl DdqnConfig {
    pub fn validate(&self) -> Result<(), RlError> {
        let bad = |m: &str| Err(RlError::Config(m.into()));
        if !(0.0..=1.0).contains(&self.eps_final) || !(0.0..=1.0).contains(&self.eps_initial) {
            return bad("exploration probabilities must lie in [0, 1]");
        }
        if self.training_start > self.buffer_size as u64 {
            return bad("training_start must not exceed buffer_size");
        }
        if self.batch_size == 0 || self.buffer_size == 0 || self.train_freq == 0 || self.target_update == 0 {
            return bad("batch_size, buffer_size, train_freq and target_update must be positive");
        }
        if !(0.0..=1.0).contains(&self.gamma) || !(self.lr > 0.0) {
            return bad("need gamma in [0, 1] and positive lr");
        }
        Ok(())
    }

    pub fn epsilon(&self) -> LinearSchedule {
        LinearSchedule {
            start: self.eps_initial,
            end: self.eps_final,
            horizon: (self.eps_fraction * self.total_steps as f64).round() as u64,
        }
    }
}

#[derive(Debug, Clone)]
pub struct DdqnOutcome {
    /// Greedy selector over the roster.
    pub policy: EnsemblePolicy,
    /// One row per finished episode.
    pub log: TrainingLog,
    /// How often each roster model was run during training.
    pub selection_counts: Vec<u64>,
}

pub const DDQN_LOG_COLUMNS: [&str; 6] = ["step", "episode", "cumulative_reward", "loss", "epsilon", "collided"];

/// Trains a Q-network that picks one roster model per step.
///
/// Episodes replay randomly drawn training events. Only collisions are
/// terminal; running out of data bootstraps like any other step.
pub fn train_ef_ddqn(
    events: &[TimeSeriesEvent],
    roster: Vec<RosterEntry>,
    cfg: &DdqnConfig,
    kin: &KinematicsConfig,
    reward: &RewardConfig,
) -> Result<DdqnOutcome, RlError> {
    cfg.validate()?;
    if events.is_empty() {
        return Err(RlError::NoEvents);
    }
    let k = roster.len();
    if k == 0 {
        return Err(RlError::Config("empty roster".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let norm = fit_normalization(events);
    let mut sizes = vec![3 * HISTORY_LEN];
    sizes.extend(&cfg.hidden);
    sizes.push(k);
    let mut online = Mlp::new(&sizes, OutputActivation::Linear, &mut rng)?;
    let mut target = online.clone();
    let mut adam = Adam::new(online.params().len(), cfg.lr);
    let mut buffer: ReplayBuffer<Transition<usize>> = ReplayBuffer::new(cfg.buffer_size);
    let eps = cfg.epsilon();
    let mut log = TrainingLog::new(&DDQN_LOG_COLUMNS);

    let mut counts = vec![0u64; k];
    let mut step: u64 = 0;
    let mut episode: u64 = 0;
    while step < cfg.total_steps {
        let event = &events[rng.gen_range(0..events.len())];
        let mut ep = Episode::new(event, *kin, *reward);
        let mut feats = ep.window().flat_features(&norm);
        let mut cum = 0.0;
        let (mut loss_sum, mut updates) = (0.0, 0u32);
        while !ep.is_done() && step < cfg.total_steps {
            let explore = step < cfg.training_start || rng.gen::<f64>() < eps.value(step);
            let action = if explore {
                rng.gen_range(0..k)
            } else {
                argmax(&online.predict(&feats)?)
            };
            counts[action] += 1;
            let acc = roster[action].model.acceleration(ep.window())?;
            let out = ep.step(acc)?;
            let next = ep.window().flat_features(&norm);
            cum += out.reward;
            buffer.push(Transition {
                state: std::mem::replace(&mut feats, next.clone()),
                action,
                reward: out.reward * cfg.reward_scale,
                next_state: next,
                terminal: out.done_reason == DoneReason::Collision,
            });
            step += 1;

            if step >= cfg.training_start && step % cfg.train_freq == 0 {
                let idx = buffer.sample(&mut rng, cfg.batch_size);
                let batch: Vec<&Transition<usize>> = idx.iter().map(|&i| buffer.get(i)).collect();
                let inv = 1.0 / batch.len() as f64;
                let (mut grads, loss) = batch_gradient(&batch, online.params().len(), |tr, g| {
                    let y = if tr.terminal {
                        tr.reward
                    } else {
                        double_q_target(
                            tr.reward,
                            false,
                            &online.predict(&tr.next_state)?,
                            &target.predict(&tr.next_state)?,
                            cfg.gamma,
                        )
                    };
                    let (q, cache) = online.forward(&tr.state)?;
                    let err = q[tr.action] - y;
                    let mut d = vec![0.0; k];
                    d[tr.action] = 2.0 * err;
                    online.backward_into(&cache, &d, g)?;
                    Ok(err * err)
                })?;
                scale(&mut grads, inv);
                check_finite(&grads, "Q-network gradient", step)?;
                let loss = loss * inv;
                if !loss.is_finite() {
                    return Err(RlError::NonFinite { what: "Q loss", step });
                }
                adam.step(online.params_mut(), &grads)?;
                loss_sum += loss;
                updates += 1;
            }
            if step % cfg.target_update == 0 {
                target.soft_update_from(&online, 1.0)?;
            }
        }
        episode += 1;
        log.push(vec![
            step as f64,
            episode as f64,
            cum,
            if updates > 0 { loss_sum / updates as f64 } else { 0.0 },
            eps.value(step),
            (ep.done_reason() == DoneReason::Collision) as u8 as f64,
        ]);
        log::debug!("ddqn episode {episode} step {step} reward {cum:.2}");
    }
    let policy = EnsemblePolicy::new(EnsembleMode::Discrete, online, norm, roster)?;
    Ok(DdqnOutcome {
        policy,
        log,
        selection_counts: counts,
    })
}
