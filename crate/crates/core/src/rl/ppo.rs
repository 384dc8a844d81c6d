use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::math::{clipped_surrogate, gae, normalize};
use super::{batch_gradient, check_finite, fit_normalization, scale, RlError, TrainingLog};
use crate::data::TimeSeriesEvent;
use crate::ensemble::{blend, softmax, EnsembleMode, EnsemblePolicy, RosterEntry};
use crate::env::{DoneReason, Episode, RewardConfig};
use crate::kinematics::KinematicsConfig;
use crate::models::{CarFollowingModel, HISTORY_LEN};
use crate::neural::{Adam, Mlp, OutputActivation};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PpoConfig {
    pub actor_lr: f64,
    pub critic_lr: f64,
    /// Decay both learning rates linearly to zero over `total_steps`.
    pub lr_decay: bool,
    pub gamma: f64,
    pub gae_lambda: f64,
    pub step_per_collect: usize,
    /// Passes over each collected batch.
    pub repeat: usize,
    pub minibatch: usize,
    pub hidden: Vec<usize>,
    pub clip_eps: f64,
    pub vf_coef: f64,
    pub ent_coef: f64,
    pub total_steps: u64,
    /// Initial log standard deviation of the logit distribution.
    pub init_log_std: f64,
    pub reward_scale: f64,
    pub seed: u64,
}

impl Default for PpoConfig {
    fn default() -> Self {
        Self {
            actor_lr: 1e-3,
            critic_lr: 1e-3,
            lr_decay: true,
            gamma: 0.99,
            gae_lambda: 0.95,
            step_per_collect: 5000,
            repeat: 4,
            minibatch: 2500,
            hidden: vec![64, 32],
            clip_eps: 0.2,
            vf_coef: 0.25,
            ent_coef: 0.01,
            total_steps: 1_000_000,
            init_log_std: 0.0,
            reward_scale: 1.0,
            seed: 0,
        }
    }
}

impl PpoConfig {
    pub fn validate(&self) -> Result<(), RlError> {
        let bad = |m: &str| Err(RlError::Config(m.into()));
        if !(self.clip_eps > 0.0) {
            return bad("clip_eps must be positive");
        }
        if !(self.vf_coef >= 0.0 && self.ent_coef >= 0.0) {
            return bad("loss coefficients must be non-negative");
        }
        if self.step_per_collect == 0 || self.minibatch == 0 || self.repeat == 0 {
            return bad("step_per_collect, minibatch and repeat must be positive");
        }
        if !(0.0..=1.0).contains(&self.gamma) || !(0.0..=1.0).contains(&self.gae_lambda) {
            return bad("gamma and gae_lambda must lie in [0, 1]");
        }
        Ok(())
    }
}

/// Log-density of `z` under a diagonal Gaussian.
pub fn gaussian_log_prob(z: &[f64], mean: &[f64], log_std: &[f64]) -> f64 {
    const HALF_LN_TAU: f64 = 0.918_938_533_204_672_7;
    z.iter()
        .zip(mean)
        .zip(log_std)
        .map(|((z, m), ls)| {
            let u = (z - m) / ls.exp();
            -0.5 * u * u - ls - HALF_LN_TAU
        })
        .sum()
}

fn entropy(log_std: &[f64]) -> f64 {
    const HALF_LN_TAU_E: f64 = 1.418_938_533_204_672_7;
    log_std.iter().map(|ls| ls + HALF_LN_TAU_E).sum()
}

/// Worst simplex and convexity deviations seen while training.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimplexAudit {
    pub steps: u64,
    pub min_weight: f64,
    pub max_sum_error: f64,
    /// Steps whose blended command fell outside the ingredients' range.
    pub blend_violations: u64,
}

impl Default for SimplexAudit {
    fn default() -> Self {
        Self {
            steps: 0,
            min_weight: f64::INFINITY,
            max_sum_error: 0.0,
            blend_violations: 0,
        }
    }
}

impl SimplexAudit {
    pub fn record(&mut self, weights: &[f64], accs: &[f64], acc: f64) {
        self.steps += 1;
        for w in weights {
            self.min_weight = self.min_weight.min(*w);
        }
        self.max_sum_error = self.max_sum_error.max((weights.iter().sum::<f64>() - 1.0).abs());
        let lo = accs.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = accs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !(acc >= lo && acc <= hi) {
            self.blend_violations += 1;
        }
    }

    pub fn holds(&self) -> bool {
        self.min_weight >= 0.0 && self.max_sum_error <= 1e-6 && self.blend_violations == 0
    }
}

#[derive(Debug, Clone)]
pub struct PpoOutcome {
    /// Deterministic blending policy (softmax of the mean logits).
    pub policy: EnsemblePolicy,
    pub log_std: Vec<f64>,
    /// One row per finished episode.
    pub log: TrainingLog,
    pub audit: SimplexAudit,
}

pub const PPO_LOG_COLUMNS: [&str; 6] = ["step", "episode", "cumulative_reward", "policy_loss", "value_loss", "lr"];

#[derive(Debug, Clone)]
pub(crate) struct PpoSample {
    pub feats: Vec<f64>,
    pub z: Vec<f64>,
    pub logp: f64,
    pub adv: f64,
    pub ret: f64,
}

/// Mean gradient of `−L_clip − c2·entropy` over `batch` with respect to the
/// actor parameters followed by the log standard deviations.
pub(crate) fn actor_gradient(
    actor: &Mlp,
    log_std: &[f64],
    batch: &[&PpoSample],
    clip_eps: f64,
    ent_coef: f64,
    step: u64,
) -> Result<(Vec<f64>, f64), RlError> {
    let na = actor.params().len();
    let k = log_std.len();
    let var: Vec<f64> = log_std.iter().map(|ls| (2.0 * ls).exp()).collect();
    let (mut g, loss) = batch_gradient(batch, na + k, |s, g| {
        let (mu, cache) = actor.forward(&s.feats)?;
        let ratio = (gaussian_log_prob(&s.z, &mu, log_std) - s.logp).exp();
        if !ratio.is_finite() {
            return Err(RlError::NonFinite { what: "probability ratio", step });
        }
        let (surr, d_surr) = clipped_surrogate(ratio, s.adv, clip_eps);
        // d(-surr)/d(logp) = -(d surr / d ratio) * ratio
        let d_logp = -d_surr * ratio;
        if d_logp != 0.0 {
            let d_mu: Vec<f64> = (0..k).map(|i| d_logp * (s.z[i] - mu[i]) / var[i]).collect();
            actor.backward_into(&cache, &d_mu, &mut g[..na])?;
            for i in 0..k {
                let u2 = (s.z[i] - mu[i]).powi(2) / var[i];
                g[na + i] += d_logp * (u2 - 1.0);
            }
        }
        Ok(-surr)
    })?;
    let inv = 1.0 / batch.len() as f64;
    scale(&mut g, inv);
    for gi in &mut g[na..] {
        *gi -= ent_coef;
    }
    Ok((g, loss * inv - ent_coef * entropy(log_std)))
}

fn critic_gradient(critic: &Mlp, batch: &[&PpoSample], vf_coef: f64) -> Result<(Vec<f64>, f64), RlError> {
    let (mut g, loss) = batch_gradient(batch, critic.params().len(), |s, g| {
        let (v, cache) = critic.forward(&s.feats)?;
        let err = v[0] - s.ret;
        critic.backward_into(&cache, &[2.0 * vf_coef * err], g)?;
        Ok(vf_coef * err * err)
    })?;
    let inv = 1.0 / batch.len() as f64;
    scale(&mut g, inv);
    Ok((g, loss * inv))
}

/// Trains a blending policy with the clipped surrogate objective.
///
/// The actor emits the mean of a diagonal Gaussian over k logits; a sampled
/// logit vector is squashed by softmax into blend weights. Episodes that run
/// out of data are truncated by folding `γ·V(s')` into the last reward.
pub fn train_ef_ppo(
    events: &[TimeSeriesEvent],
    roster: Vec<RosterEntry>,
    cfg: &PpoConfig,
    kin: &KinematicsConfig,
    reward: &RewardConfig,
) -> Result<PpoOutcome, RlError> {
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
    let mut actor_sizes = sizes.clone();
    actor_sizes.push(k);
    sizes.push(1);
    let mut actor = Mlp::new(&actor_sizes, OutputActivation::Linear, &mut rng)?;
    let mut critic = Mlp::new(&sizes, OutputActivation::Linear, &mut rng)?;
    let na = actor.params().len();
    // actor weights followed by the log standard deviations
    let mut actor_params: Vec<f64> = actor.params().to_vec();
    actor_params.extend(std::iter::repeat(cfg.init_log_std).take(k));
    let mut actor_adam = Adam::new(na + k, cfg.actor_lr);
    let mut critic_adam = Adam::new(critic.params().len(), cfg.critic_lr);

    let mut log = TrainingLog::new(&PPO_LOG_COLUMNS);
    let mut audit = SimplexAudit::default();
    let mut step: u64 = 0;
    let mut episode: u64 = 0;
    let mut last_losses = (0.0, 0.0);
    let mut ep = Episode::new(&events[rng.gen_range(0..events.len())], *kin, *reward);
    let mut cum = 0.0;

    while step < cfg.total_steps {
        let lr_frac = if cfg.lr_decay {
            1.0 - step as f64 / cfg.total_steps as f64
        } else {
            1.0
        };
        let log_std = actor_params[na..].to_vec();
        let std: Vec<f64> = log_std.iter().map(|l| l.exp()).collect();

        let mut feats_buf = Vec::with_capacity(cfg.step_per_collect);
        let mut z_buf = Vec::with_capacity(cfg.step_per_collect);
        let mut logp_buf = Vec::with_capacity(cfg.step_per_collect);
        let mut values = Vec::with_capacity(cfg.step_per_collect + 1);
        let mut rewards = Vec::with_capacity(cfg.step_per_collect);
        let mut dones = Vec::with_capacity(cfg.step_per_collect);
        while feats_buf.len() < cfg.step_per_collect && step < cfg.total_steps {
            let feats = ep.window().flat_features(&norm);
            let mu = actor.predict(&feats)?;
            let z: Vec<f64> = (0..k).map(|i| mu[i] + std[i] * rng.sample::<f64, _>(StandardNormal)).collect();
            let w = softmax(&z);
            let accs: Vec<f64> = roster
                .iter()
                .map(|r| r.model.acceleration(ep.window()))
                .collect::<Result<_, _>>()?;
            let acc = blend(&w, &accs);
            audit.record(&w, &accs, acc);
            let v = critic.predict(&feats)?[0];
            let out = ep.step(acc)?;
            step += 1;
            cum += out.reward;
            let mut r = out.reward * cfg.reward_scale;
            if out.done_reason == DoneReason::Exhausted {
                r += cfg.gamma * critic.predict(&ep.window().flat_features(&norm))?[0];
            }
            logp_buf.push(gaussian_log_prob(&z, &mu, &log_std));
            feats_buf.push(feats);
            z_buf.push(z);
            values.push(v);
            rewards.push(r);
            dones.push(out.done);
            if out.done {
                episode += 1;
                log.push(vec![
                    step as f64,
                    episode as f64,
                    cum,
                    last_losses.0,
                    last_losses.1,
                    cfg.actor_lr * lr_frac,
                ]);
                cum = 0.0;
                ep = Episode::new(&events[rng.gen_range(0..events.len())], *kin, *reward);
            }
        }
        let bootstrap = if dones.last().copied().unwrap_or(true) {
            0.0
        } else {
            critic.predict(&ep.window().flat_features(&norm))?[0]
        };
        values.push(bootstrap);
        let (mut adv, ret) = gae(&rewards, &values, &dones, cfg.gamma, cfg.gae_lambda);
        normalize(&mut adv);
        let samples: Vec<PpoSample> = (0..rewards.len())
            .map(|i| PpoSample {
                feats: std::mem::take(&mut feats_buf[i]),
                z: std::mem::take(&mut z_buf[i]),
                logp: logp_buf[i],
                adv: adv[i],
                ret: ret[i],
            })
            .collect();

        actor_adam.lr = cfg.actor_lr * lr_frac;
        critic_adam.lr = cfg.critic_lr * lr_frac;
        let mut order: Vec<usize> = (0..samples.len()).collect();
        let (mut pl, mut vl, mut n_mb) = (0.0, 0.0, 0);
        for _ in 0..cfg.repeat {
            order.shuffle(&mut rng);
            for chunk in order.chunks(cfg.minibatch) {
                let batch: Vec<&PpoSample> = chunk.iter().map(|&i| &samples[i]).collect();
                let (ga, lp) = actor_gradient(&actor, &actor_params[na..], &batch, cfg.clip_eps, cfg.ent_coef, step)?;
                let (gc, lv) = critic_gradient(&critic, &batch, cfg.vf_coef)?;
                check_finite(&ga, "actor gradient", step)?;
                check_finite(&gc, "critic gradient", step)?;
                actor_adam.step(&mut actor_params, &ga)?;
                critic_adam.step(critic.params_mut(), &gc)?;
                for ls in &mut actor_params[na..] {
                    *ls = ls.clamp(-5.0, 2.0);
                }
                actor.params_mut().copy_from_slice(&actor_params[..na]);
                pl += lp;
                vl += lv;
                n_mb += 1;
            }
        }
        last_losses = (pl / n_mb as f64, vl / n_mb as f64);
        log::debug!("ppo step {step}: policy loss {:.4}, value loss {:.4}", last_losses.0, last_losses.1);
    }
    let log_std = actor_params[na..].to_vec();
    let policy = EnsemblePolicy::new(EnsembleMode::Convex, actor, norm, roster)?;
    Ok(PpoOutcome {
        policy,
        log_std,
        log,
        audit,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{synthesize_events, SynthConfig};
    use crate::models::AnyModel;

    fn random_batch(actor: &Mlp, log_std: &[f64], n: usize, adv: impl Fn(usize) -> f64, seed: u64) -> Vec<PpoSample> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|i| {
                let feats: Vec<f64> = (0..actor.input_size()).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let mu = actor.predict(&feats).unwrap();
                let z: Vec<f64> = mu.iter().zip(log_std).map(|(m, l)| m + l.exp() * rng.sample::<f64, _>(StandardNormal)).collect();
                PpoSample {
                    logp: gaussian_log_prob(&z, &mu, log_std),
                    feats,
                    z,
                    adv: adv(i),
                    ret: 0.0,
                }
            })
            .collect()
    }

    #[test]
    fn log_prob_matches_scalar_density() {
        let lp = gaussian_log_prob(&[0.5], &[0.0], &[0.0]);
        let oracle = (1.0 / (2.0 * std::f64::consts::PI).sqrt() * (-0.125f64).exp()).ln();
        assert!((lp - oracle).abs() < 1e-14);
    }

    #[test]
    fn zero_advantage_leaves_policy_alone() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let actor = Mlp::new(&[6, 8, 3], OutputActivation::Linear, &mut rng).unwrap();
        let log_std = vec![-0.3, 0.1, 0.0];
        let batch = random_batch(&actor, &log_std, 20, |_| 0.0, 2);
        let refs: Vec<&PpoSample> = batch.iter().collect();
        let (g, _) = actor_gradient(&actor, &log_std, &refs, 0.2, 0.0, 0).unwrap();
        assert!(g.iter().all(|x| *x == 0.0));
    }

    #[test]
    fn unclipped_first_epoch_is_vanilla_policy_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let actor = Mlp::new(&[5, 6, 2], OutputActivation::Linear, &mut rng).unwrap();
        let log_std = vec![-0.2, 0.3];
        let batch = random_batch(&actor, &log_std, 12, |i| (i as f64 - 5.0) / 3.0, 4);
        let refs: Vec<&PpoSample> = batch.iter().collect();
        let (g_clip, _) = actor_gradient(&actor, &log_std, &refs, 0.2, 0.0, 0).unwrap();
        let (g_open, _) = actor_gradient(&actor, &log_std, &refs, f64::INFINITY, 0.0, 0).unwrap();
        assert_eq!(g_clip, g_open);
        // vanilla objective -(1/B) Σ A·log π, differentiated numerically
        let vanilla = |params: &[f64], ls: &[f64]| -> f64 {
            let net = Mlp::from_params(actor.sizes(), OutputActivation::Linear, params.to_vec()).unwrap();
            -batch
                .iter()
                .map(|s| s.adv * gaussian_log_prob(&s.z, &net.predict(&s.feats).unwrap(), ls))
                .sum::<f64>()
                / batch.len() as f64
        };
        let h = 1e-6;
        let na = actor.params().len();
        for i in (0..na).step_by(7) {
            let mut p = actor.params().to_vec();
            p[i] += h;
            let up = vanilla(&p, &log_std);
            p[i] -= 2.0 * h;
            let down = vanilla(&p, &log_std);
            let num = (up - down) / (2.0 * h);
            assert!((num - g_open[i]).abs() < 1e-6 * (1.0 + num.abs()), "param {i}: {num} vs {}", g_open[i]);
        }
        for j in 0..2 {
            let mut ls = log_std.clone();
            ls[j] += h;
            let up = vanilla(actor.params(), &ls);
            ls[j] -= 2.0 * h;
            let down = vanilla(actor.params(), &ls);
            let num = (up - down) / (2.0 * h);
            assert!((num - g_open[na + j]).abs() < 1e-6 * (1.0 + num.abs()));
        }
    }

    #[test]
    fn short_training_run_keeps_weights_on_the_simplex() {
        let synth = SynthConfig {
            n_events: 3,
            seed: 4,
            ..SynthConfig::default()
        };
        let kin = KinematicsConfig::default();
        let events = synthesize_events(&synth, &kin).unwrap();
        let roster = vec![
            RosterEntry::new("truth", AnyModel::Rule(synth.ground_truth)),
            RosterEntry::new("zero", AnyModel::Constant(0.0)),
            RosterEntry::new("brake", AnyModel::Constant(-1.0)),
        ];
        let cfg = PpoConfig {
            step_per_collect: 400,
            minibatch: 100,
            total_steps: 1200,
            hidden: vec![16, 8],
            seed: 8,
            ..PpoConfig::default()
        };
        let a = train_ef_ppo(&events, roster.clone(), &cfg, &kin, &RewardConfig::default()).unwrap();
        assert!(a.audit.holds(), "{:?}", a.audit);
        assert_eq!(a.audit.steps, 1200);
        let b = train_ef_ppo(&events, roster, &cfg, &kin, &RewardConfig::default()).unwrap();
        assert_eq!(a.policy.network, b.policy.network);
        assert_eq!(a.log, b.log);
    }
}
