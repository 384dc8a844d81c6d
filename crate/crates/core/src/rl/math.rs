use serde::{Deserialize, Serialize};

/// Linear interpolation from `start` to `end` over `horizon` steps, then
/// constant at `end`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearSchedule {
    pub start: f64,
    pub end: f64,
    pub horizon: u64,
}

impl LinearSchedule {
    pub fn value(&self, step: u64) -> f64 {
        if step >= self.horizon {
            self.end
        } else {
            self.start + (self.end - self.start) * step as f64 / self.horizon as f64
        }
    }
}

/// Double-Q target of one transition: the online network picks the next
/// action, the target network values it; terminal transitions do not
/// bootstrap.
pub fn double_q_target(reward: f64, terminal: bool, q_online_next: &[f64], q_target_next: &[f64], gamma: f64) -> f64 {
    if terminal {
        reward
    } else {
        reward + gamma * q_target_next[crate::ensemble::argmax(q_online_next)]
    }
}

pub fn double_q_targets(
    rewards: &[f64],
    terminal: &[bool],
    q_online_next: &[Vec<f64>],
    q_target_next: &[Vec<f64>],
    gamma: f64,
) -> Vec<f64> {
    (0..rewards.len())
        .map(|i| double_q_target(rewards[i], terminal[i], &q_online_next[i], &q_target_next[i], gamma))
        .collect()
}

/// Generalized advantage estimates and value targets.
///
/// `values` has one more entry than `rewards`: the value after the last
/// step. `done[t]` cuts both the bootstrap and the recursion after step `t`.
pub fn gae(rewards: &[f64], values: &[f64], done: &[bool], gamma: f64, lambda: f64) -> (Vec<f64>, Vec<f64>) {
    let n = rewards.len();
    assert_eq!(values.len(), n + 1, "values must include the bootstrap value");
    assert_eq!(done.len(), n);
    let mut adv = vec![0.0; n];
    let mut next = 0.0;
    for t in (0..n).rev() {
        let keep = if done[t] { 0.0 } else { 1.0 };
        let delta = rewards[t] + gamma * values[t + 1] * keep - values[t];
        next = delta + gamma * lambda * keep * next;
        adv[t] = next;
    }
    let returns = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    (adv, returns)
}

/// `min(ratio·A, clip(ratio, 1−ε, 1+ε)·A)` and its derivative with respect
/// to `ratio` (zero where the clipped branch is the minimum).
pub fn clipped_surrogate(ratio: f64, advantage: f64, eps: f64) -> (f64, f64) {
    let unclipped = ratio * advantage;
    let clipped = ratio.clamp(1.0 - eps, 1.0 + eps) * advantage;
    if unclipped <= clipped {
        (unclipped, advantage)
    } else {
        (clipped, 0.0)
    }
}

/// Zero mean, unit standard deviation (left centred if the spread is zero).
pub fn normalize(values: &mut [f64]) {
    if values.is_empty() {
        return;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt();
    for v in values.iter_mut() {
        *v = if std > 1e-12 { (*v - mean) / std } else { *v - mean };
    }
}

/// Trailing moving average; the first entries average what is available.
pub fn moving_average(values: &[f64], window: usize) -> Vec<f64> {
    let window = window.max(1);
    let mut out = Vec::with_capacity(values.len());
    let mut sum = 0.0;
    for i in 0..values.len() {
        sum += values[i];
        if i >= window {
            sum -= values[i - window];
        }
        out.push(sum / (i + 1).min(window) as f64);
    }
    out
}
