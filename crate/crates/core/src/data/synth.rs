//! Synthetic car-following events: a scripted leader and a follower driven
//! by a known rule-based model through the jerk-constrained kinematics.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{DataError, TimeSeriesEvent, SAMPLE_DT};
use crate::kinematics::{FollowState, KinematicsConfig};
use crate::models::{CarFollowingModel, IdmParams, RuleParams, StateWindow};
use crate::sim::drive_with;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LeaderProfile {
    /// Constant speed throughout.
    Constant,
    /// Random piecewise-constant accelerations.
    PiecewiseAccel,
    /// Sinusoidal speed oscillation.
    Sinusoidal,
    /// Cruise, brake to a floor speed, hold, recover.
    BrakePulse,
    /// Each event draws one of the three non-constant profiles.
    Mixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProfileParams {
    /// Initial leader speed range, m/s.
    pub initial_speed: [f64; 2],
    /// Leader speed is kept within this range (except by the brake pulse
    /// floor), m/s.
    pub speed_limits: [f64; 2],
    /// Piecewise profile: segment duration range, s.
    pub segment_duration: [f64; 2],
    /// Piecewise profile: largest segment acceleration magnitude, m/s².
    pub max_accel: f64,
    /// Sinusoidal profile: amplitude range, m/s.
    pub amplitude: [f64; 2],
    /// Sinusoidal profile: period range, s.
    pub period: [f64; 2],
    /// Brake pulse: lowest leader speed, m/s.
    pub pulse_floor: f64,
    /// Brake pulse: deceleration magnitude, m/s².
    pub pulse_decel: f64,
    /// Brake pulse: recovery acceleration, m/s².
    pub pulse_recover: f64,
    /// Brake pulse: start time range, s.
    pub pulse_start: [f64; 2],
    /// Brake pulse: time spent at the floor, s.
    pub pulse_hold: f64,
}

impl Default for ProfileParams {
    fn default() -> Self {
        Self {
            initial_speed: [14.0, 24.0],
            speed_limits: [3.0, 35.0],
            segment_duration: [2.0, 5.0],
            max_accel: 1.0,
            amplitude: [1.5, 4.0],
            period: [8.0, 20.0],
            pulse_floor: 6.0,
            pulse_decel: 3.0,
            pulse_recover: 1.5,
            pulse_start: [2.0, 4.0],
            pulse_hold: 1.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n_events: usize,
    /// s
    pub duration: f64,
    pub leader_profile: LeaderProfile,
    pub profile: ProfileParams,
    pub ground_truth: RuleParams,
    /// Standard deviation of Gaussian noise added to each commanded
    /// acceleration, m/s².
    pub noise_std: f64,
    pub seed: u64,
    pub id_prefix: String,
}

/// Ground-truth driver used when no other model is configured.
pub fn default_ground_truth() -> IdmParams {
    IdmParams {
        a_max: 1.2,
        v_desired: 30.0,
        beta: 4.0,
        a_comf: 1.5,
        s_jam: 2.0,
        t_headway: 1.2,
    }
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_events: 60,
            duration: 20.0,
            leader_profile: LeaderProfile::Mixed,
            profile: ProfileParams::default(),
            ground_truth: RuleParams::Idm(default_ground_truth()),
            noise_std: 0.0,
            seed: 7,
            id_prefix: "syn".into(),
        }
    }
}

const MAX_RETRIES: usize = 10;

impl SynthConfig {
    pub fn validate(&self) -> Result<(), DataError> {
        let bad = |m: &str| Err(DataError::Synth(m.to_string()));
        if self.duration < 15.0 {
            return bad("duration must be at least 15 s");
        }
        if !(self.noise_std >= 0.0) {
            return bad("noise_std must be non-negative");
        }
        let p = &self.profile;
        if p.initial_speed[0] > p.initial_speed[1] || p.initial_speed[0] < 0.0 {
            return bad("initial_speed must be an ordered non-negative range");
        }
        if matches!(self.leader_profile, LeaderProfile::BrakePulse | LeaderProfile::Mixed)
            && p.pulse_floor >= p.initial_speed[0]
        {
            return bad("pulse_floor must lie below the initial leader speed");
        }
        Ok(())
    }

    pub fn samples(&self) -> usize {
        (self.duration / SAMPLE_DT).round() as usize
    }
}

fn uniform<R: Rng>(rng: &mut R, range: [f64; 2]) -> f64 {
    if range[1] > range[0] {
        rng.gen_range(range[0]..range[1])
    } else {
        range[0]
    }
}

/// Leader speed series of `n` samples for the given profile.
pub fn leader_speed<R: Rng>(profile: LeaderProfile, p: &ProfileParams, n: usize, rng: &mut R) -> Vec<f64> {
    let dt = SAMPLE_DT;
    let v0 = uniform(rng, p.initial_speed);
    let [lo, hi] = p.speed_limits;
    match profile {
        LeaderProfile::Constant => vec![v0; n],
        LeaderProfile::PiecewiseAccel => {
            let mut out = Vec::with_capacity(n);
            let mut v = v0;
            let mut remaining = 0usize;
            let mut acc = 0.0;
            for _ in 0..n {
                if remaining == 0 {
                    remaining = (uniform(rng, p.segment_duration) / dt).round().max(1.0) as usize;
                    acc = rng.gen_range(-p.max_accel..=p.max_accel);
                }
                out.push(v);
                v = (v + acc * dt).clamp(lo, hi);
                remaining -= 1;
            }
            out
        }
        LeaderProfile::Sinusoidal => {
            let amp = uniform(rng, p.amplitude).min((v0 - lo).max(0.0));
            let period = uniform(rng, p.period);
            let phase = rng.gen_range(0.0..std::f64::consts::TAU);
            (0..n)
                .map(|k| {
                    let t = k as f64 * dt;
                    let s = (std::f64::consts::TAU * t / period + phase).sin() - phase.sin();
                    (v0 + amp * s).clamp(lo, hi)
                })
                .collect()
        }
        LeaderProfile::BrakePulse => {
            let start = uniform(rng, p.pulse_start);
            let mut out = Vec::with_capacity(n);
            let mut v = v0;
            let mut phase = 0u8;
            let mut hold_left = (p.pulse_hold / dt).round() as usize;
            for k in 0..n {
                out.push(v);
                let t = k as f64 * dt;
                if phase == 0 && t >= start {
                    phase = 1;
                }
                match phase {
                    1 => {
                        v = (v - p.pulse_decel * dt).max(p.pulse_floor);
                        if v == p.pulse_floor {
                            phase = 2;
                        }
                    }
                    2 => {
                        if hold_left == 0 {
                            phase = 3;
                        } else {
                            hold_left -= 1;
                        }
                    }
                    3 => v = (v + p.pulse_recover * dt).min(v0),
                    _ => {}
                }
            }
            out
        }
        LeaderProfile::Mixed => {
            let pick = [LeaderProfile::PiecewiseAccel, LeaderProfile::Sinusoidal, LeaderProfile::BrakePulse]
                [rng.gen_range(0..3)];
            leader_speed(pick, p, n, rng)
        }
    }
}

/// Spacing at which `model` commands zero acceleration when both vehicles
/// travel at `v`, found by bisection. `None` if no sign change is bracketed.
pub fn equilibrium_spacing<M: CarFollowingModel + ?Sized>(model: &M, v: f64) -> Option<f64> {
    let acc = |s: f64| model.acceleration(&StateWindow::filled(FollowState::new(s, v, 0.0))).ok();
    let (mut lo, mut hi) = (0.05, 2000.0);
    let (f_lo, f_hi) = (acc(lo)?, acc(hi)?);
    if f_lo > 0.0 || f_hi < 0.0 {
        return None;
    }
    if f_hi == 0.0 && f_lo == 0.0 {
        return Some(lo);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if acc(mid)? < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(hi)
}

/// Generates `config.n_events` events. A follower that collides is restarted
/// with a 50 % larger initial gap, up to ten times.
pub fn synthesize_events(config: &SynthConfig, kin: &KinematicsConfig) -> Result<Vec<TimeSeriesEvent>, DataError> {
    config.validate()?;
    let n = config.samples();
    let mut master = ChaCha8Rng::seed_from_u64(config.seed);
    let model = config.ground_truth;
    let mut events = Vec::with_capacity(config.n_events);
    for k in 0..config.n_events {
        let mut rng = ChaCha8Rng::seed_from_u64(master.gen());
        let lv = leader_speed(config.leader_profile, &config.profile, n, &mut rng);
        let v_init = lv[0];
        let mut gap = equilibrium_spacing(&model, v_init).unwrap_or(5.0 + 1.5 * v_init);
        let noise = Normal::new(0.0, config.noise_std.max(f64::MIN_POSITIVE)).expect("valid normal");
        let mut accepted = None;
        for _attempt in 0..=MAX_RETRIES {
            let initial = FollowState::new(gap, v_init, 0.0);
            let rollout = drive_with(&model, &lv, initial, kin, |a| {
                if config.noise_std > 0.0 {
                    a + noise.sample(&mut rng)
                } else {
                    a
                }
            })
            .map_err(|e| DataError::Synth(e.to_string()))?;
            if !rollout.collided && rollout.spacing.iter().all(|s| *s > 0.0) {
                accepted = Some(rollout);
                break;
            }
            gap *= 1.5;
        }
        let rollout = accepted.ok_or_else(|| {
            DataError::Synth(format!("event {k}: ground-truth follower collided after {MAX_RETRIES} retries"))
        })?;
        events.push(TimeSeriesEvent::new(
            format!("{}-{k:04}", config.id_prefix),
            SAMPLE_DT,
            lv,
            rollout.speed,
            rollout.spacing,
        )?);
    }
    Ok(events)
}
