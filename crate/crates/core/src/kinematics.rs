//! Discrete-time longitudinal kinematics for the following vehicle.
//!
//! Two integrators share the same state update: the conventional one applies
//! the commanded acceleration directly, the jerk-constrained one first clamps
//! the command into the acceleration range and then limits its rate of change
//! against the previously applied acceleration.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KinematicsError {
    #[error("non-finite kinematic input: {0}")]
    NonFinite(&'static str),
    #[error("negative leader speed {0} m/s")]
    NegativeLeaderSpeed(f64),
    #[error("invalid kinematics config: {0}")]
    InvalidConfig(&'static str),
}

/// Instantaneous car-following state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FollowState {
    /// Net gap from leader rear to follower front, m.
    pub spacing: f64,
    /// Follower speed, m/s.
    pub fv_speed: f64,
    /// Leader speed minus follower speed, m/s.
    pub rel_speed: f64,
}

impl FollowState {
    pub fn new(spacing: f64, fv_speed: f64, rel_speed: f64) -> Self {
        Self {
            spacing,
            fv_speed,
            rel_speed,
        }
    }

    /// Builds a state from observed leader and follower speeds.
    pub fn from_observation(spacing: f64, lv_speed: f64, fv_speed: f64) -> Self {
        Self::new(spacing, fv_speed, lv_speed - fv_speed)
    }

    pub fn lv_speed(&self) -> f64 {
        self.fv_speed + self.rel_speed
    }

    pub fn is_collision(&self) -> bool {
        self.spacing <= 0.0
    }

    pub fn as_features(&self) -> [f64; 3] {
        [self.spacing, self.fv_speed, self.rel_speed]
    }
}

/// Previously applied (clipped) acceleration.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ClipContext {
    pub prev_acc_clip: f64,
    pub initialized: bool,
}

impl ClipContext {
    pub fn new() -> Self {
        Self::default()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KinematicsConfig {
    pub dt: f64,
    pub acc_min: f64,
    pub acc_max: f64,
    pub jerk_min: f64,
    pub jerk_max: f64,
}

impl Default for KinematicsConfig {
    fn default() -> Self {
        Self {
            dt: 0.04,
            acc_min: -4.0,
            acc_max: 4.0,
            jerk_min: -10.0,
            jerk_max: 10.0,
        }
    }
}

impl KinematicsConfig {
    pub fn validate(&self) -> Result<(), KinematicsError> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(KinematicsError::InvalidConfig("dt must be positive"));
        }
        if !(self.acc_min < self.acc_max) {
            return Err(KinematicsError::InvalidConfig("acc_min must be below acc_max"));
        }
        if !(self.jerk_min < self.jerk_max) {
            return Err(KinematicsError::InvalidConfig("jerk_min must be below jerk_max"));
        }
        Ok(())
    }

    pub fn clamp_acc(&self, acc: f64) -> f64 {
        acc.clamp(self.acc_min, self.acc_max)
    }

    /// Largest admissible change of applied acceleration between two steps.
    pub fn max_acc_step(&self) -> f64 {
        self.jerk_max.abs().max(self.jerk_min.abs()) * self.dt
    }
}

fn ensure_finite(value: f64, what: &'static str) -> Result<(), KinematicsError> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(KinematicsError::NonFinite(what))
    }
}

/// Advances one step with the acceleration applied as-is.
///
/// Follower speed is clamped at zero; spacing integrates the mean of the old
/// and new relative speed (trapezoidal rule).
pub fn step_conventional(
    state: FollowState,
    acc: f64,
    vl_next: f64,
    cfg: &KinematicsConfig,
) -> Result<FollowState, KinematicsError> {
    ensure_finite(acc, "acceleration")?;
    ensure_finite(vl_next, "leader speed")?;
    ensure_finite(state.spacing, "spacing")?;
    ensure_finite(state.fv_speed, "follower speed")?;
    ensure_finite(state.rel_speed, "relative speed")?;
    if vl_next < 0.0 {
        return Err(KinematicsError::NegativeLeaderSpeed(vl_next));
    }
    let fv_next = (state.fv_speed + acc * cfg.dt).max(0.0);
    let rel_next = vl_next - fv_next;
    let spacing_next = state.spacing + 0.5 * (state.rel_speed + rel_next) * cfg.dt;
    Ok(FollowState::new(spacing_next, fv_next, rel_next))
}

/// Limits the rate of change of the applied acceleration.
///
/// The first call on an uninitialized context passes the command through.
pub fn clip_jerk(
    acc_cmd: f64,
    ctx: ClipContext,
    cfg: &KinematicsConfig,
) -> Result<(f64, ClipContext), KinematicsError> {
    ensure_finite(acc_cmd, "acceleration command")?;
    let acc_clip = if !ctx.initialized {
        acc_cmd
    } else {
        let prev = ctx.prev_acc_clip;
        let jerk = (acc_cmd - prev) / cfg.dt;
        if jerk > cfg.jerk_max {
            // stays between prev and cmd even under rounding
            (prev + cfg.jerk_max * cfg.dt).min(acc_cmd)
        } else if jerk < cfg.jerk_min {
            (prev + cfg.jerk_min * cfg.dt).max(acc_cmd)
        } else {
            acc_cmd
        }
    };
    Ok((
        acc_clip,
        ClipContext {
            prev_acc_clip: acc_clip,
            initialized: true,
        },
    ))
}

/// Clamp to the acceleration range, limit jerk, then integrate.
pub fn step_jerk_constrained(
    state: FollowState,
    ctx: ClipContext,
    acc_cmd: f64,
    vl_next: f64,
    cfg: &KinematicsConfig,
) -> Result<(FollowState, ClipContext, f64), KinematicsError> {
    ensure_finite(acc_cmd, "acceleration command")?;
    let clamped = cfg.clamp_acc(acc_cmd);
    let (acc_clip, ctx) = clip_jerk(clamped, ctx, cfg)?;
    let next = step_conventional(state, acc_clip, vl_next, cfg)?;
    Ok((next, ctx, acc_clip))
}
