//! Closed-loop rollout of a model behind a replayed leader.
//!
//! The synthetic generator, calibration, the environment and evaluation all
//! advance the follower through this one integrator, so a ground-truth model
//! replayed on its own noise-free event reproduces it exactly.

use crate::kinematics::{step_jerk_constrained, ClipContext, FollowState, KinematicsConfig, KinematicsError};
use crate::models::{CarFollowingModel, ModelError, StateWindow};

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
    #[error("leader series must have at least two samples")]
    TooShort,
}

/// Simulated trajectory. `spacing[0]` and `speed[0]` are the initial state;
/// `applied_acc[t]` moved the state from `t` to `t + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Rollout {
    pub spacing: Vec<f64>,
    pub speed: Vec<f64>,
    pub applied_acc: Vec<f64>,
    pub collided: bool,
}

impl Rollout {
    /// Number of simulated steps after the initial state.
    pub fn steps(&self) -> usize {
        self.spacing.len() - 1
    }
}

/// Rolls `model` forward against `lv_speed`, stopping at the end of the
/// series or at the first step whose spacing is not positive.
///
/// `perturb` maps each model command to the command actually sent to the
/// kinematics (identity for noise-free runs).
pub fn drive_with<M, F>(
    model: &M,
    lv_speed: &[f64],
    initial: FollowState,
    cfg: &KinematicsConfig,
    mut perturb: F,
) -> Result<Rollout, SimError>
where
    M: CarFollowingModel + ?Sized,
    F: FnMut(f64) -> f64,
{
    if lv_speed.len() < 2 {
        return Err(SimError::TooShort);
    }
    let n = lv_speed.len();
    let mut out = Rollout {
        spacing: Vec::with_capacity(n),
        speed: Vec::with_capacity(n),
        applied_acc: Vec::with_capacity(n - 1),
        collided: false,
    };
    out.spacing.push(initial.spacing);
    out.speed.push(initial.fv_speed);
    if initial.is_collision() {
        out.collided = true;
        return Ok(out);
    }
    let mut state = initial;
    let mut window = StateWindow::filled(state);
    let mut ctx = ClipContext::new();
    for &vl_next in &lv_speed[1..] {
        let cmd = perturb(model.acceleration(&window)?);
        let (next, next_ctx, applied) = step_jerk_constrained(state, ctx, cmd, vl_next, cfg)?;
        out.spacing.push(next.spacing);
        out.speed.push(next.fv_speed);
        out.applied_acc.push(applied);
        if next.is_collision() {
            out.collided = true;
            break;
        }
        state = next;
        ctx = next_ctx;
        window.push(state);
    }
    Ok(out)
}

pub fn drive<M: CarFollowingModel + ?Sized>(
    model: &M,
    lv_speed: &[f64],
    initial: FollowState,
    cfg: &KinematicsConfig,
) -> Result<Rollout, SimError> {
    drive_with(model, lv_speed, initial, cfg, |a| a)
}
