//! Episode environment: replays a recorded leader, moves the follower with
//! jerk-constrained kinematics and scores each step by how closely the
//! simulated follower tracks the observed one.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::TimeSeriesEvent;
use crate::kinematics::{step_jerk_constrained, ClipContext, FollowState, KinematicsConfig, KinematicsError};
use crate::models::StateWindow;

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("episode on event {0} has already finished")]
    Finished(String),
    #[error("invalid reward configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardMode {
    Speed,
    Spacing,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardConfig {
    pub mode: RewardMode,
    pub rel_err_floor: f64,
    pub rel_err_ceiling: f64,
    pub collision_penalty: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            mode: RewardMode::Speed,
            rel_err_floor: 1e-4,
            rel_err_ceiling: 10.0,
            collision_penalty: 10.0,
        }
    }
}

impl RewardConfig {
    pub fn validate(&self) -> Result<(), EnvError> {
        if !(self.rel_err_floor > 0.0 && self.rel_err_floor < self.rel_err_ceiling && self.rel_err_ceiling.is_finite()) {
            return Err(EnvError::Config("need 0 < rel_err_floor < rel_err_ceiling".into()));
        }
        if !(self.collision_penalty >= 0.0) {
            return Err(EnvError::Config("collision_penalty must be non-negative".into()));
        }
        Ok(())
    }

    /// Largest per-step reward, reached when the error is at or below the floor.
    pub fn max_reward(&self) -> f64 {
        -self.rel_err_floor.ln()
    }

    pub fn min_reward(&self) -> f64 {
        -self.rel_err_ceiling.ln()
    }

    /// `-ln` of the clamped relative error between simulated and observed
    /// values. A zero observation counts as no error when matched exactly and
    /// as the ceiling otherwise.
    pub fn reward(&self, sim: f64, obs: f64) -> f64 {
        let diff = (sim - obs).abs();
        let rel = if obs == 0.0 {
            if diff == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            diff / obs.abs()
        };
        -rel.clamp(self.rel_err_floor, self.rel_err_ceiling).ln()
    }

    /// Reward for arriving at `sim` when the data shows `obs`.
    pub fn step_reward(&self, sim: &FollowState, obs: &FollowState) -> f64 {
        match self.mode {
            RewardMode::Speed => self.reward(sim.fv_speed, obs.fv_speed),
            RewardMode::Spacing => self.reward(sim.spacing, obs.spacing),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DoneReason {
    None,
    Exhausted,
    Collision,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub state: FollowState,
    pub applied_acc: f64,
    pub reward: f64,
    pub done: bool,
    pub done_reason: DoneReason,
}

/// One pass over an event. The leader is replayed from the data; only the
/// follower is simulated.
#[derive(Debug, Clone)]
pub struct Episode<'a> {
    event: &'a TimeSeriesEvent,
    kin: KinematicsConfig,
    reward: RewardConfig,
    cursor: usize,
    state: FollowState,
    window: StateWindow,
    clip_ctx: ClipContext,
    done_reason: DoneReason,
}

impl<'a> Episode<'a> {
    pub fn new(event: &'a TimeSeriesEvent, kin: KinematicsConfig, reward: RewardConfig) -> Self {
        let state = event.initial_state();
        Self {
            event,
            kin,
            reward,
            cursor: 0,
            state,
            window: StateWindow::filled(state),
            clip_ctx: ClipContext::new(),
            done_reason: DoneReason::None,
        }
    }

    /// Back to the event's first sample with an empty jerk history.
    pub fn reset(&mut self) -> &StateWindow {
        *self = Self::new(self.event, self.kin, self.reward);
        &self.window
    }

    pub fn event(&self) -> &'a TimeSeriesEvent {
        self.event
    }

    pub fn window(&self) -> &StateWindow {
        &self.window
    }

    pub fn state(&self) -> FollowState {
        self.state
    }

    pub fn cursor(&self) -> usize {
        self.cursor
    }

    pub fn done_reason(&self) -> DoneReason {
        self.done_reason
    }

    pub fn is_done(&self) -> bool {
        self.done_reason != DoneReason::None
    }

    pub fn step(&mut self, acc_cmd: f64) -> Result<StepOutcome, EnvError> {
        if self.is_done() {
            return Err(EnvError::Finished(self.event.event_id.clone()));
        }
        let t = self.cursor + 1;
        let (next, ctx, applied) =
            step_jerk_constrained(self.state, self.clip_ctx, acc_cmd, self.event.lv_speed[t], &self.kin)?;
        self.cursor = t;
        self.state = next;
        self.clip_ctx = ctx;
        let reward = if next.is_collision() {
            self.done_reason = DoneReason::Collision;
            -self.reward.collision_penalty
        } else {
            self.window.push(next);
            if t + 1 >= self.event.len() {
                self.done_reason = DoneReason::Exhausted;
            }
            self.reward.step_reward(&next, &self.event.state(t))
        };
        Ok(StepOutcome {
            state: next,
            applied_acc: applied,
            reward,
            done: self.is_done(),
            done_reason: self.done_reason,
        })
    }
}
