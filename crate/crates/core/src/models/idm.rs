use serde::{Deserialize, Serialize};

use super::{clamp_output, CarFollowingModel, ModelError, StateWindow};
use crate::kinematics::FollowState;

/// Intelligent Driver Model parameters (SI units).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IdmParams {
    /// Maximum acceleration, m/s².
    pub a_max: f64,
    /// Desired speed, m/s.
    pub v_desired: f64,
    /// Acceleration exponent.
    pub beta: f64,
    /// Comfortable deceleration, m/s².
    pub a_comf: f64,
    /// Gap at standstill, m.
    pub s_jam: f64,
    /// Desired time headway, s.
    pub t_headway: f64,
}

impl IdmParams {
    /// Desired dynamic gap `s*`, never below the standstill gap.
    pub fn desired_gap(&self, v: f64, rel_speed: f64) -> f64 {
        let approach = -rel_speed;
        let s = self.s_jam + v * self.t_headway + v * approach / (2.0 * (self.a_max * self.a_comf).sqrt());
        s.max(self.s_jam)
    }

    pub fn acceleration_at(&self, state: &FollowState) -> Result<f64, ModelError> {
        if state.spacing <= 0.0 {
            return Err(ModelError::NonPositiveSpacing(state.spacing));
        }
        let v = state.fv_speed;
        let s_star = self.desired_gap(v, state.rel_speed);
        let free = (v / self.v_desired).powf(self.beta);
        let interaction = (s_star / state.spacing).powi(2);
        clamp_output(self.a_max * (1.0 - free - interaction))
    }

    /// Steady-state gap at speed `v` behind a leader at the same speed.
    /// `None` when `v` is not below the desired speed.
    pub fn equilibrium_gap(&self, v: f64) -> Option<f64> {
        let free = (v / self.v_desired).powf(self.beta);
        if free >= 1.0 {
            return None;
        }
        Some((self.s_jam + v * self.t_headway) / (1.0 - free).sqrt())
    }
}

impl CarFollowingModel for IdmParams {
    fn acceleration(&self, window: &StateWindow) -> Result<f64, ModelError> {
        self.acceleration_at(window.newest())
    }
}
