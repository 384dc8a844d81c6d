use serde::{Deserialize, Serialize};

use super::{clamp_output, CarFollowingModel, ModelError, StateWindow};
use crate::kinematics::FollowState;

/// Full Velocity Difference model parameters (SI units).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FvdParams {
    /// Sensitivity to the optimal-velocity gap, 1/s.
    pub alpha: f64,
    /// Sensitivity to relative speed, 1/s.
    pub lambda: f64,
    /// Desired speed, m/s.
    pub v_desired: f64,
    /// Interaction length, m.
    pub b_len: f64,
    /// Form factor.
    pub beta_form: f64,
    /// Spacing beyond which the optimal velocity saturates, m.
    pub s_cut: f64,
}

impl FvdParams {
    pub fn optimal_velocity(&self, spacing: f64) -> f64 {
        if spacing >= self.s_cut {
            return self.v_desired;
        }
        let tb = self.beta_form.tanh();
        self.v_desired * ((spacing / self.b_len - self.beta_form).tanh() + tb) / (1.0 + tb)
    }

    pub fn acceleration_at(&self, state: &FollowState) -> Result<f64, ModelError> {
        let acc = self.alpha * (self.optimal_velocity(state.spacing) - state.fv_speed) + self.lambda * state.rel_speed;
        clamp_output(acc)
    }
}

impl CarFollowingModel for FvdParams {
    fn acceleration(&self, window: &StateWindow) -> Result<f64, ModelError> {
        self.acceleration_at(window.newest())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::highd_estimates;

    #[test]
    fn saturated_at_desired_speed_is_zero() {
        let p = highd_estimates::fvd();
        let a = p.acceleration_at(&FollowState::new(p.s_cut + 1.0, p.v_desired, 0.0)).unwrap();
        assert_eq!(a, 0.0);
    }

    #[test]
    fn optimal_velocity_vanishes_at_zero_gap() {
        let p = highd_estimates::fvd();
        assert!(p.optimal_velocity(0.0).abs() < 1e-12);
        assert!(p.optimal_velocity(1e-9).abs() < 1e-6);
    }

    #[test]
    fn table_estimates_against_scalar_oracle() {
        // alpha 0.22, lambda 2.37, V0 = 24 km/h, b = 2.95, beta = 4.48, Sc = 56.35
        let v0 = 24.0 / 3.6;
        let (s, v, dv) = (20.0_f64, 5.0_f64, -2.0_f64);
        let vopt = v0 * ((s / 2.95 - 4.48).tanh() + 4.48_f64.tanh()) / (1.0 + 4.48_f64.tanh());
        let raw = 0.22 * (vopt - v) + 2.37 * dv;
        let expected = raw.clamp(-4.0, 4.0);
        let got = highd_estimates::fvd().acceleration_at(&FollowState::new(s, v, dv)).unwrap();
        assert!((got - expected).abs() < 1e-12);
        // relative-speed term dominates: about -4.44 before the clamp
        assert!(raw < -4.0);
        assert_eq!(got, -4.0);
    }
}
