use serde::{Deserialize, Serialize};

use super::{clamp_output, CarFollowingModel, ModelError, StateWindow};
use crate::kinematics::FollowState;

/// Reference length subtracted from the effective leader length so that the
/// calibrated value acts as a safety margin on the net gap.
pub const GIPPS_REFERENCE_LENGTH: f64 = 5.0;

/// Gipps' safe-distance model parameters (SI units, decelerations as
/// positive magnitudes).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GippsParams {
    /// Maximum desired acceleration, m/s².
    pub a_des: f64,
    /// Maximum desired deceleration of the follower, m/s².
    pub b_des: f64,
    /// Effective length of the leader, m.
    pub lv_eff_len: f64,
    /// Follower's estimate of the leader's maximum deceleration, m/s².
    pub b_hat: f64,
    /// Desired speed, m/s.
    pub v_desired: f64,
    /// Reaction time, s.
    pub tau: f64,
}

/// Which speed bound was binding in a Gipps evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GippsBranch {
    Acceleration,
    Braking,
    /// Negative discriminant: no safe speed exists, brake fully.
    FullBraking,
}

impl GippsParams {
    pub fn acceleration_speed(&self, v: f64) -> f64 {
        let ratio = v / self.v_desired;
        v + 2.5 * self.a_des * self.tau * (1.0 - ratio) * (0.025 + ratio).sqrt()
    }

    /// Safe speed at the reaction horizon, `None` when the discriminant is
    /// negative.
    pub fn braking_speed(&self, spacing: f64, v: f64, v_lead: f64) -> Option<f64> {
        let b = self.b_des;
        let gap = spacing + GIPPS_REFERENCE_LENGTH - self.lv_eff_len;
        // the leader's stopping distance adds to the room available
        let disc = b * b * self.tau * self.tau + b * (2.0 * gap - v * self.tau + v_lead * v_lead / self.b_hat);
        if disc < 0.0 {
            None
        } else {
            Some(-b * self.tau + disc.sqrt())
        }
    }

    pub fn evaluate(&self, state: &FollowState) -> Result<(f64, GippsBranch), ModelError> {
        if state.spacing <= 0.0 {
            return Err(ModelError::NonPositiveSpacing(state.spacing));
        }
        let v = state.fv_speed;
        let v_acc = self.acceleration_speed(v);
        let Some(v_brake) = self.braking_speed(state.spacing, v, state.lv_speed().max(0.0)) else {
            return Ok((clamp_output(-self.b_des)?, GippsBranch::FullBraking));
        };
        let (v_next, branch) = if v_acc <= v_brake {
            (v_acc, GippsBranch::Acceleration)
        } else {
            (v_brake, GippsBranch::Braking)
        };
        let acc = ((v_next.max(0.0) - v) / self.tau).max(-self.b_des);
        Ok((clamp_output(acc)?, branch))
    }
}

impl CarFollowingModel for GippsParams {
    fn acceleration(&self, window: &StateWindow) -> Result<f64, ModelError> {
        self.evaluate(window.newest()).map(|(a, _)| a)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::highd_estimates;
    use proptest::prelude::*;

    #[test]
    fn far_leader_low_speed_accelerates() {
        let p = highd_estimates::gipps();
        let v = 2.0;
        let state = FollowState::new(500.0, v, 0.0);
        let (a, branch) = p.evaluate(&state).unwrap();
        // oracle: acceleration branch speed divided over the reaction time
        let r = v / p.v_desired;
        let v_acc = v + 2.5 * 0.73 * 1.0 * (1.0 - r) * (0.025 + r).sqrt();
        assert_eq!(branch, GippsBranch::Acceleration);
        assert!((a - (v_acc - v) / 1.0).abs() < 1e-12);
        assert!(a > 0.0);
    }

    #[test]
    fn safe_speed_holds_at_the_steady_gap() {
        // with b_des = b_hat, (v + b tau)^2 = b^2 tau^2 + b (2 g - v tau) + v^2 gives g = 1.5 v tau
        let p = GippsParams {
            b_des: 2.0,
            b_hat: 2.0,
            tau: 0.8,
            ..highd_estimates::gipps()
        };
        for v in [5.0, 15.0, 30.0] {
            let gap = 1.5 * v * p.tau;
            let s = gap - GIPPS_REFERENCE_LENGTH + p.lv_eff_len;
            let vb = p.braking_speed(s, v, v).unwrap();
            assert!((vb - v).abs() < 1e-9, "{vb} vs {v}");
        }
    }

    #[test]
    fn desired_speed_far_leader_is_zero() {
        let p = highd_estimates::gipps();
        let state = FollowState::new(500.0, p.v_desired, 0.0);
        assert_eq!(p.acceleration(&StateWindow::filled(state)).unwrap(), 0.0);
    }

    #[test]
    fn stopped_leader_close_ahead_triggers_full_braking() {
        let p = highd_estimates::gipps();
        // margin = lv_eff_len - reference length; leader stopped just beyond it
        let margin = p.lv_eff_len - GIPPS_REFERENCE_LENGTH;
        let v = 6.0;
        let s = margin + 0.1;
        // oracle: discriminant b^2 tau^2 + b (2 g - v tau) with g = 0.1 is negative
        let b = p.b_des;
        assert!(b * b + b * (0.2 - v) < 0.0);
        let (a, branch) = p.evaluate(&FollowState::new(s, v, -v)).unwrap();
        assert_eq!(branch, GippsBranch::FullBraking);
        assert_eq!(a, -p.b_des);
    }

    proptest! {
        #[test]
        fn never_brakes_harder_than_desired(s in 0.01f64..200.0, v in 0.0f64..40.0, dv in -20.0f64..20.0) {
            let p = highd_estimates::gipps();
            let a = p.acceleration(&StateWindow::filled(FollowState::new(s, v, dv))).unwrap();
            prop_assert!(a >= -p.b_des - 1e-12);
            prop_assert!(a <= 4.0);
        }
    }
}
