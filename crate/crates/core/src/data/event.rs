use serde::{Deserialize, Serialize};

use super::DataError;
use crate::kinematics::FollowState;

/// Sampling interval of the trajectory data, s (25 Hz).
pub const SAMPLE_DT: f64 = 0.04;

/// Minimum number of samples in an accepted event (15 s at 25 Hz).
pub const MIN_EVENT_SAMPLES: usize = 375;

/// One car-following episode sampled at a fixed interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeriesEvent {
    pub event_id: String,
    pub dt: f64,
    /// Time stamp of the first sample, s.
    pub t0: f64,
    pub lv_speed: Vec<f64>,
    pub fv_speed: Vec<f64>,
    /// Net gap, leader rear to follower front, m.
    pub spacing: Vec<f64>,
}

impl TimeSeriesEvent {
    /// Validates series lengths, finiteness, non-negative speeds and
    /// positive spacing. Short events are allowed here; duration limits are
    /// applied by filtering.
    pub fn new(
        event_id: impl Into<String>,
        dt: f64,
        lv_speed: Vec<f64>,
        fv_speed: Vec<f64>,
        spacing: Vec<f64>,
    ) -> Result<Self, DataError> {
        let event = Self {
            event_id: event_id.into(),
            dt,
            t0: 0.0,
            lv_speed,
            fv_speed,
            spacing,
        };
        event.validate()?;
        Ok(event)
    }

    pub fn with_start_time(mut self, t0: f64) -> Self {
        self.t0 = t0;
        self
    }

    pub fn validate(&self) -> Result<(), DataError> {
        let invalid = |reason: String| DataError::InvalidEvent {
            event_id: self.event_id.clone(),
            reason,
        };
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(invalid(format!("dt {} is not positive", self.dt)));
        }
        let n = self.lv_speed.len();
        if self.fv_speed.len() != n || self.spacing.len() != n {
            return Err(invalid("series lengths differ".into()));
        }
        if n < 2 {
            return Err(invalid("fewer than two samples".into()));
        }
        for (k, ((&lv, &fv), &s)) in self.lv_speed.iter().zip(&self.fv_speed).zip(&self.spacing).enumerate() {
            if !(lv.is_finite() && fv.is_finite() && s.is_finite()) {
                return Err(invalid(format!("non-finite value at sample {k}")));
            }
            if lv < 0.0 || fv < 0.0 {
                return Err(invalid(format!("negative speed at sample {k}")));
            }
            if s <= 0.0 {
                return Err(invalid(format!("non-positive spacing {s} at sample {k}")));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.lv_speed.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lv_speed.is_empty()
    }

    /// Covered time, counting one interval per sample.
    pub fn duration(&self) -> f64 {
        self.len() as f64 * self.dt
    }

    pub fn state(&self, t: usize) -> FollowState {
        FollowState::from_observation(self.spacing[t], self.lv_speed[t], self.fv_speed[t])
    }

    pub fn initial_state(&self) -> FollowState {
        self.state(0)
    }

    pub fn time(&self, t: usize) -> f64 {
        self.t0 + t as f64 * self.dt
    }
}

/// Quantities derived from an event for diagnostics and cloning targets.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivedFields {
    pub relative_speed: Vec<f64>,
    pub fv_accel: Vec<f64>,
}

/// Relative speed `V^l - V^f` and follower acceleration by central
/// differences (one-sided at the ends).
pub fn derive_fields(event: &TimeSeriesEvent) -> DerivedFields {
    let relative_speed = event.lv_speed.iter().zip(&event.fv_speed).map(|(l, f)| l - f).collect();
    let v = &event.fv_speed;
    let n = v.len();
    let dt = event.dt;
    let fv_accel = (0..n)
        .map(|t| match t {
            0 => (v[1] - v[0]) / dt,
            t if t == n - 1 => (v[n - 1] - v[n - 2]) / dt,
            t => (v[t + 1] - v[t - 1]) / (2.0 * dt),
        })
        .collect();
    DerivedFields {
        relative_speed,
        fv_accel,
    }
}
