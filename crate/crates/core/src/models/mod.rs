//! Low-level car-following models behind one interface: a window of recent
//! states in, a commanded acceleration in `[-4, 4]` m/s² out.

mod fvd;
mod gipps;
mod idm;
mod net;
mod window;

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use fvd::FvdParams;
pub use gipps::{GippsBranch, GippsParams, GIPPS_REFERENCE_LENGTH};
pub use idm::IdmParams;
pub use net::{NetPolicy, DEFAULT_ACC_SCALE};
pub use window::{StateWindow, HISTORY_LEN};

use crate::kinematics::FollowState;
use crate::neural::NeuralError;

/// Output range shared by every model.
pub const ACC_LIMIT: f64 = 4.0;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("spacing {0} m is not positive; the episode should have terminated")]
    NonPositiveSpacing(f64),
    #[error("non-finite value: {0}")]
    NonFinite(&'static str),
    #[error("invalid model: {0}")]
    Invalid(String),
    #[error(transparent)]
    Neural(#[from] NeuralError),
    #[error("parameter file: {0}")]
    ParamFile(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub(crate) fn clamp_output(acc: f64) -> Result<f64, ModelError> {
    if acc.is_finite() {
        Ok(acc.clamp(-ACC_LIMIT, ACC_LIMIT))
    } else {
        Err(ModelError::NonFinite("model acceleration"))
    }
}

/// Anything that proposes a follower acceleration from recent history.
pub trait CarFollowingModel: Send + Sync + fmt::Debug {
    fn acceleration(&self, window: &StateWindow) -> Result<f64, ModelError>;
}

impl<T: CarFollowingModel + ?Sized> CarFollowingModel for Box<T> {
    fn acceleration(&self, window: &StateWindow) -> Result<f64, ModelError> {
        (**self).acceleration(window)
    }
}

impl<T: CarFollowingModel + ?Sized> CarFollowingModel for std::sync::Arc<T> {
    fn acceleration(&self, window: &StateWindow) -> Result<f64, ModelError> {
        (**self).acceleration(window)
    }
}

/// Always commands the same acceleration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantModel(pub f64);

impl CarFollowingModel for ConstantModel {
    fn acceleration(&self, _window: &StateWindow) -> Result<f64, ModelError> {
        clamp_output(self.0)
    }
}

/// Calibratable rule-based model families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleKind {
    Idm,
    Gipps,
    Fvd,
}

impl RuleKind {
    pub const ALL: [RuleKind; 3] = [RuleKind::Idm, RuleKind::Gipps, RuleKind::Fvd];

    pub fn name(self) -> &'static str {
        match self {
            RuleKind::Idm => "idm",
            RuleKind::Gipps => "gipps",
            RuleKind::Fvd => "fvd",
        }
    }

    /// Calibration bounds in SI units, in parameter-vector order.
    pub fn bounds(self) -> Vec<ParamBound> {
        const KMH: f64 = 1.0 / 3.6;
        let b = |name: &'static str, lo: f64, hi: f64| ParamBound { name, lo, hi };
        match self {
            RuleKind::Idm => vec![
                b("a_max", 0.1, 5.0),
                b("v_desired", 1.0 * KMH, 150.0 * KMH),
                b("beta", 1.0, 10.0),
                b("a_comf", 0.1, 5.0),
                b("s_jam", 0.1, 10.0),
                b("t_headway", 0.1, 5.0),
            ],
            RuleKind::Gipps => vec![
                b("a_des", 0.1, 5.0),
                b("b_des", 0.1, 5.0),
                b("lv_eff_len", 5.0, 15.0),
                b("b_hat", 0.1, 5.0),
                b("v_desired", 1.0 * KMH, 150.0 * KMH),
                b("tau", 0.3, 3.0),
            ],
            RuleKind::Fvd => vec![
                b("alpha", 0.05, 20.0),
                b("lambda", 0.0, 3.0),
                b("v_desired", 1.0 * KMH, 252.0 * KMH),
                b("b_len", 0.1, 100.0),
                b("beta_form", 0.1, 10.0),
                b("s_cut", 10.0, 120.0),
            ],
        }
    }

    pub fn from_vector(self, x: &[f64]) -> Result<RuleParams, ModelError> {
        if x.len() != 6 {
            return Err(ModelError::Invalid(format!("{} expects 6 parameters, got {}", self.name(), x.len())));
        }
        Ok(match self {
            RuleKind::Idm => RuleParams::Idm(IdmParams {
                a_max: x[0],
                v_desired: x[1],
                beta: x[2],
                a_comf: x[3],
                s_jam: x[4],
                t_headway: x[5],
            }),
            RuleKind::Gipps => RuleParams::Gipps(GippsParams {
                a_des: x[0],
                b_des: x[1],
                lv_eff_len: x[2],
                b_hat: x[3],
                v_desired: x[4],
                tau: x[5],
            }),
            RuleKind::Fvd => RuleParams::Fvd(FvdParams {
                alpha: x[0],
                lambda: x[1],
                v_desired: x[2],
                b_len: x[3],
                beta_form: x[4],
                s_cut: x[5],
            }),
        })
    }
}

impl fmt::Display for RuleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RuleKind {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "idm" => Ok(RuleKind::Idm),
            "gipps" => Ok(RuleKind::Gipps),
            "fvd" => Ok(RuleKind::Fvd),
            other => Err(ModelError::Invalid(format!("unknown rule-based model {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamBound {
    pub name: &'static str,
    pub lo: f64,
    pub hi: f64,
}

impl ParamBound {
    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }
}

/// Parameters of one rule-based model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum RuleParams {
    Idm(IdmParams),
    Gipps(GippsParams),
    Fvd(FvdParams),
}

const UNITS: &[(&str, &str)] = &[
    ("a_max", "m/s^2  maximum acceleration"),
    ("v_desired", "m/s  desired speed"),
    ("beta", "acceleration exponent"),
    ("a_comf", "m/s^2  comfortable deceleration"),
    ("s_jam", "m  gap at standstill"),
    ("t_headway", "s  desired time headway"),
    ("a_des", "m/s^2  maximum desired acceleration"),
    ("b_des", "m/s^2  maximum desired deceleration (magnitude)"),
    ("lv_eff_len", "m  effective leader length"),
    ("b_hat", "m/s^2  estimated leader deceleration (magnitude)"),
    ("tau", "s  reaction time"),
    ("alpha", "1/s  optimal-velocity sensitivity"),
    ("lambda", "1/s  relative-speed sensitivity"),
    ("b_len", "m  interaction length"),
    ("beta_form", "form factor"),
    ("s_cut", "m  saturation spacing"),
];

impl RuleParams {
    pub fn kind(&self) -> RuleKind {
        match self {
            RuleParams::Idm(_) => RuleKind::Idm,
            RuleParams::Gipps(_) => RuleKind::Gipps,
            RuleParams::Fvd(_) => RuleKind::Fvd,
        }
    }

    pub fn to_vector(&self) -> Vec<f64> {
        match self {
            RuleParams::Idm(p) => vec![p.a_max, p.v_desired, p.beta, p.a_comf, p.s_jam, p.t_headway],
            RuleParams::Gipps(p) => vec![p.a_des, p.b_des, p.lv_eff_len, p.b_hat, p.v_desired, p.tau],
            RuleParams::Fvd(p) => vec![p.alpha, p.lambda, p.v_desired, p.b_len, p.beta_form, p.s_cut],
        }
    }

    pub fn acceleration_at(&self, state: &FollowState) -> Result<f64, ModelError> {
        match self {
            RuleParams::Idm(p) => p.acceleration_at(state),
            RuleParams::Gipps(p) => p.evaluate(state).map(|(a, _)| a),
            RuleParams::Fvd(p) => p.acceleration_at(state),
        }
    }

    /// `key = value` text with units as trailing comments.
    pub fn to_param_text(&self) -> String {
        let kind = self.kind();
        let mut out = format!("# {} car-following parameters (SI units)\nmodel = \"{}\"\n", kind.name(), kind.name());
        for (bound, value) in kind.bounds().iter().zip(self.to_vector()) {
            let unit = UNITS.iter().find(|(k, _)| *k == bound.name).map(|(_, u)| *u).unwrap_or("");
            out.push_str(&format!("{} = {:?}  # {}\n", bound.name, value, unit));
        }
        out
    }

    pub fn from_param_text(text: &str) -> Result<Self, ModelError> {
        let params: RuleParams = toml::from_str(text).map_err(|e| ModelError::ParamFile(e.to_string()))?;
        if params.to_vector().iter().any(|v| !v.is_finite()) {
            return Err(ModelError::ParamFile("non-finite parameter".into()));
        }
        Ok(params)
    }

    pub fn save(&self, path: &Path) -> Result<(), ModelError> {
        std::fs::write(path, self.to_param_text())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, ModelError> {
        Self::from_param_text(&std::fs::read_to_string(path)?)
    }
}

impl CarFollowingModel for RuleParams {
    fn acceleration(&self, window: &StateWindow) -> Result<f64, ModelError> {
        self.acceleration_at(window.newest())
    }
}

/// Any low-level model that can be stored in an ensemble roster.
#[derive(Debug, Clone, PartialEq)]
pub enum AnyModel {
    Rule(RuleParams),
    Net(NetPolicy),
    Constant(f64),
}

impl CarFollowingModel for AnyModel {
    fn acceleration(&self, window: &StateWindow) -> Result<f64, ModelError> {
        match self {
            AnyModel::Rule(p) => p.acceleration(window),
            AnyModel::Net(p) => p.acceleration(window),
            AnyModel::Constant(a) => ConstantModel(*a).acceleration(window),
        }
    }
}

/// Parameter estimates calibrated on HighD trajectories, in SI units.
pub mod highd_estimates {
    use super::{FvdParams, GippsParams, IdmParams};

    pub fn idm() -> IdmParams {
        IdmParams {
            a_max: 0.36,
            v_desired: 32.91 / 3.6,
            beta: 2.47,
            a_comf: 0.55,
            s_jam: 2.55,
            t_headway: 0.60,
        }
    }

    pub fn gipps() -> GippsParams {
        GippsParams {
            a_des: 0.73,
            b_des: 2.30,
            lv_eff_len: 6.96,
            b_hat: 1.92,
            v_desired: 24.52 / 3.6,
            tau: 1.00,
        }
    }

    pub fn fvd() -> FvdParams {
        FvdParams {
            alpha: 0.22,
            lambda: 2.37,
            v_desired: 24.00 / 3.6,
            b_len: 2.95,
            beta_form: 4.48,
            s_cut: 56.35,
        }
    }
}
