use std::path::Path;

use super::{CarFollowingModel, ModelError, StateWindow};
use crate::neural::{Network, Normalization, WeightFile};

/// A learned low-level model: normalized window in, `acc_scale * tanh(raw)`
/// out.
///
/// The feed-forward variant sees the flattened window; the recurrent variant
/// re-unrolls over the whole window on every call and keeps no state between
/// calls.
#[derive(Debug, Clone, PartialEq)]
pub struct NetPolicy {
    pub network: Network,
    pub normalization: Normalization,
    pub acc_scale: f64,
}

pub const DEFAULT_ACC_SCALE: f64 = 4.0;

impl NetPolicy {
    pub fn new(network: Network, normalization: Normalization) -> Self {
        Self {
            network,
            normalization,
            acc_scale: DEFAULT_ACC_SCALE,
        }
    }

    /// Pre-squash network output.
    pub fn raw_output(&self, window: &StateWindow) -> Result<f64, ModelError> {
        let out = match &self.network {
            Network::Mlp(net) => net.predict(&window.flat_features(&self.normalization))?,
            Network::Lstm(net) => net.predict(&window.sequence_features(&self.normalization))?,
        };
        out.first().copied().ok_or(ModelError::NonFinite("empty network output"))
    }

    pub fn to_weight_file(&self) -> WeightFile {
        let mut file = WeightFile::new(self.network.clone(), Some(self.normalization));
        file.extra.insert("acc_scale".into(), vec![self.acc_scale]);
        file
    }

    pub fn from_weight_file(file: WeightFile) -> Result<Self, ModelError> {
        let normalization = file
            .normalization
            .ok_or_else(|| ModelError::Invalid("policy weight file lacks normalization stats".into()))?;
        let acc_scale = file
            .extra
            .get("acc_scale")
            .and_then(|v| v.first().copied())
            .unwrap_or(DEFAULT_ACC_SCALE);
        Ok(Self {
            network: file.network,
            normalization,
            acc_scale,
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), ModelError> {
        Ok(self.to_weight_file().save(path)?)
    }

    pub fn load(path: &Path) -> Result<Self, ModelError> {
        Self::from_weight_file(WeightFile::load(path)?)
    }
}

impl CarFollowingModel for NetPolicy {
    fn acceleration(&self, window: &StateWindow) -> Result<f64, ModelError> {
        let raw = self.raw_output(window)?;
        let acc = self.acc_scale * raw.tanh();
        if !acc.is_finite() {
            return Err(ModelError::NonFinite("policy acceleration"));
        }
        Ok(acc)
    }
}
