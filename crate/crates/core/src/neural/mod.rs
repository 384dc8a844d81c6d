//! Small fixed-architecture networks with hand-written backpropagation.

mod adam;
mod lstm;
mod mlp;

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use adam::Adam;
pub use lstm::{Lstm, LstmCache};
pub use mlp::{Mlp, MlpCache, MlpGrads, OutputActivation};

use crate::kinematics::FollowState;

#[derive(Debug, Error)]
pub enum NeuralError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("weight file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Per-feature standardization of `(spacing, follower speed, relative speed)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub mean: [f64; 3],
    pub std: [f64; 3],
}

impl Default for Normalization {
    fn default() -> Self {
        Self {
            mean: [0.0; 3],
            std: [1.0; 3],
        }
    }
}

impl Normalization {
    /// Mean and standard deviation of each feature over `states`; a feature
    /// with zero spread keeps unit scale.
    pub fn fit<'a, I>(states: I) -> Self
    where
        I: IntoIterator<Item = &'a FollowState>,
    {
        let mut n = 0usize;
        let mut sum = [0.0; 3];
        let mut sq = [0.0; 3];
        for s in states {
            let f = s.as_features();
            for k in 0..3 {
                sum[k] += f[k];
                sq[k] += f[k] * f[k];
            }
            n += 1;
        }
        if n == 0 {
            return Self::default();
        }
        let mut out = Self::default();
        for k in 0..3 {
            let mean = sum[k] / n as f64;
            let var = (sq[k] / n as f64 - mean * mean).max(0.0);
            out.mean[k] = mean;
            out.std[k] = if var.sqrt() > 1e-9 { var.sqrt() } else { 1.0 };
        }
        out
    }

    pub fn validate(&self) -> Result<(), NeuralError> {
        let ok = self.mean.iter().all(|v| v.is_finite())
            && self.std.iter().all(|v| v.is_finite() && *v > 0.0);
        if ok {
            Ok(())
        } else {
            Err(NeuralError::Format("normalization stats must be finite with positive std".into()))
        }
    }

    pub fn apply(&self, state: &FollowState) -> [f64; 3] {
        let f = state.as_features();
        [
            (f[0] - self.mean[0]) / self.std[0],
            (f[1] - self.mean[1]) / self.std[1],
            (f[2] - self.mean[2]) / self.std[2],
        ]
    }
}

/// Either supported architecture.
#[derive(Debug, Clone, PartialEq)]
pub enum Network {
    Mlp(Mlp),
    Lstm(Lstm),
}

impl Network {
    pub fn params(&self) -> &[f64] {
        match self {
            Network::Mlp(n) => n.params(),
            Network::Lstm(n) => n.params(),
        }
    }

    fn layout(&self) -> Vec<(String, Vec<usize>, usize)> {
        match self {
            Network::Mlp(n) => n.tensor_layout(),
            Network::Lstm(n) => n.tensor_layout(),
        }
    }
}

const FORMAT_TAG: &str = "ensemble-follower-tensors";
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum Architecture {
    Mlp {
        sizes: Vec<usize>,
        output: OutputActivation,
    },
    Lstm {
        input: usize,
        hidden: usize,
        output: usize,
    },
}

#[derive(Debug, Serialize, Deserialize)]
struct TensorRecord {
    name: String,
    shape: Vec<usize>,
    data: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct TensorDump {
    format: String,
    version: u32,
    architecture: Architecture,
    tensors: Vec<TensorRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    normalization: Option<Normalization>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    extra: BTreeMap<String, Vec<f64>>,
}

/// A network plus its input normalization and any auxiliary vectors (for
/// example a learned log standard deviation).
#[derive(Debug, Clone, PartialEq)]
pub struct WeightFile {
    pub network: Network,
    pub normalization: Option<Normalization>,
    pub extra: BTreeMap<String, Vec<f64>>,
}

impl WeightFile {
    pub fn new(network: Network, normalization: Option<Normalization>) -> Self {
        Self {
            network,
            normalization,
            extra: BTreeMap::new(),
        }
    }

    pub fn to_json(&self) -> Result<String, NeuralError> {
        let architecture = match &self.network {
            Network::Mlp(n) => Architecture::Mlp {
                sizes: n.sizes().to_vec(),
                output: n.output_activation(),
            },
            Network::Lstm(n) => Architecture::Lstm {
                input: n.input_size(),
                hidden: n.hidden_size(),
                output: n.output_size(),
            },
        };
        let params = self.network.params();
        let tensors = self
            .network
            .layout()
            .into_iter()
            .map(|(name, shape, offset)| {
                let len: usize = shape.iter().product();
                TensorRecord {
                    name,
                    shape,
                    data: params[offset..offset + len].to_vec(),
                }
            })
            .collect();
        let dump = TensorDump {
            format: FORMAT_TAG.into(),
            version: FORMAT_VERSION,
            architecture,
            tensors,
            normalization: self.normalization,
            extra: self.extra.clone(),
        };
        Ok(serde_json::to_string_pretty(&dump)?)
    }

    pub fn from_json(text: &str) -> Result<Self, NeuralError> {
        let dump: TensorDump = serde_json::from_str(text)?;
        if dump.format != FORMAT_TAG {
            return Err(NeuralError::Format(format!("unknown format tag {:?}", dump.format)));
        }
        if dump.version != FORMAT_VERSION {
            return Err(NeuralError::Format(format!("unsupported version {}", dump.version)));
        }
        let mut network = match dump.architecture {
            Architecture::Mlp { sizes, output } => Network::Mlp(Mlp::zeros(&sizes, output)?),
            Architecture::Lstm { input, hidden, output } => Network::Lstm(Lstm::zeros(input, hidden, output)?),
        };
        let layout = network.layout();
        if layout.len() != dump.tensors.len() {
            return Err(NeuralError::Format(format!(
                "expected {} tensors, found {}",
                layout.len(),
                dump.tensors.len()
            )));
        }
        let params = match &mut network {
            Network::Mlp(n) => n.params_mut(),
            Network::Lstm(n) => n.params_mut(),
        };
        for ((name, shape, offset), rec) in layout.into_iter().zip(dump.tensors) {
            if rec.name != name || rec.shape != shape {
                return Err(NeuralError::Format(format!(
                    "tensor {} {:?} does not match expected {} {:?}",
                    rec.name, rec.shape, name, shape
                )));
            }
            if rec.data.len() != shape.iter().product::<usize>() {
                return Err(NeuralError::Format(format!("tensor {name} has wrong element count")));
            }
            if rec.data.iter().any(|v| !v.is_finite()) {
                return Err(NeuralError::NonFinite("stored tensor"));
            }
            params[offset..offset + rec.data.len()].copy_from_slice(&rec.data);
        }
        if let Some(norm) = &dump.normalization {
            norm.validate()?;
        }
        Ok(Self {
            network,
            normalization: dump.normalization,
            extra: dump.extra,
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), NeuralError> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, NeuralError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
