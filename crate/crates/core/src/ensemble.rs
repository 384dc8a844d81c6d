//! Hierarchical policy over frozen low-level models: either pick one model
//! per step (discrete) or blend all of them with simplex weights (convex).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::models::{AnyModel, CarFollowingModel, ModelError, NetPolicy, RuleParams, StateWindow, HISTORY_LEN};
use crate::neural::{Mlp, Network, NeuralError, Normalization, WeightFile};

#[derive(Debug, Error)]
pub enum EnsembleError {
    #[error("ensemble roster is empty")]
    EmptyRoster,
    #[error("operation requires a {0} policy")]
    WrongMode(&'static str),
    #[error("high-level network shape: {0}")]
    Shape(String),
    #[error("non-finite {0}")]
    NonFinite(&'static str),
    #[error("bundle manifest: {0}")]
    Manifest(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Neural(#[from] NeuralError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnsembleMode {
    /// One model chosen per step by argmax over Q-values.
    Discrete,
    /// Softmax weights over all models.
    Convex,
}

impl EnsembleMode {
    fn name(self) -> &'static str {
        match self {
            EnsembleMode::Discrete => "discrete",
            EnsembleMode::Convex => "convex",
        }
    }
}

/// A named low-level model. Roster order defines the action indices.
#[derive(Debug, Clone, PartialEq)]
pub struct RosterEntry {
    pub name: String,
    pub model: AnyModel,
}

impl RosterEntry {
    pub fn new(name: impl Into<String>, model: AnyModel) -> Self {
        Self {
            name: name.into(),
            model,
        }
    }
}

/// Index of the largest value; the lowest index wins ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|z| (z - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|x| x / s).collect()
}

/// `Σ wᵢ·accᵢ`, kept inside the ingredients' range against rounding.
pub fn blend(weights: &[f64], accs: &[f64]) -> f64 {
    let raw: f64 = weights.iter().zip(accs).map(|(w, a)| w * a).sum();
    let lo = accs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = accs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    debug_assert!(raw >= lo - 1e-9 && raw <= hi + 1e-9, "blend {raw} outside [{lo}, {hi}]");
    raw.clamp(lo, hi)
}

/// What the policy did at one step.
#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    pub acc: f64,
    /// Chosen model (discrete mode).
    pub choice: Option<usize>,
    /// Blend weights (convex mode).
    pub weights: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsemblePolicy {
    pub mode: EnsembleMode,
    /// Maps the flattened normalized window to k Q-values or k mean logits.
    pub network: Mlp,
    pub normalization: Normalization,
    pub roster: Vec<RosterEntry>,
}

impl EnsemblePolicy {
    pub fn new(
        mode: EnsembleMode,
        network: Mlp,
        normalization: Normalization,
        roster: Vec<RosterEntry>,
    ) -> Result<Self, EnsembleError> {
        if roster.is_empty() {
            return Err(EnsembleError::EmptyRoster);
        }
        if network.input_size() != 3 * HISTORY_LEN || network.output_size() != roster.len() {
            return Err(EnsembleError::Shape(format!(
                "expected {} -> {}, got {} -> {}",
                3 * HISTORY_LEN,
                roster.len(),
                network.input_size(),
                network.output_size()
            )));
        }
        Ok(Self {
            mode,
            network,
            normalization,
            roster,
        })
    }

    pub fn k(&self) -> usize {
        self.roster.len()
    }

    pub fn names(&self) -> Vec<&str> {
        self.roster.iter().map(|r| r.name.as_str()).collect()
    }

    fn outputs(&self, window: &StateWindow) -> Result<Vec<f64>, EnsembleError> {
        let out = self.network.predict(&window.flat_features(&self.normalization))?;
        if out.iter().any(|v| !v.is_finite()) {
            return Err(EnsembleError::NonFinite("high-level output"));
        }
        Ok(out)
    }

    pub fn q_values(&self, window: &StateWindow) -> Result<Vec<f64>, EnsembleError> {
        self.require(EnsembleMode::Discrete)?;
        self.outputs(window)
    }

    /// 0-based index of the model to run.
    pub fn select_model(&self, window: &StateWindow) -> Result<usize, EnsembleError> {
        Ok(argmax(&self.q_values(window)?))
    }

    /// Softmax of the mean logits; no sampling.
    pub fn blend_weights(&self, window: &StateWindow) -> Result<Vec<f64>, EnsembleError> {
        self.require(EnsembleMode::Convex)?;
        Ok(softmax(&self.outputs(window)?))
    }

    /// Every ingredient's command for this window, in roster order.
    pub fn ingredient_accs(&self, window: &StateWindow) -> Result<Vec<f64>, EnsembleError> {
        self.roster
            .iter()
            .map(|r| r.model.acceleration(window).map_err(EnsembleError::from))
            .collect()
    }

    pub fn decide(&self, window: &StateWindow) -> Result<Decision, EnsembleError> {
        match self.mode {
            EnsembleMode::Discrete => {
                let i = self.select_model(window)?;
                Ok(Decision {
                    acc: self.roster[i].model.acceleration(window)?,
                    choice: Some(i),
                    weights: None,
                })
            }
            EnsembleMode::Convex => {
                let w = self.blend_weights(window)?;
                let accs = self.ingredient_accs(window)?;
                Ok(Decision {
                    acc: blend(&w, &accs),
                    choice: None,
                    weights: Some(w),
                })
            }
        }
    }

    pub fn act(&self, window: &StateWindow) -> Result<f64, EnsembleError> {
        self.decide(window).map(|d| d.acc)
    }

    fn require(&self, mode: EnsembleMode) -> Result<(), EnsembleError> {
        if self.mode == mode {
            Ok(())
        } else {
            Err(EnsembleError::WrongMode(mode.name()))
        }
    }

    /// Writes `manifest.toml`, the high-level weights and one file per
    /// roster model into `dir`.
    pub fn save_bundle(&self, dir: &Path) -> Result<(), EnsembleError> {
        std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        let mut roster = Vec::with_capacity(self.k());
        for (i, entry) in self.roster.iter().enumerate() {
            let stem = format!("{i:02}_{}", sanitize(&entry.name));
            let item = match &entry.model {
                AnyModel::Rule(p) => {
                    let file = format!("{stem}.params");
                    p.save(&dir.join(&file))?;
                    ManifestModel {
                        name: entry.name.clone(),
                        kind: "rule".into(),
                        file: Some(file),
                        value: None,
                    }
                }
                AnyModel::Net(p) => {
                    let file = format!("{stem}.json");
                    p.save(&dir.join(&file))?;
                    ManifestModel {
                        name: entry.name.clone(),
                        kind: "net".into(),
                        file: Some(file),
                        value: None,
                    }
                }
                AnyModel::Constant(a) => ManifestModel {
                    name: entry.name.clone(),
                    kind: "constant".into(),
                    file: None,
                    value: Some(*a),
                },
            };
            roster.push(item);
        }
        WeightFile::new(Network::Mlp(self.network.clone()), Some(self.normalization)).save(&dir.join(HIGH_LEVEL_FILE))?;
        let manifest = Manifest {
            format: BUNDLE_FORMAT.into(),
            version: BUNDLE_VERSION,
            mode: self.mode,
            high_level: HIGH_LEVEL_FILE.into(),
            roster,
        };
        let text = toml::to_string(&manifest).map_err(|e| EnsembleError::Manifest(e.to_string()))?;
        let path = dir.join(MANIFEST_FILE);
        std::fs::write(&path, text).map_err(|e| io_err(&path, e))
    }

    pub fn load_bundle(dir: &Path) -> Result<Self, EnsembleError> {
        let path = dir.join(MANIFEST_FILE);
        let text = std::fs::read_to_string(&path).map_err(|e| io_err(&path, e))?;
        let manifest: Manifest = toml::from_str(&text).map_err(|e| EnsembleError::Manifest(e.to_string()))?;
        if manifest.format != BUNDLE_FORMAT || manifest.version != BUNDLE_VERSION {
            return Err(EnsembleError::Manifest(format!(
                "unsupported bundle {} v{}",
                manifest.format, manifest.version
            )));
        }
        let file_of = |m: &ManifestModel| -> Result<PathBuf, EnsembleError> {
            m.file
                .as_ref()
                .map(|f| dir.join(f))
                .ok_or_else(|| EnsembleError::Manifest(format!("model {} lacks a file", m.name)))
        };
        let mut roster = Vec::with_capacity(manifest.roster.len());
        for m in &manifest.roster {
            let model = match m.kind.as_str() {
                "rule" => AnyModel::Rule(RuleParams::load(&file_of(m)?)?),
                "net" => AnyModel::Net(NetPolicy::load(&file_of(m)?)?),
                "constant" => AnyModel::Constant(
                    m.value
                        .ok_or_else(|| EnsembleError::Manifest(format!("constant model {} lacks a value", m.name)))?,
                ),
                other => return Err(EnsembleError::Manifest(format!("unknown model kind {other:?}"))),
            };
            roster.push(RosterEntry::new(m.name.clone(), model));
        }
        let weights = WeightFile::load(&dir.join(&manifest.high_level))?;
        let network = match weights.network {
            Network::Mlp(n) => n,
            Network::Lstm(_) => return Err(EnsembleError::Shape("high-level network must be feed-forward".into())),
        };
        let normalization = weights
            .normalization
            .ok_or_else(|| EnsembleError::Manifest("high-level weights lack normalization".into()))?;
        Self::new(manifest.mode, network, normalization, roster)
    }
}

impl CarFollowingModel for EnsemblePolicy {
    fn acceleration(&self, window: &StateWindow) -> Result<f64, ModelError> {
        self.act(window).map_err(|e| match e {
            EnsembleError::Model(m) => m,
            other => ModelError::Invalid(other.to_string()),
        })
    }
}

const BUNDLE_FORMAT: &str = "ensemble-follower-bundle";
const BUNDLE_VERSION: u32 = 1;
const MANIFEST_FILE: &str = "manifest.toml";
const HIGH_LEVEL_FILE: &str = "high_level.json";

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Manifest {
    format: String,
    version: u32,
    mode: EnsembleMode,
    high_level: String,
    roster: Vec<ManifestModel>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ManifestModel {
    name: String,
    kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    file: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    value: Option<f64>,
}

fn sanitize(name: &str) -> String {
    name.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' }).collect()
}

fn io_err(path: &Path, source: std::io::Error) -> EnsembleError {
    EnsembleError::Io {
        path: path.display().to_string(),
        source,
    }
}
