//! Metrics, the model comparison harness and the selection/weight
//! statistics of the two ensemble variants.

mod plot;
mod report;

use std::collections::BTreeMap;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use plot::{bar_chart, line_plot, BarGroup, Series};
pub use report::{emit_report, emit_selection, emit_weights, ReportOptions, METRICS_HEADER};

use crate::data::TimeSeriesEvent;
use crate::ensemble::{EnsembleError, EnsemblePolicy};
use crate::env::{EnvError, Episode, RewardConfig};
use crate::kinematics::KinematicsConfig;
use crate::models::{CarFollowingModel, HISTORY_LEN};
use crate::sim::{drive, Rollout, SimError};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("series lengths differ ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("empty series")]
    Empty,
    #[error("observed series is all zero")]
    ZeroObservation,
    #[error("nothing to evaluate: {0}")]
    NothingToEvaluate(&'static str),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Ensemble(#[from] EnsembleError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Root mean square percentage error `sqrt(Σ(sim−obs)² / Σobs²)`.
pub fn rmspe(sim: &[f64], obs: &[f64]) -> Result<f64, EvalError> {
    if sim.len() != obs.len() {
        return Err(EvalError::LengthMismatch(sim.len(), obs.len()));
    }
    if obs.is_empty() {
        return Err(EvalError::Empty);
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for (s, o) in sim.iter().zip(obs) {
        num += (s - o) * (s - o);
        den += o * o;
    }
    if den == 0.0 {
        return Err(EvalError::ZeroObservation);
    }
    Ok((num / den).sqrt())
}

/// Fraction of events whose rollout collided.
pub fn collision_rate(collided: &[bool]) -> Result<f64, EvalError> {
    if collided.is_empty() {
        return Err(EvalError::Empty);
    }
    Ok(collided.iter().filter(|c| **c).count() as f64 / collided.len() as f64)
}

/// Mean and population standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    /// NaN for an empty sample.
    pub fn of(values: &[f64]) -> Self {
        if values.is_empty() {
            return Self {
                mean: f64::NAN,
                std: f64::NAN,
            };
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Self { mean, std: var.sqrt() }
    }
}

/// A named model under evaluation.
#[derive(Debug, Clone)]
pub struct Candidate {
    pub name: String,
    pub model: Arc<dyn CarFollowingModel>,
}

impl Candidate {
    pub fn new(name: impl Into<String>, model: impl CarFollowingModel + 'static) -> Self {
        Self {
            name: name.into(),
            model: Arc::new(model),
        }
    }
}

/// One model on one event. RMSPEs cover every simulated step, including
/// the colliding one when there is a collision.
#[derive(Debug, Clone, PartialEq)]
pub struct EventResult {
    pub model: String,
    pub event_id: String,
    pub rmspe_spacing: f64,
    pub rmspe_speed: f64,
    pub collided: bool,
    pub rollout: Rollout,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary {
    pub model: String,
    pub rmspe_spacing: MeanStd,
    pub rmspe_speed: MeanStd,
    pub collision_rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationReport {
    pub models: Vec<ModelSummary>,
    /// Model-major, events in input order.
    pub per_event: Vec<EventResult>,
    pub meta: BTreeMap<String, String>,
}

impl EvaluationReport {
    pub fn summary(&self, model: &str) -> Option<&ModelSummary> {
        self.models.iter().find(|m| m.model == model)
    }

    pub fn events_of<'a>(&'a self, model: &'a str) -> impl Iterator<Item = &'a EventResult> + 'a {
        self.per_event.iter().filter(move |r| r.model == model)
    }
}

pub fn evaluate_on_event(
    name: &str,
    model: &dyn CarFollowingModel,
    event: &TimeSeriesEvent,
    kin: &KinematicsConfig,
) -> Result<EventResult, EvalError> {
    let rollout = drive(model, &event.lv_speed, event.initial_state(), kin)?;
    let n = rollout.spacing.len();
    let (rmspe_spacing, rmspe_speed) = if n > 1 {
        (
            rmspe(&rollout.spacing[1..], &event.spacing[1..n])?,
            rmspe(&rollout.speed[1..], &event.fv_speed[1..n]).unwrap_or(0.0),
        )
    } else {
        (1.0, 1.0)
    };
    Ok(EventResult {
        model: name.to_string(),
        event_id: event.event_id.clone(),
        rmspe_spacing,
        rmspe_speed,
        collided: rollout.collided,
        rollout,
    })
}

/// Simulates every candidate on every event and aggregates per-event
/// RMSPEs into mean ± std plus the collision rate.
pub fn compare_models(
    candidates: &[Candidate],
    events: &[TimeSeriesEvent],
    kin: &KinematicsConfig,
) -> Result<EvaluationReport, EvalError> {
    if candidates.is_empty() {
        return Err(EvalError::NothingToEvaluate("no candidate models"));
    }
    if events.is_empty() {
        return Err(EvalError::NothingToEvaluate("no events"));
    }
    let mut models = Vec::with_capacity(candidates.len());
    let mut per_event = Vec::with_capacity(candidates.len() * events.len());
    for c in candidates {
        let results: Vec<EventResult> = events
            .par_iter()
            .map(|e| evaluate_on_event(&c.name, c.model.as_ref(), e, kin))
            .collect::<Result<_, _>>()?;
        models.push(summarize(&c.name, &results)?);
        per_event.extend(results);
    }
    Ok(EvaluationReport {
        models,
        per_event,
        meta: BTreeMap::new(),
    })
}

/// Aggregates per-event results of one model. The statistics are computed
/// over values sorted by event id so they do not depend on event order.
pub fn summarize(model: &str, results: &[EventResult]) -> Result<ModelSummary, EvalError> {
    let mut sorted: Vec<&EventResult> = results.iter().collect();
    sorted.sort_by(|a, b| a.event_id.cmp(&b.event_id));
    let spacing: Vec<f64> = sorted.iter().map(|r| r.rmspe_spacing).collect();
    let speed: Vec<f64> = sorted.iter().map(|r| r.rmspe_speed).collect();
    let collided: Vec<bool> = sorted.iter().map(|r| r.collided).collect();
    Ok(ModelSummary {
        model: model.to_string(),
        rmspe_spacing: MeanStd::of(&spacing),
        rmspe_speed: MeanStd::of(&speed),
        collision_rate: collision_rate(&collided)?,
    })
}

/// One recorded high-level decision with the state it was made in.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionRecord {
    pub event_id: String,
    pub t: usize,
    pub spacing: f64,
    pub lv_speed: f64,
    pub rel_speed: f64,
    /// Percent change of the leader speed over the preceding second; `None`
    /// when the earlier speed is zero.
    pub lv_speed_change: Option<f64>,
    pub choice: Option<usize>,
    pub weights: Option<Vec<f64>>,
}

/// `100·(V_t − V_{t−25}) / V_{t−25}`, reading the first sample for `t < 25`.
pub fn lv_speed_change(event: &TimeSeriesEvent, t: usize) -> Option<f64> {
    let before = event.lv_speed[t.saturating_sub(HISTORY_LEN)];
    (before != 0.0).then(|| 100.0 * (event.lv_speed[t] - before) / before)
}

/// Runs the ensemble over each event and records every decision.
pub fn record_decisions(
    policy: &EnsemblePolicy,
    events: &[TimeSeriesEvent],
    kin: &KinematicsConfig,
) -> Result<Vec<DecisionRecord>, EvalError> {
    let per_event: Vec<Vec<DecisionRecord>> = events
        .par_iter()
        .map(|e| {
            let mut ep = Episode::new(e, *kin, RewardConfig::default());
            let mut out = Vec::with_capacity(e.len());
            while !ep.is_done() {
                let d = policy.decide(ep.window())?;
                let t = ep.cursor();
                let s = ep.state();
                out.push(DecisionRecord {
                    event_id: e.event_id.clone(),
                    t,
                    spacing: s.spacing,
                    lv_speed: e.lv_speed[t],
                    rel_speed: s.rel_speed,
                    lv_speed_change: lv_speed_change(e, t),
                    choice: d.choice,
                    weights: d.weights,
                });
                ep.step(d.acc)?;
            }
            Ok(out)
        })
        .collect::<Result<_, EvalError>>()?;
    Ok(per_event.into_iter().flatten().collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSelection {
    pub model: String,
    pub count: usize,
    pub ratio_pct: f64,
    pub spacing: MeanStd,
    pub lv_speed: MeanStd,
    pub rel_speed: MeanStd,
    pub lv_speed_change_pct: MeanStd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionStats {
    pub models: Vec<ModelSelection>,
    pub steps: usize,
}

/// How often each model is chosen by a discrete policy, and in which
/// states.
pub fn selection_stats(
    policy: &EnsemblePolicy,
    events: &[TimeSeriesEvent],
    kin: &KinematicsConfig,
) -> Result<SelectionStats, EvalError> {
    if policy.mode != crate::ensemble::EnsembleMode::Discrete {
        return Err(EnsembleError::WrongMode("discrete").into());
    }
    let records = record_decisions(policy, events, kin)?;
    Ok(selection_from_records(&policy.names(), &records))
}

pub fn selection_from_records(names: &[&str], records: &[DecisionRecord]) -> SelectionStats {
    let steps = records.len();
    let models = names
        .iter()
        .enumerate()
        .map(|(i, name)| {
            let mine: Vec<&DecisionRecord> = records.iter().filter(|r| r.choice == Some(i)).collect();
            let col = |f: &dyn Fn(&DecisionRecord) -> f64| MeanStd::of(&mine.iter().map(|r| f(r)).collect::<Vec<_>>());
            ModelSelection {
                model: name.to_string(),
                count: mine.len(),
                ratio_pct: if steps > 0 { 100.0 * mine.len() as f64 / steps as f64 } else { 0.0 },
                spacing: col(&|r| r.spacing),
                lv_speed: col(&|r| r.lv_speed),
                rel_speed: col(&|r| r.rel_speed),
                lv_speed_change_pct: MeanStd::of(&mine.iter().filter_map(|r| r.lv_speed_change).collect::<Vec<_>>()),
            }
        })
        .collect();
    SelectionStats { models, steps }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelWeight {
    pub model: String,
    pub weight: MeanStd,
    /// Share of steps where this model has the largest weight.
    pub primary_pct: f64,
    /// Share of steps where this model's weight exceeds one half.
    pub dominating_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightStats {
    pub models: Vec<ModelWeight>,
    pub steps: usize,
}

/// Weight allocation of a convex policy.
pub fn weight_stats(
    policy: &EnsemblePolicy,
    events: &[TimeSeriesEvent],
    kin: &KinematicsConfig,
) -> Result<WeightStats, EvalError> {
    if policy.mode != crate::ensemble::EnsembleMode::Convex {
        return Err(EnsembleError::WrongMode("convex").into());
    }
    let records = record_decisions(policy, events, kin)?;
    let weights: Vec<Vec<f64>> = records.into_iter().filter_map(|r| r.weights).collect();
    Ok(weights_from_vectors(&policy.names(), &weights))
}

pub fn weights_from_vectors(names: &[&str], weights: &[Vec<f64>]) -> WeightStats {
    let steps = weights.len();
    let primary: Vec<usize> = weights.iter().map(|w| crate::ensemble::argmax(w)).collect();
    let pct = |n: usize| if steps > 0 { 100.0 * n as f64 / steps as f64 } else { 0.0 };
    let models = names
        .iter()
        .enumerate()
        .map(|(i, name)| {
            let col: Vec<f64> = weights.iter().map(|w| w[i]).collect();
            ModelWeight {
                model: name.to_string(),
                weight: MeanStd::of(&col),
                primary_pct: pct(primary.iter().filter(|p| **p == i).count()),
                dominating_pct: pct(col.iter().filter(|w| **w > 0.5).count()),
            }
        })
        .collect();
    WeightStats { models, steps }
}
