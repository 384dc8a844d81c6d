//! Trainers for the learned components: the double-Q model selector, the
//! clipped-surrogate weight policy, the deterministic policy-gradient
//! low-level controller and the recurrent behaviour-cloning model.

mod cloning;
mod ddpg;
mod ddqn;
mod log;
mod math;
mod ppo;
mod replay;

use rayon::prelude::*;
use thiserror::Error;

pub use cloning::{cloning_samples, train_rnn_cloning, CloningConfig, CloningOutcome};
pub use ddpg::{train_ddpg_lowlevel, DdpgConfig, DdpgOutcome};
pub use ddqn::{train_ef_ddqn, DdqnConfig, DdqnOutcome};
pub use log::TrainingLog;
pub use math::{clipped_surrogate, double_q_target, double_q_targets, gae, moving_average, normalize, LinearSchedule};
pub use ppo::{gaussian_log_prob, train_ef_ppo, PpoConfig, PpoOutcome, SimplexAudit};
pub use replay::{ReplayBuffer, Transition};

use crate::data::TimeSeriesEvent;
use crate::ensemble::EnsembleError;
use crate::env::EnvError;
use crate::models::ModelError;
use crate::neural::{NeuralError, Normalization};

#[derive(Debug, Error)]
pub enum RlError {
    #[error("invalid training configuration: {0}")]
    Config(String),
    #[error("no training events")]
    NoEvents,
    #[error("non-finite {what} at step {step}")]
    NonFinite { what: &'static str, step: u64 },
    #[error(transparent)]
    Neural(#[from] NeuralError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Ensemble(#[from] EnsembleError),
}

/// Feature standardization fitted on every observed state of `events`.
pub fn fit_normalization(events: &[TimeSeriesEvent]) -> Normalization {
    let states: Vec<_> = events.iter().flat_map(|e| (0..e.len()).map(move |t| e.state(t))).collect();
    Normalization::fit(states.iter())
}

const GRAD_CHUNK: usize = 16;

/// Sums per-sample gradients and losses over `items`.
///
/// Samples are split into fixed-size chunks evaluated in parallel; chunk
/// results are added in chunk order, so the sum is the same for any number
/// of threads.
pub(crate) fn batch_gradient<T, F>(items: &[T], n_params: usize, per_sample: F) -> Result<(Vec<f64>, f64), RlError>
where
    T: Sync,
    F: Fn(&T, &mut [f64]) -> Result<f64, RlError> + Sync,
{
    let parts: Vec<Result<(Vec<f64>, f64), RlError>> = items
        .par_chunks(GRAD_CHUNK)
        .map(|chunk| {
            let mut g = vec![0.0; n_params];
            let mut loss = 0.0;
            for item in chunk {
                loss += per_sample(item, &mut g)?;
            }
            Ok((g, loss))
        })
        .collect();
    let mut total = vec![0.0; n_params];
    let mut loss = 0.0;
    for part in parts {
        let (g, l) = part?;
        for (t, x) in total.iter_mut().zip(&g) {
            *t += x;
        }
        loss += l;
    }
    Ok((total, loss))
}

pub(crate) fn check_finite(values: &[f64], what: &'static str, step: u64) -> Result<(), RlError> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(RlError::NonFinite { what, step })
    }
}

pub(crate) fn scale(values: &mut [f64], by: f64) {
    for v in values {
        *v *= by;
    }
}
