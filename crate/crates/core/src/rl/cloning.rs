use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{batch_gradient, check_finite, fit_normalization, scale, RlError, TrainingLog};
use crate::data::{derive_fields, TimeSeriesEvent};
use crate::models::{NetPolicy, StateWindow, ACC_LIMIT, DEFAULT_ACC_SCALE};
use crate::neural::{Adam, Lstm, Network, Normalization};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CloningConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    /// Width of the recurrent layer.
    pub hidden: usize,
    /// Use every n-th window of each event.
    pub sample_stride: usize,
    pub seed: u64,
}

impl Default for CloningConfig {
    fn default() -> Self {
        Self {
            epochs: 20,
            batch_size: 128,
            lr: 1e-3,
            hidden: 32,
            sample_stride: 1,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CloningOutcome {
    pub policy: NetPolicy,
    /// Columns: epoch, train_loss, validation_loss (NaN without a
    /// validation set).
    pub log: TrainingLog,
}

/// Observed windows paired with the follower acceleration at the window's
/// newest sample. Windows before the 25th sample are back-filled with the
/// first state, as at an episode reset.
pub fn cloning_samples(event: &TimeSeriesEvent, stride: usize) -> Vec<(StateWindow, f64)> {
    let accel = derive_fields(event).fv_accel;
    let stride = stride.max(1);
    let mut window = StateWindow::filled(event.state(0));
    let mut out = Vec::with_capacity(event.len() / stride + 1);
    for t in 0..event.len() - 1 {
        if t > 0 {
            window.push(event.state(t));
        }
        if t % stride == 0 {
            out.push((window.clone(), accel[t].clamp(-ACC_LIMIT, ACC_LIMIT)));
        }
    }
    out
}

fn sample_loss(net: &Lstm, norm: &Normalization, window: &StateWindow, target: f64, grads: Option<&mut [f64]>) -> Result<f64, RlError> {
    let (y, cache) = net.forward(&window.sequence_features(norm))?;
    let t = y[0].tanh();
    let err = DEFAULT_ACC_SCALE * t - target;
    if let Some(g) = grads {
        net.backward_into(&cache, &[2.0 * err * DEFAULT_ACC_SCALE * (1.0 - t * t)], g)?;
    }
    Ok(err * err)
}

/// Supervised regression of observed acceleration on the state window with
/// a single recurrent layer and squared-error loss.
pub fn train_rnn_cloning(
    train: &[TimeSeriesEvent],
    validation: &[TimeSeriesEvent],
    cfg: &CloningConfig,
) -> Result<CloningOutcome, RlError> {
    if train.is_empty() {
        return Err(RlError::NoEvents);
    }
    if cfg.batch_size == 0 || cfg.hidden == 0 || !(cfg.lr > 0.0) {
        return Err(RlError::Config("batch_size, hidden and lr must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let norm = fit_normalization(train);
    let samples: Vec<(StateWindow, f64)> = train.iter().flat_map(|e| cloning_samples(e, cfg.sample_stride)).collect();
    let held_out: Vec<(StateWindow, f64)> =
        validation.iter().flat_map(|e| cloning_samples(e, cfg.sample_stride)).collect();
    let mut net = Lstm::new(3, cfg.hidden, 1, &mut rng)?;
    let mut adam = Adam::new(net.params().len(), cfg.lr);
    let mut log = TrainingLog::new(&["epoch", "train_loss", "validation_loss"]);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut step = 0u64;

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<&(StateWindow, f64)> = chunk.iter().map(|&i| &samples[i]).collect();
            let (mut g, loss) = batch_gradient(&batch, net.params().len(), |(w, y), g| {
                sample_loss(&net, &norm, w, *y, Some(g))
            })?;
            scale(&mut g, 1.0 / batch.len() as f64);
            step += 1;
            check_finite(&g, "recurrent gradient", step)?;
            adam.step(net.params_mut(), &g)?;
            total += loss;
        }
        let train_loss = total / samples.len() as f64;
        let val_loss = if held_out.is_empty() {
            f64::NAN
        } else {
            let refs: Vec<&(StateWindow, f64)> = held_out.iter().collect();
            let (_, l) = batch_gradient(&refs, 0, |(w, y), _| sample_loss(&net, &norm, w, *y, None))?;
            l / held_out.len() as f64
        };
        if !train_loss.is_finite() {
            return Err(RlError::NonFinite { what: "cloning loss", step });
        }
        log::debug!("cloning epoch {epoch}: train {train_loss:.5} validation {val_loss:.5}");
        log.push(vec![epoch as f64, train_loss, val_loss]);
    }
    Ok(CloningOutcome {
        policy: NetPolicy::new(Network::Lstm(net), norm),
        log,
    })
}
