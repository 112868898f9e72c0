use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::model::{gather_batch, Seq2SeqModel};
use super::Seq2SeqError;
use crate::nn::{adam_step, AdamConfig, AdamState, ParamTensors};
use crate::preprocess::{SplitWindows, WindowedDataset};

/// Windows per forward pass when only the loss is needed.
const EVAL_BATCH: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    /// Epochs without a val-loss improvement before stopping.
    pub patience: usize,
    /// Global gradient-norm cap; 0 disables clipping.
    pub clip_norm: f64,
    pub shuffle_seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 60,
            batch_size: 32,
            adam: AdamConfig::default(),
            patience: 8,
            clip_norm: 5.0,
            shuffle_seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), Seq2SeqError> {
        let bad = |m: &str| Err(Seq2SeqError::InvalidTrainConfig(m.into()));
        if self.epochs == 0 {
            return bad("epochs must be >= 1");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be >= 1");
        }
        if !(self.clip_norm.is_finite() && self.clip_norm >= 0.0) {
            return bad("clip_norm must be finite and >= 0");
        }
        self.adam
            .validate()
            .map_err(|e| Seq2SeqError::InvalidTrainConfig(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean over training windows of the per-window MSE, one entry per epoch.
    pub train_losses: Vec<f64>,
    /// Val loss of the parameters at the end of each epoch.
    pub val_losses: Vec<f64>,
    /// 1-based epoch whose parameters were returned.
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub stopped_early: bool,
    pub wall_time_s: f64,
}

impl TrainReport {
    pub fn epochs_run(&self) -> usize {
        self.train_losses.len()
    }
}

/// Mean per-window MSE of `model` over every window of `split`.
pub fn evaluate_loss(model: &Seq2SeqModel, split: &SplitWindows) -> Result<f64, Seq2SeqError> {
    if split.is_empty() {
        return Err(Seq2SeqError::EmptySplit("evaluated"));
    }
    let n = split.len();
    let mut total = 0.0;
    let idx: Vec<usize> = (0..n).collect();
    for chunk in idx.chunks(EVAL_BATCH) {
        let (x, y) = gather_batch(split, chunk);
        total += model.loss(x.view(), y.view())? * chunk.len() as f64;
    }
    Ok(total / n as f64)
}

fn check_dataset(model: &Seq2SeqModel, ds: &WindowedDataset) -> Result<(), Seq2SeqError> {
    let c = &model.config;
    let got = (ds.lookback(), ds.features.len(), ds.horizon(), ds.targets.len());
    let want = (c.lookback, c.feature_dim, c.horizon, c.target_dim);
    if got != want {
        return Err(Seq2SeqError::Shape(format!(
            "dataset windows are (lookback {}, features {}, horizon {}, targets {}), \
             model expects (lookback {}, features {}, horizon {}, targets {})",
            got.0, got.1, got.2, got.3, want.0, want.1, want.2, want.3
        )));
    }
    if ds.train.is_empty() {
        return Err(Seq2SeqError::EmptySplit("train"));
    }
    if ds.val.is_empty() {
        return Err(Seq2SeqError::EmptySplit("val"));
    }
    Ok(())
}

/// Mini-batch Adam on the training split with val-based early stopping.
///
/// Returns the model from the epoch with the lowest val loss (earliest on
/// ties) and the per-epoch report. The result is a pure function of the
/// inputs.
pub fn train(
    model: &Seq2SeqModel,
    ds: &WindowedDataset,
    tcfg: &TrainConfig,
) -> Result<(Seq2SeqModel, TrainReport), Seq2SeqError> {
    tcfg.validate()?;
    check_dataset(model, ds)?;
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(tcfg.shuffle_seed);
    let mut current = model.clone();
    let mut state = AdamState::new(current.params.param_count());
    let mut best = current.clone();
    let mut best_val = f64::INFINITY;
    let mut best_epoch = 0;
    let mut since_best = 0;
    let mut stopped_early = false;
    let mut train_losses = Vec::with_capacity(tcfg.epochs);
    let mut val_losses = Vec::with_capacity(tcfg.epochs);
    let n = ds.train.len();
    let mut order: Vec<usize> = (0..n).collect();

    for epoch in 1..=tcfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(tcfg.batch_size) {
            let (x, y) = gather_batch(&ds.train, batch);
            let (loss, mut grads) = current.loss_and_grad(x.view(), y.view())?;
            if !loss.is_finite() {
                return Err(Seq2SeqError::Diverged { epoch });
            }
            epoch_loss += loss * batch.len() as f64;
            if tcfg.clip_norm > 0.0 {
                let norm = grads.global_norm();
                if norm > tcfg.clip_norm {
                    grads.scale(tcfg.clip_norm / norm);
                }
            }
            adam_step(&mut current.params, &grads, &mut state, &tcfg.adam)?;
        }
        let val = evaluate_loss(&current, &ds.val)?;
        if !val.is_finite() {
            return Err(Seq2SeqError::Diverged { epoch });
        }
        train_losses.push(epoch_loss / n as f64);
        val_losses.push(val);
        if val < best_val {
            best_val = val;
            best_epoch = epoch;
            best = current.clone();
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= tcfg.patience {
                stopped_early = epoch < tcfg.epochs;
                break;
            }
        }
    }
    let report = TrainReport {
        train_losses,
        val_losses,
        best_epoch,
        best_val_loss: best_val,
        stopped_early,
        wall_time_s: started.elapsed().as_secs_f64(),
    };
    Ok((best, report))
}
