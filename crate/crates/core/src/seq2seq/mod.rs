//! Encoder-decoder forecaster: a (bi)directional GRU encoder compresses the
//! lookback window into one state, a repeat vector feeds that state to every
//! decoder step, and a time-distributed head maps decoder states to targets.
//!
//! [`Seq2SeqModel`] works in normalized units on batches.
//! [`Forecaster`] wraps it with normalization params and channel lists so it
//! can take raw telemetry and answer in raw units, and is what checkpoints
//! store.

mod checkpoint;
mod forecaster;
mod model;
mod train;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use checkpoint::{
    load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, CheckpointError, CHECKPOINT_MAGIC,
    CHECKPOINT_VERSION,
};
pub use forecaster::Forecaster;
pub use model::{gather_batch, Seq2SeqCache, Seq2SeqModel, Seq2SeqParams};
pub use train::{evaluate_loss, train, TrainConfig, TrainReport};

use crate::nn::NnError;
use crate::preprocess::PreprocessError;

#[derive(Debug, Error)]
pub enum Seq2SeqError {
    #[error("invalid model config: {0}")]
    InvalidConfig(String),
    #[error("invalid training config: {0}")]
    InvalidTrainConfig(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("{0} split is empty")]
    EmptySplit(&'static str),
    #[error("training diverged at epoch {epoch}: non-finite loss")]
    Diverged { epoch: usize },
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Preprocess(#[from] PreprocessError),
}

/// Layer widths and direction; the parts of a [`ModelConfig`] that do not
/// depend on the dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Architecture {
    pub enc_hidden: usize,
    pub dec_hidden: usize,
    /// Width of the ReLU layer before the output layer; 0 removes it.
    pub head_hidden: usize,
    pub bidirectional: bool,
}

impl Default for Architecture {
    fn default() -> Self {
        Self {
            enc_hidden: 32,
            dec_hidden: 32,
            head_hidden: 16,
            bidirectional: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub feature_dim: usize,
    pub target_dim: usize,
    pub enc_hidden: usize,
    pub dec_hidden: usize,
    pub head_hidden: usize,
    pub lookback: usize,
    pub horizon: usize,
    pub bidirectional: bool,
    pub seed: u64,
}

impl ModelConfig {
    pub fn new(
        feature_dim: usize,
        target_dim: usize,
        lookback: usize,
        horizon: usize,
        arch: Architecture,
        seed: u64,
    ) -> Self {
        Self {
            feature_dim,
            target_dim,
            enc_hidden: arch.enc_hidden,
            dec_hidden: arch.dec_hidden,
            head_hidden: arch.head_hidden,
            lookback,
            horizon,
            bidirectional: arch.bidirectional,
            seed,
        }
    }

    /// Sizes the input and output layers to `ds`.
    pub fn for_dataset(ds: &crate::preprocess::WindowedDataset, arch: Architecture, seed: u64) -> Self {
        Self::new(
            ds.features.len(),
            ds.targets.len(),
            ds.lookback(),
            ds.horizon(),
            arch,
            seed,
        )
    }

    pub fn architecture(&self) -> Architecture {
        Architecture {
            enc_hidden: self.enc_hidden,
            dec_hidden: self.dec_hidden,
            head_hidden: self.head_hidden,
            bidirectional: self.bidirectional,
        }
    }

    /// Width of the encoder state handed to the decoder.
    pub fn context_dim(&self) -> usize {
        if self.bidirectional {
            2 * self.enc_hidden
        } else {
            self.enc_hidden
        }
    }

    pub fn validate(&self) -> Result<(), Seq2SeqError> {
        let dims = [
            ("feature_dim", self.feature_dim),
            ("target_dim", self.target_dim),
            ("enc_hidden", self.enc_hidden),
            ("dec_hidden", self.dec_hidden),
            ("lookback", self.lookback),
            ("horizon", self.horizon),
        ];
        for (name, v) in dims {
            if v == 0 {
                return Err(Seq2SeqError::InvalidConfig(format!("{name} must be >= 1")));
            }
        }
        Ok(())
    }
}
