use ndarray::{Array2, ArrayView2};

use super::{Seq2SeqError, Seq2SeqModel};
use crate::nn::ParamTensors;
use crate::preprocess::{NormalizationParams, PreprocessError, WindowedDataset};
use crate::telemetry::{Channel, TelemetryFrame};

/// A trained model bundled with everything needed to run it on raw
/// telemetry: the normalization fitted on its training data, the feature
/// and target channel order, and a generation counter bumped by each
/// retrain.
#[derive(Debug, Clone, PartialEq)]
pub struct Forecaster {
    pub model: Seq2SeqModel,
    pub norm: NormalizationParams,
    pub features: Vec<Channel>,
    pub targets: Vec<Channel>,
    pub generation: u32,
}

impl Forecaster {
    pub fn new(
        model: Seq2SeqModel,
        norm: NormalizationParams,
        features: Vec<Channel>,
        targets: Vec<Channel>,
        generation: u32,
    ) -> Result<Self, Seq2SeqError> {
        let c = &model.config;
        if features.len() != c.feature_dim || targets.len() != c.target_dim {
            return Err(Seq2SeqError::Shape(format!(
                "{} feature / {} target channels for a model with {} inputs / {} outputs",
                features.len(),
                targets.len(),
                c.feature_dim,
                c.target_dim
            )));
        }
        for &ch in features.iter().chain(&targets) {
            norm.range(ch)?;
        }
        Ok(Self {
            model,
            norm,
            features,
            targets,
            generation,
        })
    }

    /// Bundles `model` with the channels and normalization of the dataset
    /// it was trained on.
    pub fn from_dataset(model: Seq2SeqModel, ds: &WindowedDataset, generation: u32) -> Result<Self, Seq2SeqError> {
        Self::new(
            model,
            ds.norm.clone(),
            ds.features.clone(),
            ds.targets.clone(),
            generation,
        )
    }

    pub fn lookback(&self) -> usize {
        self.model.config.lookback
    }

    pub fn horizon(&self) -> usize {
        self.model.config.horizon
    }

    /// Parameter checksum and generation, e.g. `1a2b3c4d-g0`.
    pub fn model_id(&self) -> String {
        let mut h = crc32fast::Hasher::new();
        for t in self.model.params.tensors() {
            for v in t {
                h.update(&v.to_le_bytes());
            }
        }
        format!("{:08x}-g{}", h.finalize(), self.generation)
    }

    /// Raw `lookback × features` matrix to clamped normalized units.
    pub fn normalize_input(&self, raw: ArrayView2<'_, f64>) -> Result<Array2<f64>, Seq2SeqError> {
        if raw.ncols() != self.features.len() {
            return Err(Seq2SeqError::Shape(format!(
                "input has {} columns, model uses {} features",
                raw.ncols(),
                self.features.len()
            )));
        }
        let mut out = raw.to_owned();
        for (j, &ch) in self.features.iter().enumerate() {
            let r = self.norm.range(ch)?;
            out.column_mut(j).mapv_inplace(|v| r.normalize(v));
        }
        Ok(out)
    }

    /// Normalized `horizon × targets` output to raw units. Particulate
    /// channels are floored at 0.
    pub fn denormalize_output(&self, y: ArrayView2<'_, f64>) -> Result<Array2<f64>, PreprocessError> {
        let mut out = y.to_owned();
        for (j, &ch) in self.targets.iter().enumerate() {
            let r = self.norm.range(ch)?;
            let floor = ch.is_particulate();
            out.column_mut(j).mapv_inplace(|v| {
                let x = r.denormalize(v);
                if floor {
                    x.max(0.0)
                } else {
                    x
                }
            });
        }
        Ok(out)
    }

    /// Forecast in raw units from a raw `lookback × features` matrix.
    pub fn predict(&self, raw: ArrayView2<'_, f64>) -> Result<Array2<f64>, Seq2SeqError> {
        let x = self.normalize_input(raw)?;
        let y = self.model.forward_window(x.view())?;
        Ok(self.denormalize_output(y.view())?)
    }

    /// Pulls the feature columns out of consecutive frames.
    pub fn input_from_frames(&self, frames: &[TelemetryFrame]) -> Array2<f64> {
        Array2::from_shape_fn((frames.len(), self.features.len()), |(t, j)| {
            frames[t].get(self.features[j])
        })
    }

    /// Forecast in raw units from the last `lookback` frames.
    pub fn predict_frames(&self, frames: &[TelemetryFrame]) -> Result<Array2<f64>, Seq2SeqError> {
        if frames.len() != self.lookback() {
            return Err(Seq2SeqError::Shape(format!(
                "{} frames given, lookback is {}",
                frames.len(),
                self.lookback()
            )));
        }
        self.predict(self.input_from_frames(frames).view())
    }
}
