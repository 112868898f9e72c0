use std::collections::VecDeque;
use std::sync::{Arc, RwLock};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::alarm::{evaluate_thresholds, AlarmEvent, AlarmState, Transition};
use super::{EwsError, ThresholdConfig};
use crate::seq2seq::Forecaster;
use crate::telemetry::TelemetryFrame;

pub const SECONDS_PER_DAY: i64 = 86_400;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RetrainDecision {
    Due,
    NotDue,
}

/// A retrain is due once `period_days` whole days (of 86 400 s) have passed
/// since `anchor`.
pub fn schedule_retrain(anchor: i64, now: i64, period_days: u32) -> RetrainDecision {
    if now - anchor >= period_days as i64 * SECONDS_PER_DAY {
        RetrainDecision::Due
    } else {
        RetrainDecision::NotDue
    }
}

/// Shared handle to the active model.
///
/// Readers take a snapshot `Arc` and keep using it for a whole inference,
/// so a concurrent [`ModelSlot::replace`] never exposes a half-swapped
/// model.
#[derive(Debug, Clone)]
pub struct ModelSlot(Arc<RwLock<Arc<Forecaster>>>);

impl ModelSlot {
    pub fn new(model: Forecaster) -> Self {
        Self(Arc::new(RwLock::new(Arc::new(model))))
    }

    pub fn snapshot(&self) -> Arc<Forecaster> {
        Arc::clone(&self.0.read().expect("model slot lock poisoned"))
    }

    /// Installs `model` and returns the one it replaced.
    pub fn replace(&self, model: Forecaster) -> Arc<Forecaster> {
        let mut guard = self.0.write().expect("model slot lock poisoned");
        std::mem::replace(&mut *guard, Arc::new(model))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MonitorConfig {
    /// Stream seconds between forecasts once the buffer is full.
    pub prediction_cadence_s: i64,
    pub retrain_period_days: u32,
}

impl Default for MonitorConfig {
    fn default() -> Self {
        Self {
            prediction_cadence_s: 60,
            retrain_period_days: 30,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    /// Timestamp of the newest frame in the input window.
    pub at: i64,
    /// `horizon × targets` in raw units.
    pub values: Array2<f64>,
    pub model_id: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TickOutcome {
    pub prediction: Option<Prediction>,
    pub events: Vec<AlarmEvent>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MonitorSummary {
    pub frames_accepted: usize,
    pub frames_rejected: usize,
    /// Times a timestamp gap emptied the input buffer.
    pub buffer_resets: usize,
    pub predictions: usize,
    pub raised: usize,
    pub cleared: usize,
}

impl MonitorSummary {
    pub fn alarms(&self) -> usize {
        self.raised + self.cleared
    }
}

/// Streaming forecaster-plus-alarm loop over 1 Hz frames.
///
/// Frames must arrive with strictly increasing timestamps. The last
/// `lookback` consecutive frames are kept; a gap in the stream empties the
/// buffer, since a window must be gap-free. Once full, the buffer is
/// forecast every `prediction_cadence_s` seconds of stream time.
#[derive(Debug)]
pub struct Monitor {
    model: ModelSlot,
    thresholds: ThresholdConfig,
    config: MonitorConfig,
    alarms: AlarmState,
    buffer: VecDeque<TelemetryFrame>,
    last_ts: Option<i64>,
    last_prediction: Option<Prediction>,
    retrain_anchor: i64,
    summary: MonitorSummary,
}

impl Monitor {
    pub fn new(
        model: ModelSlot,
        thresholds: ThresholdConfig,
        config: MonitorConfig,
        retrain_anchor: i64,
    ) -> Result<Self, EwsError> {
        thresholds.validate()?;
        if config.prediction_cadence_s < 1 {
            return Err(EwsError::InvalidThresholds("prediction_cadence_s must be >= 1".into()));
        }
        let lookback = model.snapshot().lookback();
        Ok(Self {
            model,
            thresholds,
            config,
            alarms: AlarmState::default(),
            buffer: VecDeque::with_capacity(lookback),
            last_ts: None,
            last_prediction: None,
            retrain_anchor,
            summary: MonitorSummary::default(),
        })
    }

    pub fn model(&self) -> &ModelSlot {
        &self.model
    }

    pub fn alarms(&self) -> &AlarmState {
        &self.alarms
    }

    pub fn buffered(&self) -> usize {
        self.buffer.len()
    }

    pub fn last_prediction(&self) -> Option<&Prediction> {
        self.last_prediction.as_ref()
    }

    pub fn summary(&self) -> &MonitorSummary {
        &self.summary
    }

    pub fn retrain_anchor(&self) -> i64 {
        self.retrain_anchor
    }

    pub fn retrain_due(&self, now: i64) -> RetrainDecision {
        schedule_retrain(self.retrain_anchor, now, self.config.retrain_period_days)
    }

    /// Swaps in a retrained model and moves the retrain anchor to `at`.
    pub fn complete_retrain(&mut self, model: Forecaster, at: i64) -> Arc<Forecaster> {
        self.retrain_anchor = at;
        self.model.replace(model)
    }

    fn check_frame(&self, frame: &TelemetryFrame, model: &Forecaster) -> Result<(), EwsError> {
        if let Some(prev) = self.last_ts {
            if frame.timestamp_s <= prev {
                return Err(EwsError::OutOfOrder {
                    timestamp_s: frame.timestamp_s,
                    previous_s: prev,
                });
            }
        }
        frame.validate()?;
        if let Some(&channel) = model.features.iter().find(|&&c| frame.get(c).is_nan()) {
            return Err(EwsError::MissingFeature {
                timestamp_s: frame.timestamp_s,
                channel,
            });
        }
        Ok(())
    }

    /// Ingests one frame; forecasts and evaluates thresholds when due.
    ///
    /// A rejected frame leaves the monitor unchanged apart from the
    /// rejection count.
    pub fn tick(&mut self, frame: TelemetryFrame) -> Result<TickOutcome, EwsError> {
        let model = self.model.snapshot();
        if let Err(e) = self.check_frame(&frame, &model) {
            self.summary.frames_rejected += 1;
            return Err(e);
        }
        let ts = frame.timestamp_s;
        if self.last_ts.is_some_and(|prev| ts - prev > 1) && !self.buffer.is_empty() {
            self.buffer.clear();
            self.summary.buffer_resets += 1;
        }
        self.last_ts = Some(ts);
        self.summary.frames_accepted += 1;
        let lookback = model.lookback();
        self.buffer.push_back(frame);
        while self.buffer.len() > lookback {
            self.buffer.pop_front();
        }
        let due = self.buffer.len() == lookback
            && self
                .last_prediction
                .as_ref()
                .is_none_or(|p| ts - p.at >= self.config.prediction_cadence_s);
        if !due {
            return Ok(TickOutcome::default());
        }
        let window: Vec<TelemetryFrame> = self.buffer.iter().cloned().collect();
        let values = model.predict_frames(&window)?;
        let model_id = model.model_id();
        let (events, next) = evaluate_thresholds(
            values.view(),
            &model.targets,
            &self.thresholds,
            &self.alarms,
            ts,
            &model_id,
        )?;
        self.alarms = next;
        self.summary.predictions += 1;
        for e in &events {
            match e.transition {
                Transition::Raised => self.summary.raised += 1,
                Transition::Cleared => self.summary.cleared += 1,
            }
        }
        let prediction = Prediction {
            at: ts,
            values,
            model_id,
        };
        self.last_prediction = Some(prediction.clone());
        Ok(TickOutcome {
            prediction: Some(prediction),
            events,
        })
    }
}
