//! Early-warning loop: compare forecasts with particulate limits, keep
//! per-channel alarm state with hysteresis, and publish alarm events.
//!
//! [`evaluate_thresholds`] is the pure decision step. [`Monitor`] wraps it
//! around a live frame stream, and [`AlarmSink`]s carry the events out.

mod alarm;
mod monitor;
mod sink;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use alarm::{evaluate_thresholds, AlarmEvent, AlarmState, ChannelAlarm, Transition};
pub use monitor::{
    schedule_retrain, ModelSlot, Monitor, MonitorConfig, MonitorSummary, Prediction, RetrainDecision, TickOutcome,
    SECONDS_PER_DAY,
};
pub use sink::{emit, AlarmSink, FileSink, SinkError, WriterSink};

use crate::seq2seq::Seq2SeqError;
use crate::telemetry::{Channel, TelemetryError};

#[derive(Debug, Error)]
pub enum EwsError {
    #[error("invalid thresholds: {0}")]
    InvalidThresholds(String),
    #[error("prediction has no {0} column")]
    MissingChannel(Channel),
    #[error("prediction contains a non-finite value on {0}")]
    NonFinitePrediction(Channel),
    #[error("frame at {timestamp_s} arrived after {previous_s}; frames must be strictly increasing")]
    OutOfOrder { timestamp_s: i64, previous_s: i64 },
    #[error("frame rejected: {0}")]
    InvalidFrame(#[from] TelemetryError),
    #[error("frame at {timestamp_s} is missing feature {channel}")]
    MissingFeature { timestamp_s: i64, channel: Channel },
    #[error(transparent)]
    Model(#[from] Seq2SeqError),
}

/// Alarm limits on the forecast. A step alarms only when strictly above
/// its limit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ThresholdConfig {
    pub pm25_mass_limit_ugm3: f64,
    /// Limit on the >0.3 µm count per 0.1 L. The default is the ISO 14644
    /// class 3 limit of 102 particles/m³ expressed per 0.1 L.
    pub pm03_count_limit_per_dl: f64,
    /// Consecutive all-clear evaluations needed to clear an alarm.
    pub clear_hysteresis_steps: usize,
}

impl Default for ThresholdConfig {
    fn default() -> Self {
        Self {
            pm25_mass_limit_ugm3: 35.0,
            pm03_count_limit_per_dl: 102.0 / 10_000.0,
            clear_hysteresis_steps: 3,
        }
    }
}

impl ThresholdConfig {
    pub fn validate(&self) -> Result<(), EwsError> {
        for (name, v) in [
            ("pm25_mass_limit_ugm3", self.pm25_mass_limit_ugm3),
            ("pm03_count_limit_per_dl", self.pm03_count_limit_per_dl),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(EwsError::InvalidThresholds(format!("{name} must be finite and >= 0")));
            }
        }
        if self.clear_hysteresis_steps == 0 {
            return Err(EwsError::InvalidThresholds(
                "clear_hysteresis_steps must be >= 1".into(),
            ));
        }
        Ok(())
    }

    /// Monitored channels with their limits, in evaluation order.
    pub fn limits(&self) -> [(Channel, f64); 2] {
        [
            (Channel::Pm2_5, self.pm25_mass_limit_ugm3),
            (Channel::Pc0_3, self.pm03_count_limit_per_dl),
        ]
    }
}
