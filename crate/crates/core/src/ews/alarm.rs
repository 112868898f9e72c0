use std::collections::BTreeMap;
use std::fmt;

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use super::{EwsError, ThresholdConfig};
use crate::telemetry::Channel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Transition {
    Raised,
    Cleared,
}

impl fmt::Display for Transition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Transition::Raised => "RAISED",
            Transition::Cleared => "CLEARED",
        })
    }
}

/// One alarm transition, serialized as a single JSON line by the sinks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlarmEvent {
    /// Stream time of the evaluation.
    pub ts: i64,
    /// Time of the forecast step the value belongs to.
    pub predicted_for: i64,
    pub channel: Channel,
    /// Largest forecast value over the horizon.
    pub value: f64,
    pub unit: String,
    pub threshold: f64,
    pub transition: Transition,
    pub model_id: String,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelAlarm {
    pub alarmed: bool,
    /// Consecutive evaluations with every step at or below the limit, while
    /// alarmed.
    pub clear_streak: usize,
}

/// Alarm flag and hysteresis counter per monitored channel.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlarmState {
    pub channels: BTreeMap<Channel, ChannelAlarm>,
}

impl AlarmState {
    pub fn is_alarmed(&self, channel: Channel) -> bool {
        self.channels.get(&channel).is_some_and(|c| c.alarmed)
    }
}

/// Decides alarm transitions for one forecast.
///
/// `prediction` is `horizon × targets` in raw units, with column `j`
/// belonging to `targets[j]`; step `k` forecasts `now + k + 1`. A channel
/// not yet alarmed raises when any step is strictly above its limit. An
/// alarmed channel clears after `clear_hysteresis_steps` consecutive
/// evaluations with every step at or below the limit.
pub fn evaluate_thresholds(
    prediction: ArrayView2<'_, f64>,
    targets: &[Channel],
    cfg: &ThresholdConfig,
    state: &AlarmState,
    now: i64,
    model_id: &str,
) -> Result<(Vec<AlarmEvent>, AlarmState), EwsError> {
    let mut next = state.clone();
    let mut events = Vec::new();
    for (channel, limit) in cfg.limits() {
        let col = targets
            .iter()
            .position(|&c| c == channel)
            .filter(|&j| j < prediction.ncols())
            .ok_or(EwsError::MissingChannel(channel))?;
        let series = prediction.column(col);
        if series.iter().any(|v| !v.is_finite()) {
            return Err(EwsError::NonFinitePrediction(channel));
        }
        // first step holding the maximum
        let (peak_step, peak) =
            series.iter().copied().enumerate().fold(
                (0, f64::NEG_INFINITY),
                |best, (k, v)| if v > best.1 { (k, v) } else { best },
            );
        let over = peak > limit;
        let entry = next.channels.entry(channel).or_default();
        let transition = match (entry.alarmed, over) {
            (false, true) => {
                *entry = ChannelAlarm {
                    alarmed: true,
                    clear_streak: 0,
                };
                Some(Transition::Raised)
            }
            (true, true) => {
                entry.clear_streak = 0;
                None
            }
            (true, false) => {
                entry.clear_streak += 1;
                if entry.clear_streak >= cfg.clear_hysteresis_steps {
                    *entry = ChannelAlarm::default();
                    Some(Transition::Cleared)
                } else {
                    None
                }
            }
            (false, false) => None,
        };
        if let Some(transition) = transition {
            events.push(AlarmEvent {
                ts: now,
                predicted_for: now + peak_step as i64 + 1,
                channel,
                value: peak,
                unit: channel.unit().to_string(),
                threshold: limit,
                transition,
                model_id: model_id.to_string(),
            });
        }
    }
    Ok((events, next))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    const TARGETS: [Channel; 3] = [Channel::Pc0_3, Channel::Pc2_5, Channel::Pm2_5];

    fn horizon(pm25_max: f64) -> Array2<f64> {
        let mut p = Array2::zeros((60, 3));
        p[[10, 2]] = pm25_max;
        p[[11, 2]] = pm25_max / 2.0;
        p
    }

    fn run(pred: &Array2<f64>, state: &AlarmState) -> (Vec<AlarmEvent>, AlarmState) {
        evaluate_thresholds(pred.view(), &TARGETS, &ThresholdConfig::default(), state, 1000, "m").unwrap()
    }

    #[test]
    fn boundary_is_strict() {
        let (ev, _) = run(&horizon(35.0), &AlarmState::default());
        assert!(ev.is_empty());
        let (ev, s) = run(&horizon(35.1), &AlarmState::default());
        assert_eq!(ev.len(), 1);
        assert_eq!(ev[0].transition, Transition::Raised);
        assert_eq!(ev[0].channel, Channel::Pm2_5);
        assert_eq!(ev[0].value, 35.1);
        assert_eq!(ev[0].predicted_for, 1011);
        assert_eq!(ev[0].unit, "ug/m3");
        assert!(s.is_alarmed(Channel::Pm2_5));
    }

    #[test]
    fn clears_after_three_quiet_evaluations() {
        let (_, mut s) = run(&horizon(50.0), &AlarmState::default());
        let quiet = horizon(1.0);
        for _ in 0..2 {
            let (ev, n) = run(&quiet, &s);
            assert!(ev.is_empty());
            s = n;
        }
        let (ev, s) = run(&quiet, &s);
        assert_eq!(ev.len(), 1);
        assert_eq!(ev[0].transition, Transition::Cleared);
        assert!(!s.is_alarmed(Channel::Pm2_5));
    }

    #[test]
    fn exceedance_resets_clear_streak() {
        let (_, s) = run(&horizon(50.0), &AlarmState::default());
        let (_, s) = run(&horizon(1.0), &s);
        let (_, s) = run(&horizon(1.0), &s);
        let (ev, s) = run(&horizon(40.0), &s);
        assert!(ev.is_empty());
        assert_eq!(s.channels[&Channel::Pm2_5].clear_streak, 0);
    }

    #[test]
    fn count_channel_alarms_on_any_particle() {
        let mut p = Array2::zeros((5, 3));
        p[[4, 0]] = 1.0;
        let (ev, _) = run(&p, &AlarmState::default());
        assert_eq!(ev.len(), 1);
        assert_eq!(ev[0].channel, Channel::Pc0_3);
        assert_eq!(ev[0].predicted_for, 1005);
    }

    #[test]
    fn missing_channel_is_an_error() {
        let p = Array2::zeros((5, 1));
        let r = evaluate_thresholds(
            p.view(),
            &[Channel::Pm2_5],
            &ThresholdConfig::default(),
            &AlarmState::default(),
            0,
            "m",
        );
        assert!(matches!(r, Err(EwsError::MissingChannel(Channel::Pc0_3))));
    }

    #[test]
    fn serialized_field_names() {
        let (ev, _) = run(&horizon(36.0), &AlarmState::default());
        let v: serde_json::Value = serde_json::to_value(&ev[0]).unwrap();
        let mut keys: Vec<_> = v.as_object().unwrap().keys().cloned().collect();
        keys.sort();
        assert_eq!(
            keys,
            [
                "channel",
                "model_id",
                "predicted_for",
                "threshold",
                "transition",
                "ts",
                "unit",
                "value"
            ]
        );
        assert_eq!(v["transition"], "RAISED");
        assert_eq!(v["channel"], "pm2_5_ugm3");
    }
}
