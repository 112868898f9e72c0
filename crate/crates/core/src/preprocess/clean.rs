use std::collections::BTreeMap;

use super::PreprocessConfig;
use crate::telemetry::{Channel, TelemetryFrame, TimeSeriesSegment, MISSING};

/// Scale factor making the MAD a consistent estimator of a normal σ.
pub const MAD_TO_SIGMA: f64 = 1.4826;

pub(crate) fn median(values: &mut [f64]) -> Option<f64> {
    let n = values.len();
    if n == 0 {
        return None;
    }
    let mid = n / 2;
    let (lo, m, _) = values.select_nth_unstable_by(mid, f64::total_cmp);
    let upper = *m;
    if n % 2 == 1 {
        Some(upper)
    } else {
        let lower = lo.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Some((lower + upper) / 2.0)
    }
}

/// Values replaced by [`MISSING`] per channel.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct OutlierSummary {
    pub flagged: BTreeMap<Channel, usize>,
}

impl OutlierSummary {
    pub fn total(&self) -> usize {
        self.flagged.values().sum()
    }
}

/// Replaces values whose robust z-score `|x - median| / (1.4826 * MAD)`
/// exceeds the configured threshold with [`MISSING`].
///
/// Channels with zero MAD are left alone, as are missing values.
pub fn remove_outliers(frames: &[TelemetryFrame], cfg: &PreprocessConfig) -> (Vec<TelemetryFrame>, OutlierSummary) {
    let mut out: Vec<[f64; 19]> = frames.iter().map(|f| f.values()).collect();
    let mut summary = OutlierSummary::default();
    for ch in Channel::ALL {
        let c = ch.index();
        let mut present: Vec<f64> = out.iter().map(|v| v[c]).filter(|x| !x.is_nan()).collect();
        let Some(med) = median(&mut present) else {
            continue;
        };
        let mut dev: Vec<f64> = present.iter().map(|x| (x - med).abs()).collect();
        let mad = median(&mut dev).unwrap_or(0.0);
        if mad == 0.0 {
            continue;
        }
        let scale = MAD_TO_SIGMA * mad;
        let mut n = 0;
        for row in out.iter_mut() {
            let x = row[c];
            if !x.is_nan() && (x - med).abs() / scale > cfg.outlier_mad_threshold {
                row[c] = MISSING;
                n += 1;
            }
        }
        if n > 0 {
            summary.flagged.insert(ch, n);
        }
    }
    let frames = frames
        .iter()
        .zip(&out)
        .map(|(f, v)| TelemetryFrame::from_values(f.timestamp_s, v))
        .collect();
    (frames, summary)
}

/// Averages frames sharing a timestamp channel by channel, ignoring missing
/// values (a channel missing in every duplicate stays missing).
fn collapse_duplicates(frames: &[TelemetryFrame]) -> Vec<TelemetryFrame> {
    let mut out = Vec::with_capacity(frames.len());
    let mut i = 0;
    while i < frames.len() {
        let ts = frames[i].timestamp_s;
        let mut j = i + 1;
        while j < frames.len() && frames[j].timestamp_s == ts {
            j += 1;
        }
        if j - i == 1 {
            out.push(frames[i]);
        } else {
            let mut sum = [0.0; 19];
            let mut cnt = [0usize; 19];
            for f in &frames[i..j] {
                for (k, v) in f.values().iter().enumerate() {
                    if !v.is_nan() {
                        sum[k] += v;
                        cnt[k] += 1;
                    }
                }
            }
            let mean: [f64; 19] = std::array::from_fn(|k| if cnt[k] == 0 { MISSING } else { sum[k] / cnt[k] as f64 });
            out.push(TelemetryFrame::from_values(ts, &mean));
        }
        i = j;
    }
    out
}

/// Splits timestamp-sorted frames into maximal gap-free 1 Hz runs.
///
/// Duplicate timestamps are averaged first; frames with any missing value
/// are then dropped, and every resulting gap starts a new segment.
pub fn segment(frames: &[TelemetryFrame]) -> Vec<TimeSeriesSegment> {
    let mut segments = Vec::new();
    let mut run: Vec<TelemetryFrame> = Vec::new();
    for f in collapse_duplicates(frames) {
        if f.has_missing() {
            if !run.is_empty() {
                segments.push(std::mem::take(&mut run));
            }
            continue;
        }
        if let Some(last) = run.last() {
            if f.timestamp_s != last.timestamp_s + 1 {
                segments.push(std::mem::take(&mut run));
            }
        }
        run.push(f);
    }
    if !run.is_empty() {
        segments.push(run);
    }
    segments
        .into_iter()
        .map(|r| TimeSeriesSegment::new(r).expect("runs are consecutive and complete"))
        .collect()
}
