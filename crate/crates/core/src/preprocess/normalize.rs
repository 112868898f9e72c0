use std::collections::BTreeMap;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::PreprocessError;
use crate::telemetry::{Channel, TimeSeriesSegment};

/// Normalized values outside the fitted range are clamped to this band.
pub const CLAMP_LOW: f64 = -0.5;
pub const CLAMP_HIGH: f64 = 1.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelRange {
    pub channel: Channel,
    pub min: f64,
    pub max: f64,
}

impl ChannelRange {
    pub fn is_constant(&self) -> bool {
        self.max == self.min
    }

    /// Min-max scaling without clamping; constant channels map to 0.
    pub fn scale(&self, x: f64) -> f64 {
        if self.is_constant() {
            0.0
        } else {
            (x - self.min) / (self.max - self.min)
        }
    }

    /// Min-max scaling clamped to `[CLAMP_LOW, CLAMP_HIGH]`.
    pub fn normalize(&self, x: f64) -> f64 {
        self.scale(x).clamp(CLAMP_LOW, CLAMP_HIGH)
    }

    pub fn denormalize(&self, y: f64) -> f64 {
        if self.is_constant() {
            self.min
        } else {
            y * (self.max - self.min) + self.min
        }
    }
}

/// Per-channel min/max fitted on the training portion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationParams {
    pub ranges: Vec<ChannelRange>,
}

impl NormalizationParams {
    pub fn get(&self, channel: Channel) -> Option<&ChannelRange> {
        self.ranges.iter().find(|r| r.channel == channel)
    }

    pub fn range(&self, channel: Channel) -> Result<&ChannelRange, PreprocessError> {
        self.get(channel).ok_or(PreprocessError::MissingNormalization(channel))
    }

    pub fn constant_channels(&self) -> Vec<Channel> {
        self.ranges
            .iter()
            .filter(|r| r.is_constant())
            .map(|r| r.channel)
            .collect()
    }

    /// Bitwise comparison, so params that went through a checkpoint compare
    /// equal only if nothing changed.
    pub fn bits_eq(&self, other: &Self) -> bool {
        self.ranges.len() == other.ranges.len()
            && self.ranges.iter().zip(&other.ranges).all(|(a, b)| {
                a.channel == b.channel && a.min.to_bits() == b.min.to_bits() && a.max.to_bits() == b.max.to_bits()
            })
    }
}

/// A segment mapped to normalized units, split into feature and target
/// matrices (rows are seconds).
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedSegment {
    pub start_s: i64,
    pub features: Array2<f64>,
    pub targets: Array2<f64>,
}

impl NormalizedSegment {
    pub fn len(&self) -> usize {
        self.features.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Count of values clamped into the band, per channel.
pub type ClampEvents = BTreeMap<Channel, usize>;

/// Union of feature and target channels: features in order, then targets
/// not already present.
pub fn channel_union(features: &[Channel], targets: &[Channel]) -> Vec<Channel> {
    let mut all = features.to_vec();
    for t in targets {
        if !all.contains(t) {
            all.push(*t);
        }
    }
    all
}

/// Fits min/max on every frame stamped before `fit_boundary_s` and maps all
/// segments through it.
///
/// The fit never looks at data at or after the boundary, so validation and
/// test values cannot leak into the scaling.
pub fn normalize(
    segments: &[TimeSeriesSegment],
    features: &[Channel],
    targets: &[Channel],
    fit_boundary_s: i64,
) -> Result<(Vec<NormalizedSegment>, NormalizationParams, ClampEvents), PreprocessError> {
    if segments.is_empty() {
        return Err(PreprocessError::NoData);
    }
    let channels = channel_union(features, targets);
    let mut mins = vec![f64::INFINITY; channels.len()];
    let mut maxs = vec![f64::NEG_INFINITY; channels.len()];
    let mut fitted = 0usize;
    for f in segments
        .iter()
        .flat_map(|s| s.frames())
        .filter(|f| f.timestamp_s < fit_boundary_s)
    {
        fitted += 1;
        for (k, &c) in channels.iter().enumerate() {
            let v = f.get(c);
            mins[k] = mins[k].min(v);
            maxs[k] = maxs[k].max(v);
        }
    }
    if fitted == 0 {
        return Err(PreprocessError::EmptyTrainingPortion);
    }
    let norm = NormalizationParams {
        ranges: channels
            .iter()
            .zip(mins.iter().zip(&maxs))
            .map(|(&channel, (&min, &max))| ChannelRange { channel, min, max })
            .collect(),
    };

    let mut clamps = ClampEvents::new();
    let mut out = Vec::with_capacity(segments.len());
    for seg in segments {
        let n = seg.len();
        let mut all = Array2::<f64>::zeros((n, channels.len()));
        for (t, f) in seg.frames().iter().enumerate() {
            for (k, r) in norm.ranges.iter().enumerate() {
                let raw = r.scale(f.get(r.channel));
                let v = raw.clamp(CLAMP_LOW, CLAMP_HIGH);
                if v != raw {
                    *clamps.entry(r.channel).or_insert(0) += 1;
                }
                all[[t, k]] = v;
            }
        }
        let pick = |list: &[Channel]| {
            let idx: Vec<usize> = list
                .iter()
                .map(|c| channels.iter().position(|x| x == c).expect("in union"))
                .collect();
            all.select(ndarray::Axis(1), &idx)
        };
        out.push(NormalizedSegment {
            start_s: seg.start_s(),
            features: pick(features),
            targets: pick(targets),
        });
    }
    Ok((out, norm, clamps))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::telemetry::TelemetryFrame;

    fn seg(start: i64, temps: &[f64]) -> TimeSeriesSegment {
        let frames = temps
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                let mut f = TelemetryFrame::from_values(start + i as i64, &[7.0; 19]);
                f.temp_c = v;
                f
            })
            .collect();
        TimeSeriesSegment::new(frames).unwrap()
    }

    #[test]
    fn affine_map_on_train_range() {
        // train: t < 3 covers 10, 30, 20; test value 35 lands at 1.25
        let s = seg(0, &[10.0, 30.0, 20.0, 35.0]);
        let (segs, norm, clamps) = normalize(&[s], &[Channel::TempC], &[Channel::TempC], 3).unwrap();
        let col: Vec<f64> = segs[0].features.column(0).to_vec();
        assert_eq!(col, vec![0.0, 1.0, 0.5, 1.25]);
        assert_eq!(segs[0].targets, segs[0].features);
        assert!(clamps.is_empty());
        let r = norm.get(Channel::TempC).unwrap();
        assert_eq!((r.min, r.max), (10.0, 30.0));
        assert_eq!(r.denormalize(0.5), 20.0);
    }

    #[test]
    fn constant_channel_maps_to_zero() {
        let s = seg(0, &[1.0, 2.0]);
        let (segs, norm, _) = normalize(&[s], &[Channel::RhPct], &[Channel::TempC], 10).unwrap();
        assert!(segs[0].features.iter().all(|&v| v == 0.0));
        assert_eq!(norm.constant_channels(), vec![Channel::RhPct]);
        assert_eq!(norm.get(Channel::RhPct).unwrap().denormalize(0.3), 7.0);
    }

    #[test]
    fn out_of_band_values_clamped_and_counted() {
        let s = seg(0, &[0.0, 10.0, 100.0, -50.0]);
        let (segs, _, clamps) = normalize(&[s], &[Channel::TempC], &[Channel::TempC], 2).unwrap();
        assert_eq!(segs[0].features[[2, 0]], CLAMP_HIGH);
        assert_eq!(segs[0].features[[3, 0]], CLAMP_LOW);
        assert_eq!(clamps[&Channel::TempC], 2);
    }

    #[test]
    fn empty_training_portion_errors() {
        let s = seg(100, &[1.0, 2.0]);
        assert!(matches!(
            normalize(&[s], &[Channel::TempC], &[Channel::TempC], 50),
            Err(PreprocessError::EmptyTrainingPortion)
        ));
        assert!(normalize(&[], &[Channel::TempC], &[Channel::TempC], 50).is_err());
    }
}
