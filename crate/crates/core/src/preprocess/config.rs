use serde::{Deserialize, Serialize};

use super::PreprocessError;
use crate::telemetry::Channel;

/// Chronological train/validation/test proportions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitFractions {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitFractions {
    fn default() -> Self {
        Self {
            train: 0.65,
            val: 0.10,
            test: 0.25,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PreprocessConfig {
    #[serde(with = "real_or_inf")]
    pub outlier_mad_threshold: f64,
    pub correlation_prune_threshold: f64,
    /// Retained all-zero-target windows per nonzero window in the train split.
    #[serde(with = "real_or_inf")]
    pub undersample_zero_ratio: f64,
    pub lookback_s: usize,
    pub horizon_s: usize,
    pub window_stride_s: usize,
    pub split_fractions: SplitFractions,
    pub feature_channels: Vec<Channel>,
    pub target_channels: Vec<Channel>,
    pub rng_seed: u64,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            outlier_mad_threshold: 5.0,
            correlation_prune_threshold: 0.95,
            undersample_zero_ratio: 1.0,
            lookback_s: 5400,
            horizon_s: 60,
            window_stride_s: 60,
            split_fractions: SplitFractions::default(),
            feature_channels: Channel::ALL.to_vec(),
            target_channels: vec![Channel::Pc0_3, Channel::Pc2_5, Channel::Pm2_5],
            rng_seed: 0,
        }
    }
}

impl PreprocessConfig {
    pub fn validate(&self) -> Result<(), PreprocessError> {
        let bad = |m: String| Err(PreprocessError::InvalidConfig(m));
        let f = &self.split_fractions;
        if [f.train, f.val, f.test].iter().any(|&x| !(0.0..=1.0).contains(&x))
            || (f.train + f.val + f.test - 1.0).abs() > 1e-9
        {
            return bad(format!(
                "split fractions {}/{}/{} must be in [0,1] and sum to 1",
                f.train, f.val, f.test
            ));
        }
        if self.lookback_s == 0 || self.horizon_s == 0 || self.window_stride_s == 0 {
            return bad("lookback_s, horizon_s and window_stride_s must be >= 1".into());
        }
        if self.target_channels.is_empty() {
            return bad("target_channels must not be empty".into());
        }
        if self.feature_channels.is_empty() {
            return bad("feature_channels must not be empty".into());
        }
        if !(self.correlation_prune_threshold > 0.0 && self.correlation_prune_threshold <= 1.0) {
            return bad("correlation_prune_threshold must lie in (0, 1]".into());
        }
        if self.outlier_mad_threshold.is_nan() || self.outlier_mad_threshold <= 0.0 {
            return bad("outlier_mad_threshold must be > 0".into());
        }
        if self.undersample_zero_ratio.is_nan() || self.undersample_zero_ratio < 0.0 {
            return bad("undersample_zero_ratio must be >= 0".into());
        }
        Ok(())
    }
}

/// JSON has no infinity; `+inf` is written as the string `"inf"`.
pub(crate) mod real_or_inf {
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_infinite() && *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(*v)
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Str(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Str(s) if s == "inf" => Ok(f64::INFINITY),
            Repr::Str(s) => Err(de::Error::custom(format!("expected number or \"inf\", got {s:?}"))),
        }
    }
}
