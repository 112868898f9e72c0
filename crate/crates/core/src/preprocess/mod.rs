//! Cleaning, feature pruning, normalization and windowing of telemetry into
//! a supervised forecasting dataset.
//!
//! [`prepare`] runs the whole chain in order: outlier removal, gap
//! segmentation (with per-second averaging), correlation pruning, the
//! chronological split boundary, train-only normalization, windowing, and
//! undersampling of all-zero training targets.

mod clean;
mod config;
mod dataset_io;
mod normalize;
mod prune;
mod undersample;
mod window;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use clean::{remove_outliers, segment, OutlierSummary, MAD_TO_SIGMA};
pub use config::{PreprocessConfig, SplitFractions};
pub use dataset_io::{load_dataset, load_meta, save_dataset, DatasetMeta, META_FILE};
pub use normalize::{
    channel_union, normalize, ChannelRange, ClampEvents, NormalizationParams, NormalizedSegment, CLAMP_HIGH, CLAMP_LOW,
};
pub use prune::{pearson, prune_correlated, DroppedChannel, PruneResult};
pub use undersample::{undersample, zero_images, UndersampleReport};
pub use window::{
    make_windows, plan_windows, split_sizes, train_boundary, window_count, Split, SplitWindows, WindowSpan,
    WindowedDataset,
};

use crate::telemetry::{Channel, TelemetryFrame};

#[derive(Debug, Error)]
pub enum PreprocessError {
    #[error("invalid preprocessing config: {0}")]
    InvalidConfig(String),
    #[error("need at least 2 samples for correlation, have {0}")]
    TooFewSamples(usize),
    #[error("no data")]
    NoData,
    #[error("training portion is empty")]
    EmptyTrainingPortion,
    #[error("no gap-free segment reaches lookback + horizon = {needed} s (longest segment: {longest} s)")]
    NotEnoughData { needed: usize, longest: usize },
    #[error("no normalization range for channel {0}")]
    MissingNormalization(Channel),
    #[error("dataset format: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Every decision the pipeline took, recorded in `meta.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrepReport {
    pub input_frames: usize,
    pub outliers_flagged: usize,
    pub outliers_by_channel: BTreeMap<Channel, usize>,
    pub segments: usize,
    pub segment_frames: usize,
    pub kept_features: Vec<Channel>,
    pub dropped_features: Vec<DroppedChannel>,
    pub constant_channels: Vec<Channel>,
    pub fit_boundary_s: i64,
    /// Window counts per split before undersampling.
    pub windows_before_undersample: BTreeMap<String, usize>,
    pub undersample: UndersampleReport,
    pub clamp_events: ClampEvents,
}

/// Runs the full preprocessing chain on raw frames.
pub fn prepare(
    frames: &[TelemetryFrame],
    cfg: &PreprocessConfig,
) -> Result<(WindowedDataset, PrepReport), PreprocessError> {
    cfg.validate()?;
    let (clean, outliers) = remove_outliers(frames, cfg);
    let segments = segment(&clean);
    let layout: Vec<(i64, usize)> = segments.iter().map(|s| (s.start_s(), s.len())).collect();
    let spans = plan_windows(&layout, cfg);
    if spans.is_empty() {
        return Err(PreprocessError::NotEnoughData {
            needed: cfg.lookback_s + cfg.horizon_s,
            longest: layout.iter().map(|l| l.1).max().unwrap_or(0),
        });
    }
    let pruned = prune_correlated(&segments, cfg)?;
    let (n_train, _, _) = split_sizes(spans.len(), &cfg.split_fractions);
    let boundary = train_boundary(&spans, n_train, cfg).ok_or(PreprocessError::EmptyTrainingPortion)?;
    let (norm_segments, norm, clamp_events) = normalize(&segments, &pruned.kept, &cfg.target_channels, boundary)?;
    let windowed = make_windows(&norm_segments, &norm, &pruned.kept, &cfg.target_channels, cfg);
    let before: BTreeMap<String, usize> = Split::ALL
        .iter()
        .map(|&s| (s.name().to_string(), windowed.split(s).len()))
        .collect();
    let (dataset, us) = undersample(&windowed, cfg)?;
    let report = PrepReport {
        input_frames: frames.len(),
        outliers_flagged: outliers.total(),
        outliers_by_channel: outliers.flagged,
        segments: segments.len(),
        segment_frames: layout.iter().map(|l| l.1).sum(),
        kept_features: pruned.kept,
        dropped_features: pruned.dropped,
        constant_channels: pruned.constant,
        fit_boundary_s: boundary,
        windows_before_undersample: before,
        undersample: us,
        clamp_events,
    };
    Ok((dataset, report))
}
