use ndarray::{s, Array3, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use super::normalize::{NormalizationParams, NormalizedSegment};
use super::{PreprocessConfig, SplitFractions};
use crate::telemetry::Channel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

impl std::str::FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            _ => Err(format!("unknown split `{s}` (train|val|test)")),
        }
    }
}

/// Number of windows a segment of `len` seconds yields.
pub fn window_count(len: usize, lookback: usize, horizon: usize, stride: usize) -> usize {
    if len < lookback + horizon {
        0
    } else {
        (len - lookback - horizon) / stride + 1
    }
}

/// Where a window sits: segment index, row offset, and origin timestamp
/// (first second of the lookback).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WindowSpan {
    pub segment: usize,
    pub offset: usize,
    pub origin_s: i64,
}

/// Lays out every window over segments given as `(start_s, len)`, sorted by
/// origin (ties keep segment order).
pub fn plan_windows(segments: &[(i64, usize)], cfg: &PreprocessConfig) -> Vec<WindowSpan> {
    let mut spans = Vec::new();
    for (si, &(start, len)) in segments.iter().enumerate() {
        let n = window_count(len, cfg.lookback_s, cfg.horizon_s, cfg.window_stride_s);
        for w in 0..n {
            let offset = w * cfg.window_stride_s;
            spans.push(WindowSpan {
                segment: si,
                offset,
                origin_s: start + offset as i64,
            });
        }
    }
    spans.sort_by_key(|s| s.origin_s);
    spans
}

/// Chronological split sizes `(train, val, test)` for `n` windows.
pub fn split_sizes(n: usize, f: &SplitFractions) -> (usize, usize, usize) {
    let train = ((n as f64 * f.train).round() as usize).min(n);
    let val = ((n as f64 * f.val).round() as usize).min(n - train);
    (train, val, n - train - val)
}

/// Exclusive end timestamp of the training windows, used as the
/// normalization fit boundary.
pub fn train_boundary(spans: &[WindowSpan], n_train: usize, cfg: &PreprocessConfig) -> Option<i64> {
    spans[..n_train]
        .iter()
        .map(|s| s.origin_s + (cfg.lookback_s + cfg.horizon_s) as i64)
        .max()
}

/// Windows of one split: `x` is `N × lookback × features`, `y` is
/// `N × horizon × targets`.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitWindows {
    pub x: Array3<f64>,
    pub y: Array3<f64>,
    pub origins: Vec<i64>,
}

impl SplitWindows {
    pub fn empty(lookback: usize, horizon: usize, n_features: usize, n_targets: usize) -> Self {
        Self {
            x: Array3::zeros((0, lookback, n_features)),
            y: Array3::zeros((0, horizon, n_targets)),
            origins: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.origins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.origins.is_empty()
    }

    pub fn window_x(&self, i: usize) -> ArrayView2<'_, f64> {
        self.x.index_axis(Axis(0), i)
    }

    pub fn window_y(&self, i: usize) -> ArrayView2<'_, f64> {
        self.y.index_axis(Axis(0), i)
    }

    /// Keeps the listed windows, in the given order.
    pub fn select(&self, idx: &[usize]) -> Self {
        Self {
            x: self.x.select(Axis(0), idx),
            y: self.y.select(Axis(0), idx),
            origins: idx.iter().map(|&i| self.origins[i]).collect(),
        }
    }
}

/// Supervised lookback/horizon pairs with their normalization and the
/// configuration that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowedDataset {
    pub features: Vec<Channel>,
    pub targets: Vec<Channel>,
    pub train: SplitWindows,
    pub val: SplitWindows,
    pub test: SplitWindows,
    pub norm: NormalizationParams,
    pub config: PreprocessConfig,
}

impl WindowedDataset {
    pub fn split(&self, split: Split) -> &SplitWindows {
        match split {
            Split::Train => &self.train,
            Split::Val => &self.val,
            Split::Test => &self.test,
        }
    }

    pub fn split_mut(&mut self, split: Split) -> &mut SplitWindows {
        match split {
            Split::Train => &mut self.train,
            Split::Val => &mut self.val,
            Split::Test => &mut self.test,
        }
    }

    pub fn lookback(&self) -> usize {
        self.train.x.dim().1
    }

    pub fn horizon(&self) -> usize {
        self.train.y.dim().1
    }

    pub fn len(&self) -> usize {
        self.train.len() + self.val.len() + self.test.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Every window with its split label, in split then time order.
    pub fn windows(&self) -> impl Iterator<Item = (Split, i64, ArrayView2<'_, f64>, ArrayView2<'_, f64>)> {
        Split::ALL.into_iter().flat_map(move |sp| {
            let w = self.split(sp);
            (0..w.len()).map(move |i| (sp, w.origins[i], w.window_x(i), w.window_y(i)))
        })
    }
}

/// Cuts normalized segments into windows and assigns chronological splits.
pub fn make_windows(
    segments: &[NormalizedSegment],
    norm: &NormalizationParams,
    features: &[Channel],
    targets: &[Channel],
    cfg: &PreprocessConfig,
) -> WindowedDataset {
    let layout: Vec<(i64, usize)> = segments.iter().map(|s| (s.start_s, s.len())).collect();
    let spans = plan_windows(&layout, cfg);
    let (n_train, n_val, _) = split_sizes(spans.len(), &cfg.split_fractions);
    let (lb, h) = (cfg.lookback_s, cfg.horizon_s);
    let build = |spans: &[WindowSpan]| {
        let mut out = SplitWindows {
            x: Array3::zeros((spans.len(), lb, features.len())),
            y: Array3::zeros((spans.len(), h, targets.len())),
            origins: Vec::with_capacity(spans.len()),
        };
        for (i, sp) in spans.iter().enumerate() {
            let seg = &segments[sp.segment];
            out.x
                .index_axis_mut(Axis(0), i)
                .assign(&seg.features.slice(s![sp.offset..sp.offset + lb, ..]));
            out.y
                .index_axis_mut(Axis(0), i)
                .assign(&seg.targets.slice(s![sp.offset + lb..sp.offset + lb + h, ..]));
            out.origins.push(sp.origin_s);
        }
        out
    };
    WindowedDataset {
        features: features.to_vec(),
        targets: targets.to_vec(),
        train: build(&spans[..n_train]),
        val: build(&spans[n_train..n_train + n_val]),
        test: build(&spans[n_train + n_val..]),
        norm: norm.clone(),
        config: cfg.clone(),
    }
}
