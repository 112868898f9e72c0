//! RMSE, the paired GRU vs Bi-GRU comparison, and plot-ready CSV exports.
//!
//! RMSE is reported twice. Normalized RMSE compares the network output with
//! the dataset's normalized targets, i.e. the units the loss is trained in.
//! Raw RMSE compares the deployed forecast (denormalized, particulates
//! floored at 0) with the raw targets.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use ndarray::{Array3, ArrayView3, Axis};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::preprocess::{Split, WindowedDataset};
use crate::seq2seq::{
    gather_batch, train, Architecture, Forecaster, ModelConfig, Seq2SeqError, Seq2SeqModel, TrainConfig, TrainReport,
};
use crate::telemetry::Channel;

const EVAL_BATCH: usize = 256;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("{0} split is empty")]
    EmptySplit(&'static str),
    #[error("loss report has no epochs")]
    EmptyReport,
    #[error(transparent)]
    Model(#[from] Seq2SeqError),
    #[error(transparent)]
    Preprocess(#[from] crate::preprocess::PreprocessError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Pooled and per-channel RMSE over `N × T × O` arrays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rmse {
    /// Over every entry pooled, not the mean of the per-channel values.
    pub overall: f64,
    pub per_channel: Vec<f64>,
}

pub fn rmse(pred: ArrayView3<'_, f64>, target: ArrayView3<'_, f64>) -> Result<Rmse, EvalError> {
    if pred.dim() != target.dim() {
        return Err(EvalError::Shape(format!(
            "prediction {:?} vs target {:?}",
            pred.dim(),
            target.dim()
        )));
    }
    let (n, t, o) = pred.dim();
    if n * t * o == 0 {
        return Err(EvalError::Shape("empty prediction".into()));
    }
    let mut sums = vec![0.0; o];
    for (p, y) in pred.lanes(Axis(2)).into_iter().zip(target.lanes(Axis(2))) {
        for (k, s) in sums.iter_mut().enumerate() {
            let e = p[k] - y[k];
            *s += e * e;
        }
    }
    let per = (n * t) as f64;
    Ok(Rmse {
        overall: (sums.iter().sum::<f64>() / (per * o as f64)).sqrt(),
        per_channel: sums.iter().map(|s| (s / per).sqrt()).collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelRmse {
    pub channel: Channel,
    pub normalized: f64,
    pub raw: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub split: Split,
    pub windows: usize,
    pub model_id: String,
    pub overall_normalized: f64,
    pub overall_raw: f64,
    pub per_channel: Vec<ChannelRmse>,
}

/// Forecasts for every window of a split.
pub struct SplitForecast {
    /// Network output mapped into the dataset's normalized units.
    pub normalized: Array3<f64>,
    /// Deployed forecast in raw units.
    pub raw: Array3<f64>,
    /// Targets in raw units.
    pub raw_targets: Array3<f64>,
}

fn check_compatible(f: &Forecaster, ds: &WindowedDataset) -> Result<(), EvalError> {
    let model = (f.lookback(), f.features.len(), f.horizon(), f.targets.len());
    let data = (ds.lookback(), ds.features.len(), ds.horizon(), ds.targets.len());
    if model != data || f.features != ds.features || f.targets != ds.targets {
        return Err(EvalError::Shape(format!(
            "model windows (lookback {}, features {}, horizon {}, targets {}) vs dataset \
             windows (lookback {}, features {}, horizon {}, targets {}); model features {:?}, \
             dataset features {:?}",
            model.0, model.1, model.2, model.3, data.0, data.1, data.2, data.3, f.features, ds.features
        )));
    }
    Ok(())
}

/// Runs `f` over every window of `split`.
pub fn forecast_split(f: &Forecaster, ds: &WindowedDataset, split: Split) -> Result<SplitForecast, EvalError> {
    check_compatible(f, ds)?;
    let w = ds.split(split);
    if w.is_empty() {
        return Err(EvalError::EmptySplit(split.name()));
    }
    let same_norm = f.norm.bits_eq(&ds.norm);
    let (n, h, o) = w.y.dim();
    let mut normalized = Array3::zeros((n, h, o));
    let mut raw = Array3::zeros((n, h, o));
    let idx: Vec<usize> = (0..n).collect();
    for chunk in idx.chunks(EVAL_BATCH) {
        let (mut x, _) = gather_batch(w, chunk);
        if !same_norm {
            // dataset units -> raw -> model units
            for (j, &ch) in ds.features.iter().enumerate() {
                let from = ds.norm.range(ch)?;
                let to = f.norm.range(ch)?;
                x.index_axis_mut(Axis(2), j)
                    .mapv_inplace(|v| to.normalize(from.denormalize(v)));
            }
        }
        let (y, _) = f.model.forward(x.view())?;
        for (b, &i) in chunk.iter().enumerate() {
            let out = y.index_axis(Axis(1), b);
            let r = f.denormalize_output(out)?;
            raw.index_axis_mut(Axis(0), i).assign(&r);
            let mut nrm = out.to_owned();
            if !same_norm {
                for (j, &ch) in ds.targets.iter().enumerate() {
                    let model_range = f.norm.range(ch)?;
                    let data_range = ds.norm.range(ch)?;
                    nrm.column_mut(j)
                        .mapv_inplace(|v| data_range.scale(model_range.denormalize(v)));
                }
            }
            normalized.index_axis_mut(Axis(0), i).assign(&nrm);
        }
    }
    let mut raw_targets = w.y.clone();
    for (j, &ch) in ds.targets.iter().enumerate() {
        let r = ds.norm.range(ch)?;
        raw_targets
            .index_axis_mut(Axis(2), j)
            .mapv_inplace(|v| r.denormalize(v));
    }
    Ok(SplitForecast {
        normalized,
        raw,
        raw_targets,
    })
}

/// RMSE of `f` on one split, in normalized and raw units.
pub fn evaluate(f: &Forecaster, ds: &WindowedDataset, split: Split) -> Result<EvalResult, EvalError> {
    let fc = forecast_split(f, ds, split)?;
    let norm = rmse(fc.normalized.view(), ds.split(split).y.view())?;
    let raw = rmse(fc.raw.view(), fc.raw_targets.view())?;
    Ok(EvalResult {
        split,
        windows: ds.split(split).len(),
        model_id: f.model_id(),
        overall_normalized: norm.overall,
        overall_raw: raw.overall,
        per_channel: ds
            .targets
            .iter()
            .enumerate()
            .map(|(j, &channel)| ChannelRmse {
                channel,
                normalized: norm.per_channel[j],
                raw: raw.per_channel[j],
            })
            .collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub seed: u64,
    pub gru: EvalResult,
    pub bigru: EvalResult,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RmseUnits {
    Normalized,
    Raw,
}

impl RmseUnits {
    fn pick(self, r: &EvalResult) -> f64 {
        match self {
            RmseUnits::Normalized => r.overall_normalized,
            RmseUnits::Raw => r.overall_raw,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub rows: Vec<ComparisonRow>,
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

impl ComparisonTable {
    /// Median across seeds of `(rmse_gru, rmse_bigru)`.
    pub fn aggregate(&self, units: RmseUnits) -> (f64, f64) {
        (
            median(self.rows.iter().map(|r| units.pick(&r.gru)).collect()),
            median(self.rows.iter().map(|r| units.pick(&r.bigru)).collect()),
        )
    }

    /// Trials where the `bigru` column is at most the `gru` column.
    pub fn bigru_wins(&self, units: RmseUnits) -> usize {
        self.rows
            .iter()
            .filter(|r| units.pick(&r.bigru) <= units.pick(&r.gru))
            .count()
    }

    /// `seed,rmse_gru,rmse_bigru`, one row per trial, then a `median` row.
    pub fn write_csv<W: Write>(&self, units: RmseUnits, mut out: W) -> std::io::Result<()> {
        writeln!(out, "seed,rmse_gru,rmse_bigru")?;
        for r in &self.rows {
            writeln!(out, "{},{},{}", r.seed, units.pick(&r.gru), units.pick(&r.bigru))?;
        }
        if !self.rows.is_empty() {
            let (g, b) = self.aggregate(units);
            writeln!(out, "median,{g},{b}")?;
        }
        out.flush()
    }
}

/// Trains one model per architecture for each seed on identical data and
/// evaluates both on the test split.
///
/// `bigru_arch` fills the `rmse_bigru` column and `gru_arch` the `rmse_gru`
/// column, whatever their direction flags say. Each trial uses its seed for
/// both the initialization and the shuffle order.
pub fn compare_models(
    ds: &WindowedDataset,
    bigru_arch: Architecture,
    gru_arch: Architecture,
    tcfg: &TrainConfig,
    seeds: &[u64],
) -> Result<ComparisonTable, EvalError> {
    let mut rows = Vec::with_capacity(seeds.len());
    for &seed in seeds {
        let run = |arch: Architecture| -> Result<EvalResult, EvalError> {
            let model = Seq2SeqModel::new(ModelConfig::for_dataset(ds, arch, seed))?;
            let t = TrainConfig {
                shuffle_seed: seed,
                ..*tcfg
            };
            let (best, _) = train(&model, ds, &t)?;
            let f = Forecaster::from_dataset(best, ds, 0)?;
            evaluate(&f, ds, Split::Test)
        };
        let bigru = run(bigru_arch)?;
        let gru = run(gru_arch)?;
        rows.push(ComparisonRow { seed, gru, bigru });
    }
    Ok(ComparisonTable { rows })
}

fn create(path: &Path) -> Result<BufWriter<File>, EvalError> {
    File::create(path).map(BufWriter::new).map_err(|source| EvalError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn io_at(path: &Path) -> impl Fn(std::io::Error) -> EvalError + '_ {
    move |source| EvalError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Writes `timestamp_s,channel,true_value,predicted_value` rows in raw
/// units. Windows appear in time order; within a window rows go step by
/// step, and within a step in target-channel order. Overlapping windows
/// produce repeated timestamps.
pub fn write_predictions<W: Write>(
    f: &Forecaster,
    ds: &WindowedDataset,
    split: Split,
    mut out: W,
) -> Result<usize, EvalError> {
    let fc = forecast_split(f, ds, split)?;
    let w = ds.split(split);
    let mut order: Vec<usize> = (0..w.len()).collect();
    order.sort_by_key(|&i| w.origins[i]);
    let lookback = ds.lookback() as i64;
    let mut rows = 0;
    let body = || -> std::io::Result<()> {
        writeln!(out, "timestamp_s,channel,true_value,predicted_value")?;
        for i in order {
            for t in 0..ds.horizon() {
                let ts = w.origins[i] + lookback + t as i64;
                for (j, ch) in ds.targets.iter().enumerate() {
                    writeln!(
                        out,
                        "{ts},{},{},{}",
                        ch.name(),
                        fc.raw_targets[[i, t, j]],
                        fc.raw[[i, t, j]]
                    )?;
                    rows += 1;
                }
            }
        }
        out.flush()
    };
    body().map_err(|source| EvalError::Io {
        path: "<predictions>".into(),
        source,
    })?;
    Ok(rows)
}

/// [`write_predictions`] into a file; returns the number of data rows.
pub fn export_predictions(
    f: &Forecaster,
    ds: &WindowedDataset,
    split: Split,
    path: impl AsRef<Path>,
) -> Result<usize, EvalError> {
    let path = path.as_ref();
    let out = create(path)?;
    write_predictions(f, ds, split, out).map_err(|e| match e {
        EvalError::Io { source, .. } => io_at(path)(source),
        other => other,
    })
}

/// Writes `epoch,train_loss,val_loss` with 1-based epochs.
pub fn export_loss_curves(report: &TrainReport, path: impl AsRef<Path>) -> Result<(), EvalError> {
    if report.train_losses.is_empty() {
        return Err(EvalError::EmptyReport);
    }
    let path = path.as_ref();
    let mut out = create(path)?;
    let mut body = || -> std::io::Result<()> {
        writeln!(out, "epoch,train_loss,val_loss")?;
        for (k, (t, v)) in report.train_losses.iter().zip(&report.val_losses).enumerate() {
            writeln!(out, "{},{t},{v}", k + 1)?;
        }
        out.flush()
    };
    body().map_err(io_at(path))
}

/// Writes a comparison table CSV to `path`.
pub fn export_comparison(table: &ComparisonTable, units: RmseUnits, path: impl AsRef<Path>) -> Result<(), EvalError> {
    let path = path.as_ref();
    let out = create(path)?;
    table.write_csv(units, out).map_err(io_at(path))
}
