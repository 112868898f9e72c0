use std::collections::BTreeSet;
use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::Serialize;

use super::{require, EvalArgs, GenArgs, MonitorArgs, PredictArgs, PrepArgs, RetrainArgs, RunConfig, TrainArgs};
use crate::error::{Error, Result};
use crate::eval::{
    evaluate, export_comparison, export_loss_curves, export_predictions, ComparisonRow, ComparisonTable, EvalError,
    EvalResult,
};
use crate::ews::{emit, AlarmSink, FileSink, ModelSlot, Monitor, RetrainDecision, SinkError, WriterSink};
use crate::preprocess::{load_dataset, prepare, save_dataset, PrepReport, Split, WindowedDataset};
use crate::seq2seq::{self, load_checkpoint, save_checkpoint, Forecaster, ModelConfig, Seq2SeqModel, TrainReport};
use crate::telemetry::{
    generate_synthetic, read_csv_report, write_csv, write_frames, Channel, FrameReader, RowError, TelemetryFrame,
};

fn is_stdio(p: &Path) -> bool {
    p.as_os_str() == "-"
}

fn note(quiet: bool, msg: impl AsRef<str>) {
    if !quiet {
        eprintln!("{}", msg.as_ref());
    }
}

fn channel_list(channels: &[Channel]) -> String {
    channels.iter().map(|c| c.name()).collect::<Vec<_>>().join(", ")
}

pub(super) fn gen(mut cfg: RunConfig, a: &GenArgs, quiet: bool) -> Result<()> {
    if let Some(hours) = a.hours {
        let seconds = (hours * 3600.0).round();
        if seconds < 1.0 {
            return Err(Error::Usage(format!("--hours {hours} is shorter than one second")));
        }
        cfg.synth.duration_s = seconds as u64;
    }
    if let Some(start) = a.start {
        cfg.synth.start_s = start;
    }
    cfg.validate()?;
    let frames = generate_synthetic(&cfg.synth)?;
    let out = a.out.as_ref().or(cfg.paths.telemetry_csv.as_ref());
    let dest = match out {
        Some(p) if !is_stdio(p) => {
            write_csv(&frames, p)?;
            p.display().to_string()
        }
        _ => {
            write_frames(&frames, io::stdout().lock())?;
            "stdout".to_string()
        }
    };
    note(
        quiet,
        format!(
            "wrote {} frames ({} s, seed {}) to {dest}",
            frames.len(),
            cfg.synth.duration_s,
            cfg.synth.seed
        ),
    );
    Ok(())
}

fn print_prep_summary(ds: &WindowedDataset, rep: &PrepReport, out: &Path) {
    eprintln!("input frames      {}", rep.input_frames);
    eprintln!("outliers flagged  {}", rep.outliers_flagged);
    eprintln!("segments          {} ({} frames)", rep.segments, rep.segment_frames);
    eprintln!(
        "features kept     {} [{}]",
        ds.features.len(),
        channel_list(&ds.features)
    );
    for d in &rep.dropped_features {
        eprintln!(
            "  dropped {} (r = {:.3} with {})",
            d.channel.name(),
            d.correlation,
            d.partner.name()
        );
    }
    for c in &rep.constant_channels {
        eprintln!("  dropped {} (constant)", c.name());
    }
    eprintln!(
        "windows           train {} / val {} / test {}",
        ds.train.len(),
        ds.val.len(),
        ds.test.len()
    );
    eprintln!(
        "undersampling     kept {} of {} all-zero train windows ({} nonzero)",
        rep.undersample.retained_zero, rep.undersample.zero_windows, rep.undersample.nonzero_windows
    );
    eprintln!("dataset written to {}", out.display());
}

pub(super) fn prep(mut cfg: RunConfig, a: &PrepArgs, quiet: bool) -> Result<()> {
    let input = require(
        a.input.as_ref(),
        cfg.paths.telemetry_csv.as_ref(),
        "input",
        "telemetry_csv",
    )?;
    let out = require(a.out.as_ref(), cfg.paths.dataset_dir.as_ref(), "out", "dataset_dir")?;
    let p = &mut cfg.preprocess;
    if let Some(v) = a.lookback_s {
        p.lookback_s = v;
    }
    if let Some(v) = a.horizon_s {
        p.horizon_s = v;
    }
    if let Some(v) = a.stride_s {
        p.window_stride_s = v;
    }
    cfg.validate()?;
    let read = read_csv_report(&input)?;
    if !read.rejected.is_empty() {
        note(quiet, format!("skipped {} unparsable rows", read.rejected.len()));
    }
    let (ds, rep) = prepare(&read.frames, &cfg.preprocess)?;
    save_dataset(&ds, Some(&rep), &out)?;
    if !quiet {
        print_prep_summary(&ds, &rep, &out);
    }
    Ok(())
}

fn print_train_summary(f: &Forecaster, report: &TrainReport) {
    let first = report.train_losses.first().copied().unwrap_or(f64::NAN);
    let last = report.train_losses.last().copied().unwrap_or(f64::NAN);
    let last_val = report.val_losses.last().copied().unwrap_or(f64::NAN);
    eprintln!(
        "model {} ({})",
        f.model_id(),
        if f.model.config.bidirectional {
            "Bi-GRU encoder"
        } else {
            "GRU encoder"
        }
    );
    eprintln!(
        "epochs run {}{}",
        report.epochs_run(),
        if report.stopped_early { " (early stop)" } else { "" }
    );
    eprintln!("train loss  first {first:.6}  final {last:.6}");
    eprintln!(
        "val loss    final {last_val:.6}  best {:.6} at epoch {}",
        report.best_val_loss, report.best_epoch
    );
}

fn loss_curve_path(checkpoint: &Path) -> PathBuf {
    checkpoint.with_extension("loss.csv")
}

pub(super) fn train(mut cfg: RunConfig, a: &TrainArgs, quiet: bool) -> Result<()> {
    let dir = require(
        a.dataset.as_ref(),
        cfg.paths.dataset_dir.as_ref(),
        "dataset",
        "dataset_dir",
    )?;
    let out = require(a.out.as_ref(), cfg.paths.checkpoint.as_ref(), "out", "checkpoint")?;
    if let Some(b) = a.bidirectional {
        cfg.architecture.bidirectional = b;
    }
    if let Some(e) = a.epochs {
        cfg.train.epochs = e;
    }
    if let Some(lr) = a.learning_rate {
        cfg.train.adam.learning_rate = lr;
    }
    cfg.validate()?;
    let (ds, _) = load_dataset(&dir)?;
    let model = Seq2SeqModel::new(ModelConfig::for_dataset(&ds, cfg.architecture, cfg.model_seed()))?;
    let (best, report) = seq2seq::train(&model, &ds, &cfg.train)?;
    let forecaster = Forecaster::from_dataset(best, &ds, 0)?;
    save_checkpoint(&forecaster, &out)?;
    let curve = a.loss_curve.clone().unwrap_or_else(|| loss_curve_path(&out));
    export_loss_curves(&report, &curve)?;
    if !quiet {
        print_train_summary(&forecaster, &report);
        eprintln!("checkpoint {}  loss curve {}", out.display(), curve.display());
    }
    Ok(())
}

#[derive(Serialize)]
struct CheckpointScores {
    checkpoint: PathBuf,
    model_id: String,
    bidirectional: bool,
    splits: Vec<EvalResult>,
}

fn score_splits(f: &Forecaster, ds: &WindowedDataset) -> Result<Vec<EvalResult>> {
    let mut out = Vec::new();
    for split in Split::ALL {
        match evaluate(f, ds, split) {
            Ok(r) => out.push(r),
            Err(EvalError::EmptySplit(_)) => {}
            Err(e) => return Err(e.into()),
        }
    }
    Ok(out)
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("report types serialize");
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub(super) fn eval(cfg: RunConfig, a: &EvalArgs, quiet: bool) -> Result<()> {
    let checkpoints: Vec<PathBuf> = if a.checkpoint.is_empty() {
        vec![require(
            None,
            cfg.paths.checkpoint.as_ref(),
            "checkpoint",
            "checkpoint",
        )?]
    } else {
        a.checkpoint.clone()
    };
    if checkpoints.len() > 2 {
        return Err(Error::Usage(format!(
            "at most two --checkpoint values, got {}",
            checkpoints.len()
        )));
    }
    let dir = require(
        a.dataset.as_ref(),
        cfg.paths.dataset_dir.as_ref(),
        "dataset",
        "dataset_dir",
    )?;
    let out = require(a.out.as_ref(), cfg.paths.output_dir.as_ref(), "out", "output_dir")?;
    let (ds, _) = load_dataset(&dir)?;
    std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
    let split: Split = a.split.into();

    let mut scores = Vec::new();
    let mut models = Vec::new();
    for (k, path) in checkpoints.iter().enumerate() {
        let f = load_checkpoint(path)?;
        let splits = score_splits(&f, &ds)?;
        let name = if k == 0 {
            "predictions.csv".to_string()
        } else {
            format!("predictions_{}.csv", k + 1)
        };
        if !ds.split(split).is_empty() {
            export_predictions(&f, &ds, split, out.join(name))?;
        }
        scores.push(CheckpointScores {
            checkpoint: path.clone(),
            model_id: f.model_id(),
            bidirectional: f.model.config.bidirectional,
            splits,
        });
        models.push(f);
    }
    write_json(&out.join("rmse.json"), &scores)?;

    if !quiet {
        eprintln!(
            "{:<20} {:<6} {:>8} {:>14} {:>14}",
            "model", "split", "windows", "rmse_norm", "rmse_raw"
        );
        for s in &scores {
            for r in &s.splits {
                eprintln!(
                    "{:<20} {:<6} {:>8} {:>14.6} {:>14.6}",
                    s.model_id,
                    r.split.name(),
                    r.windows,
                    r.overall_normalized,
                    r.overall_raw
                );
            }
        }
    }

    if let [first, second] = models.as_slice() {
        // the bidirectional model goes in the Bi-GRU column; otherwise argument order
        let (gru, bigru) = if first.model.config.bidirectional && !second.model.config.bidirectional {
            (second, first)
        } else {
            (first, second)
        };
        if gru.model.config.bidirectional == bigru.model.config.bidirectional {
            note(
                quiet,
                "both checkpoints share an encoder type; columns follow argument order",
            );
        }
        let row = ComparisonRow {
            seed: bigru.model.config.seed,
            gru: evaluate(gru, &ds, split)?,
            bigru: evaluate(bigru, &ds, split)?,
        };
        let table = ComparisonTable { rows: vec![row] };
        let path = out.join("comparison.csv");
        export_comparison(&table, a.units.into(), &path)?;
        note(quiet, format!("comparison written to {}", path.display()));
    }
    Ok(())
}

/// Start index of the `lookback` consecutive frames ending at `end`.
fn gap_free_window(frames: &[TelemetryFrame], end: usize, lookback: usize) -> Result<usize> {
    let t_end = frames[end].timestamp_s;
    if end + 1 < lookback {
        return Err(Error::Invalid(format!(
            "need {lookback} frames ending at {t_end}, the input has {}",
            end + 1
        )));
    }
    let start = end + 1 - lookback;
    if let Some(w) = frames[start..=end]
        .windows(2)
        .find(|w| w[1].timestamp_s - w[0].timestamp_s != 1)
    {
        return Err(Error::Invalid(format!(
            "the {lookback} s window ending at {t_end} is not gap-free 1 Hz data ({} then {})",
            w[0].timestamp_s, w[1].timestamp_s
        )));
    }
    Ok(start)
}

pub(super) fn predict(cfg: RunConfig, a: &PredictArgs) -> Result<()> {
    let ckpt = require(
        a.checkpoint.as_ref(),
        cfg.paths.checkpoint.as_ref(),
        "checkpoint",
        "checkpoint",
    )?;
    let input = require(
        a.input.as_ref(),
        cfg.paths.telemetry_csv.as_ref(),
        "input",
        "telemetry_csv",
    )?;
    let f = load_checkpoint(&ckpt)?;
    let frames = read_csv_report(&input)?.frames;
    let end = match a.at {
        Some(t) => frames
            .iter()
            .rposition(|fr| fr.timestamp_s == t)
            .ok_or_else(|| Error::Invalid(format!("no frame at timestamp {t}")))?,
        None => frames
            .len()
            .checked_sub(1)
            .ok_or_else(|| Error::Invalid("input has no frames".into()))?,
    };
    let start = gap_free_window(&frames, end, f.lookback())?;
    let values = f.predict_frames(&frames[start..=end])?;
    let t_end = frames[end].timestamp_s;

    let sink: Box<dyn Write> = if is_stdio(&a.out) {
        Box::new(io::stdout().lock())
    } else {
        Box::new(File::create(&a.out).map_err(|e| Error::io(&a.out, e))?)
    };
    let mut w = BufWriter::new(sink);
    let mut body = || -> io::Result<()> {
        writeln!(w, "timestamp_s,channel,predicted")?;
        for (k, row) in values.outer_iter().enumerate() {
            for (c, v) in f.targets.iter().zip(row) {
                writeln!(w, "{},{},{v}", t_end + k as i64 + 1, c.name())?;
            }
        }
        w.flush()
    };
    body().map_err(|e| Error::io(&a.out, e))
}

fn open_stream(path: &Path) -> Result<Box<dyn Read>> {
    if is_stdio(path) {
        Ok(Box::new(io::stdin().lock()))
    } else {
        let f = File::open(path).map_err(|e| Error::io(path, e))?;
        Ok(Box::new(f))
    }
}

pub(super) fn monitor(mut cfg: RunConfig, a: &MonitorArgs, quiet: bool) -> Result<()> {
    let ckpt = require(
        a.checkpoint.as_ref(),
        cfg.paths.checkpoint.as_ref(),
        "checkpoint",
        "checkpoint",
    )?;
    if let Some(c) = a.cadence_s {
        cfg.monitor.prediction_cadence_s = c;
    }
    cfg.validate()?;
    let slot = ModelSlot::new(load_checkpoint(&ckpt)?);
    let mut sinks: Vec<Box<dyn AlarmSink>> = Vec::new();
    if !a.no_console {
        sinks.push(Box::new(WriterSink::stdout()));
    }
    if let Some(log) = a.alarm_log.as_ref().or(cfg.paths.alarm_log.as_ref()) {
        sinks.push(Box::new(FileSink::new(log)));
    }
    let reader = FrameReader::new(BufReader::new(open_stream(&a.input)?))?;

    let mut monitor: Option<Monitor> = None;
    let mut unparsable = 0usize;
    let mut sink_failure: Option<SinkError> = None;
    let mut failed_sinks = BTreeSet::new();
    let mut retrain_noted = false;
    let mut prev_ts: Option<i64> = None;
    for row in reader {
        let (line, frame) = match row {
            Ok(r) => r,
            Err(RowError::Rejected(r)) => {
                unparsable += 1;
                note(quiet, format!("line {}: {}", r.line, r.reason));
                continue;
            }
            Err(RowError::Fatal(e)) => return Err(e.into()),
        };
        let ts = frame.timestamp_s;
        if let (Some(speed), Some(prev)) = (a.replay_speed, prev_ts) {
            if ts > prev {
                std::thread::sleep(Duration::from_secs_f64((ts - prev) as f64 / speed));
            }
        }
        let m = match monitor.as_mut() {
            Some(m) => m,
            None => monitor.insert(Monitor::new(slot.clone(), cfg.thresholds, cfg.monitor, ts)?),
        };
        match m.tick(frame) {
            Ok(outcome) => {
                prev_ts = Some(ts);
                for event in &outcome.events {
                    for e in emit(event, &mut sinks) {
                        if failed_sinks.insert(e.sink.clone()) {
                            note(quiet, format!("warning: {e}"));
                        }
                        sink_failure.get_or_insert(e);
                    }
                }
                if !retrain_noted && m.retrain_due(ts) == RetrainDecision::Due {
                    retrain_noted = true;
                    note(
                        quiet,
                        format!(
                            "retrain due at {ts}: {} days since {}; run `cabin-ews retrain` on recent data",
                            cfg.monitor.retrain_period_days,
                            m.retrain_anchor()
                        ),
                    );
                }
            }
            Err(e) => note(quiet, format!("line {line}: rejected: {e}")),
        }
    }

    let summary = monitor.as_ref().map(|m| m.summary().clone()).unwrap_or_default();
    if !quiet {
        eprintln!(
            "frames {} accepted, {} rejected, {} unparsable; {} buffer resets",
            summary.frames_accepted, summary.frames_rejected, unparsable, summary.buffer_resets
        );
        if summary.alarms() == 0 {
            eprintln!("predictions {}; no alarms", summary.predictions);
        } else {
            eprintln!(
                "predictions {}; alarms {} ({} raised, {} cleared)",
                summary.predictions,
                summary.alarms(),
                summary.raised,
                summary.cleared
            );
        }
    }
    match sink_failure {
        Some(e) => Err(e.into()),
        None => Ok(()),
    }
}

fn test_scores(f: &Forecaster, ds: &WindowedDataset) -> Result<Option<EvalResult>> {
    match evaluate(f, ds, Split::Test) {
        Ok(r) => Ok(Some(r)),
        Err(EvalError::EmptySplit(_)) => Ok(None),
        Err(e) => Err(e.into()),
    }
}

fn describe(label: &str, id: &str, r: Option<&EvalResult>) -> String {
    match r {
        Some(r) => format!(
            "{label} {id}: test RMSE {:.6} normalized, {:.6} raw over {} windows",
            r.overall_normalized, r.overall_raw, r.windows
        ),
        None => format!("{label} {id}: test RMSE unavailable"),
    }
}

pub(super) fn retrain(mut cfg: RunConfig, a: &RetrainArgs, quiet: bool, seed_flag: Option<u64>) -> Result<()> {
    let ckpt = require(
        a.checkpoint.as_ref(),
        cfg.paths.checkpoint.as_ref(),
        "checkpoint",
        "checkpoint",
    )?;
    let old = load_checkpoint(&ckpt)?;
    let seed = seed_flag.or(cfg.seed).unwrap_or(old.model.config.seed);
    cfg = cfg.with_seed(seed);
    cfg.preprocess.lookback_s = old.lookback();
    cfg.preprocess.horizon_s = old.horizon();
    cfg.preprocess.target_channels = old.targets.clone();
    cfg.validate()?;

    let read = read_csv_report(&a.input)?;
    let (ds, rep) = prepare(&read.frames, &cfg.preprocess)?;
    let same_features = ds.features == old.features;
    if !same_features {
        let msg = format!(
            "feature set changed: {} uses [{}], the new data keeps [{}]",
            old.model_id(),
            channel_list(&old.features),
            channel_list(&ds.features)
        );
        if !a.allow_feature_change {
            return Err(Error::Invalid(format!(
                "{msg}; pass --allow-feature-change to retrain anyway"
            )));
        }
        note(quiet, format!("warning: {msg}"));
    }
    if let Some(dir) = &a.dataset_out {
        save_dataset(&ds, Some(&rep), dir)?;
    }

    let arch = old.model.config.architecture();
    let model = Seq2SeqModel::new(ModelConfig::for_dataset(&ds, arch, seed))?;
    let (best, report) = seq2seq::train(&model, &ds, &cfg.train)?;
    let new = Forecaster::from_dataset(best, &ds, old.generation + 1)?;
    save_checkpoint(&new, &a.out)?;

    let new_scores = test_scores(&new, &ds)?;
    let old_scores = if same_features { test_scores(&old, &ds)? } else { None };
    if !quiet {
        print_train_summary(&new, &report);
        eprintln!("{}", describe("old", &old.model_id(), old_scores.as_ref()));
        eprintln!("{}", describe("new", &new.model_id(), new_scores.as_ref()));
        eprintln!("checkpoint {}", a.out.display());
    }
    Ok(())
}
