//! Trains the Bi-GRU encoder-decoder on synthetic telemetry, prints the
//! loss curve and scores the test split in normalized and raw units.

use cabin_ews::eval::evaluate;
use cabin_ews::preprocess::{prepare, PreprocessConfig, Split};
use cabin_ews::seq2seq::{train, Architecture, Forecaster, ModelConfig, Seq2SeqModel, TrainConfig};
use cabin_ews::telemetry::{generate_synthetic, SynthConfig};

fn main() -> cabin_ews::Result<()> {
    let frames = generate_synthetic(&SynthConfig {
        seed: 7,
        duration_s: 6 * 3600,
        ..Default::default()
    })?;
    let (ds, _) = prepare(
        &frames,
        &PreprocessConfig {
            lookback_s: 300,
            horizon_s: 60,
            window_stride_s: 60,
            ..Default::default()
        },
    )?;
    println!(
        "{} features -> {} targets, {} train / {} val / {} test windows",
        ds.features.len(),
        ds.targets.len(),
        ds.train.len(),
        ds.val.len(),
        ds.test.len()
    );

    let model = Seq2SeqModel::new(ModelConfig::for_dataset(&ds, Architecture::default(), 0))?;
    let tcfg = TrainConfig::default();
    let (best, report) = train(&model, &ds, &tcfg)?;
    println!("epoch  train loss   val loss");
    for (e, (tr, va)) in report.train_losses.iter().zip(&report.val_losses).enumerate() {
        let mark = if e + 1 == report.best_epoch { "  <- kept" } else { "" };
        println!("{:>5}  {tr:>10.6}  {va:>10.6}{mark}", e + 1);
    }
    println!("{:.1} s, stopped early: {}", report.wall_time_s, report.stopped_early);

    let f = Forecaster::from_dataset(best, &ds, 0)?;
    let score = evaluate(&f, &ds, Split::Test)?;
    println!("test RMSE normalized {:.4}", score.overall_normalized);
    for c in &score.per_channel {
        println!(
            "  {:<12} normalized {:.4}  raw {:.4} {}",
            c.channel.name(),
            c.normalized,
            c.raw,
            c.channel.unit()
        );
    }
    Ok(())
}
