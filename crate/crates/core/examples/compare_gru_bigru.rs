//! Trains the unidirectional baseline and the Bi-GRU on the same windows
//! for a few paired seeds and prints the RMSE table.

use cabin_ews::eval::{compare_models, RmseUnits};
use cabin_ews::preprocess::{prepare, PreprocessConfig};
use cabin_ews::seq2seq::{Architecture, TrainConfig};
use cabin_ews::telemetry::{generate_synthetic, SynthConfig};

fn main() -> cabin_ews::Result<()> {
    let frames = generate_synthetic(&SynthConfig {
        seed: 7,
        duration_s: 4 * 3600,
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
    let bigru = Architecture::default();
    let gru = Architecture {
        bidirectional: false,
        ..bigru
    };
    let tcfg = TrainConfig {
        epochs: 20,
        ..Default::default()
    };
    let table = compare_models(&ds, bigru, gru, &tcfg, &[0, 1, 2])?;

    println!("seed   GRU norm  Bi-GRU norm    GRU raw  Bi-GRU raw");
    for r in &table.rows {
        println!(
            "{:>4}  {:>9.4}  {:>11.4}  {:>9.3}  {:>10.3}",
            r.seed, r.gru.overall_normalized, r.bigru.overall_normalized, r.gru.overall_raw, r.bigru.overall_raw
        );
    }
    let (g, b) = table.aggregate(RmseUnits::Normalized);
    println!("median normalized RMSE: GRU {g:.4}, Bi-GRU {b:.4}");
    println!(
        "Bi-GRU at or below GRU in {} of {} seeds",
        table.bigru_wins(RmseUnits::Normalized),
        table.rows.len()
    );
    table
        .write_csv(RmseUnits::Normalized, std::io::stdout())
        .map_err(|e| cabin_ews::Error::io("stdout", e))?;
    Ok(())
}
