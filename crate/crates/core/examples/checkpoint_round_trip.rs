//! Saves a forecaster, reloads it, checks predictions are bit-identical,
//! then shows how each kind of file damage is reported.

use cabin_ews::preprocess::{prepare, PreprocessConfig};
use cabin_ews::seq2seq::{
    load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, Architecture, CheckpointError, Forecaster,
    ModelConfig, Seq2SeqModel,
};
use cabin_ews::telemetry::{generate_synthetic, SynthConfig};

fn main() -> cabin_ews::Result<()> {
    let frames = generate_synthetic(&SynthConfig {
        seed: 1,
        duration_s: 2 * 3600,
        ..Default::default()
    })?;
    let (ds, _) = prepare(
        &frames,
        &PreprocessConfig {
            lookback_s: 120,
            horizon_s: 30,
            window_stride_s: 30,
            ..Default::default()
        },
    )?;
    let model = Seq2SeqModel::new(ModelConfig::for_dataset(&ds, Architecture::default(), 3))?;
    let f = Forecaster::from_dataset(model, &ds, 2)?;

    let path = std::env::temp_dir().join("cabin_ews_example.ckpt");
    save_checkpoint(&f, &path)?;
    let back = load_checkpoint(&path)?;
    println!(
        "{} -> {} ({} bytes)",
        f.model_id(),
        back.model_id(),
        std::fs::metadata(&path).map_or(0, |m| m.len())
    );

    let window = &frames[..f.lookback()];
    let a = f.predict_frames(window)?;
    let b = back.predict_frames(window)?;
    let identical = a.iter().zip(&b).all(|(p, q)| p.to_bits() == q.to_bits());
    println!("predictions bit-identical: {identical}");

    let bytes = write_checkpoint(&f);
    let mut magic = bytes.clone();
    magic[0] = b'X';
    let mut flipped = bytes.clone();
    let mid = bytes.len() / 2;
    flipped[mid] ^= 0x40;
    let cases = [
        ("wrong magic", magic),
        ("truncated", bytes[..bytes.len() - 9].to_vec()),
        ("flipped bit", flipped),
    ];
    for (what, damaged) in cases {
        let err = read_checkpoint(&damaged).unwrap_err();
        let kind = match err {
            CheckpointError::BadMagic(_) => "BadMagic",
            CheckpointError::Truncated { .. } => "Truncated",
            CheckpointError::ChecksumMismatch { .. } => "ChecksumMismatch",
            _ => "other",
        };
        println!("{what:<12} -> {kind}: {err}");
    }
    Ok(())
}
