//! Runs raw frames through the preprocessing chain and prints what each
//! stage decided: outliers, segments, pruned channels, normalization
//! ranges, window counts and undersampling.

use cabin_ews::preprocess::{load_dataset, prepare, save_dataset, PreprocessConfig, Split};
use cabin_ews::telemetry::{generate_synthetic, SynthConfig};

fn main() -> cabin_ews::Result<()> {
    let frames = generate_synthetic(&SynthConfig {
        seed: 3,
        duration_s: 4 * 3600,
        ..Default::default()
    })?;
    let cfg = PreprocessConfig {
        lookback_s: 300,
        horizon_s: 60,
        window_stride_s: 60,
        ..Default::default()
    };
    let (ds, report) = prepare(&frames, &cfg)?;

    println!("input frames      {}", report.input_frames);
    println!(
        "outliers flagged  {} {:?}",
        report.outliers_flagged, report.outliers_by_channel
    );
    println!(
        "segments          {} covering {} frames",
        report.segments, report.segment_frames
    );
    println!(
        "kept features     {:?}",
        report.kept_features.iter().map(|c| c.name()).collect::<Vec<_>>()
    );
    for d in &report.dropped_features {
        println!(
            "dropped           {} (r = {:.3} with {})",
            d.channel.name(),
            d.correlation,
            d.partner.name()
        );
    }
    println!("fit on frames up to t={}", report.fit_boundary_s);
    for r in &ds.norm.ranges {
        println!("  {:<14} [{:.4}, {:.4}]", r.channel.name(), r.min, r.max);
    }
    println!("windows before undersampling {:?}", report.windows_before_undersample);
    println!("undersampling     {:?}", report.undersample);
    for s in Split::ALL {
        let w = ds.split(s);
        println!("{:<5} x {:?}  y {:?}", s.name(), w.x.dim(), w.y.dim());
    }

    let dir = std::env::temp_dir().join("cabin_ews_preprocess_example");
    save_dataset(&ds, Some(&report), &dir)?;
    let (back, _) = load_dataset(&dir)?;
    assert!(back.norm.bits_eq(&ds.norm) && back.train.x == ds.train.x);
    println!("saved and reloaded {}", dir.display());
    Ok(())
}
