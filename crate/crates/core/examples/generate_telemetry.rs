//! Generates a few hours of synthetic cabin telemetry, summarizes each
//! channel and writes the canonical CSV.
//!
//! ```text
//! cargo run --example generate_telemetry -- [hours] [out.csv]
//! ```

use cabin_ews::telemetry::{generate_synthetic, write_csv, Channel, SynthConfig};

fn main() -> cabin_ews::Result<()> {
    let mut args = std::env::args().skip(1);
    let hours: u64 = args.next().map_or(3, |h| h.parse().expect("hours must be an integer"));
    let out = args.next();

    let cfg = SynthConfig {
        seed: 42,
        duration_s: hours * 3600,
        ..Default::default()
    };
    let frames = generate_synthetic(&cfg)?;
    println!("{} frames from t={} at 1 Hz", frames.len(), cfg.start_s);

    println!("{:<14} {:>12} {:>12} {:>12}  unit", "channel", "min", "mean", "max");
    for ch in Channel::ALL {
        let v: Vec<f64> = frames.iter().map(|f| f.get(ch)).collect();
        let min = v.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        println!("{:<14} {min:>12.4} {mean:>12.4} {max:>12.4}  {}", ch.name(), ch.unit());
    }

    // a burst is a run of PM2.5 above the default alarm limit
    let mut bursts = 0;
    let mut above = false;
    for f in &frames {
        let now = f.get(Channel::Pm2_5) > 35.0;
        bursts += usize::from(now && !above);
        above = now;
    }
    let quiet = frames.iter().filter(|f| f.get(Channel::Pc0_3) == 0.0).count();
    println!(
        "{bursts} excursions above 35 µg/m³; >0.3 µm count is zero in {:.1}% of frames",
        100.0 * quiet as f64 / frames.len() as f64
    );

    if let Some(path) = out {
        write_csv(&frames, &path)?;
        println!("wrote {path}");
    }
    Ok(())
}
