//! Trains a forecaster, then replays an unseen stream through the
//! monitor. Alarm records go to stdout as JSON lines; a summary with the
//! lead time of each PM2.5 raise goes to stderr.

use cabin_ews::ews::{emit, AlarmSink, ModelSlot, Monitor, MonitorConfig, ThresholdConfig, Transition, WriterSink};
use cabin_ews::preprocess::{prepare, PreprocessConfig};
use cabin_ews::seq2seq::{train, Architecture, Forecaster, ModelConfig, Seq2SeqModel, TrainConfig};
use cabin_ews::telemetry::{generate_synthetic, Channel, SynthConfig};

fn main() -> cabin_ews::Result<()> {
    let history = generate_synthetic(&SynthConfig {
        seed: 7,
        duration_s: 6 * 3600,
        ..Default::default()
    })?;
    let (ds, _) = prepare(
        &history,
        &PreprocessConfig {
            lookback_s: 300,
            horizon_s: 60,
            window_stride_s: 60,
            ..Default::default()
        },
    )?;
    let model = Seq2SeqModel::new(ModelConfig::for_dataset(&ds, Architecture::default(), 0))?;
    let tcfg = TrainConfig::default();
    let (best, _) = train(&model, &ds, &tcfg)?;
    let forecaster = Forecaster::from_dataset(best, &ds, 0)?;
    eprintln!("model {}", forecaster.model_id());

    // the stream picks up where the training data ended
    let stream = generate_synthetic(&SynthConfig {
        seed: 1007,
        start_s: history.last().unwrap().timestamp_s + 1,
        duration_s: 4 * 3600,
        ..Default::default()
    })?;
    let cfg = MonitorConfig {
        prediction_cadence_s: 5,
        ..Default::default()
    };
    let mut monitor = Monitor::new(
        ModelSlot::new(forecaster),
        ThresholdConfig::default(),
        cfg,
        stream[0].timestamp_s,
    )?;
    let mut sinks: Vec<Box<dyn AlarmSink>> = vec![Box::new(WriterSink::stdout())];

    let start = stream[0].timestamp_s;
    let pm25 = |ts: i64| stream[(ts - start) as usize].get(Channel::Pm2_5);
    for frame in stream.iter().cloned() {
        let out = monitor.tick(frame)?;
        for event in &out.events {
            for err in emit(event, &mut sinks) {
                eprintln!("{err}");
            }
            if event.channel == Channel::Pm2_5 && event.transition == Transition::Raised {
                // lead: how long before the measured value first crossed
                let crossing = (event.ts..stream.last().unwrap().timestamp_s).find(|&t| pm25(t) > 35.0);
                match crossing {
                    Some(t) => eprintln!(
                        "raised at t={} ({:.1} µg/m³ now), crossed {} s later",
                        event.ts,
                        pm25(event.ts),
                        t - event.ts
                    ),
                    None => eprintln!("raised at t={}, no crossing followed", event.ts),
                }
            }
        }
    }
    let s = monitor.summary();
    eprintln!(
        "{} frames, {} forecasts, {} raised, {} cleared",
        s.frames_accepted, s.predictions, s.raised, s.cleared
    );
    Ok(())
}
