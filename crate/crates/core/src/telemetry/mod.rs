//! Telemetry data model, canonical CSV I/O and the synthetic generator.

mod csv_io;
mod frame;
mod synth;

pub use csv_io::{
    canonical_header, read_csv, read_csv_report, read_frames, write_csv, write_frames, CsvReadReport, FrameReader,
    RejectedRow, RowError, TIMESTAMP_COLUMN,
};
pub use frame::{Channel, TelemetryFrame, COUNT_LADDER_UM, MISSING};
pub use synth::{
    generate_synthetic, mass_from_counts, NoiseConfig, ScriptedEvent, SynthConfig, BASE_CO2_PPM, BASE_MAG_UT,
    BASE_PRESSURE_HPA, BASE_RH_PCT, BASE_TEMP_C, BIN_MASS_COEFF,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum TelemetryError {
    #[error("cannot open {path}: {source}")]
    Open {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(String),
    #[error("schema error: {0}")]
    Schema(String),
    #[error("unknown channel `{0}`")]
    UnknownChannel(String),
    #[error("line {line}: timestamp {timestamp_s} precedes {previous_s}")]
    NonMonotone {
        line: u64,
        timestamp_s: i64,
        previous_s: i64,
    },
    #[error("invalid frame at t={timestamp_s}: {reason}")]
    InvalidFrame { timestamp_s: i64, reason: String },
    #[error("invalid synthetic config: {0}")]
    InvalidConfig(String),
}

/// Sampling interval of a [`TimeSeriesSegment`].
pub const CADENCE_S: i64 = 1;

/// A gap-free 1 Hz run of complete frames.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeriesSegment {
    frames: Vec<TelemetryFrame>,
}

impl TimeSeriesSegment {
    /// Builds a segment, checking that timestamps advance by exactly one
    /// second and that no value is missing.
    pub fn new(frames: Vec<TelemetryFrame>) -> Result<Self, TelemetryError> {
        if let Some(pair) = frames
            .windows(2)
            .find(|w| w[1].timestamp_s != w[0].timestamp_s + CADENCE_S)
        {
            return Err(TelemetryError::InvalidFrame {
                timestamp_s: pair[1].timestamp_s,
                reason: format!("not consecutive after t={}", pair[0].timestamp_s),
            });
        }
        if let Some(f) = frames.iter().find(|f| f.has_missing()) {
            return Err(TelemetryError::InvalidFrame {
                timestamp_s: f.timestamp_s,
                reason: "missing value inside segment".into(),
            });
        }
        Ok(Self { frames })
    }

    pub fn start_s(&self) -> i64 {
        self.frames.first().map_or(0, |f| f.timestamp_s)
    }

    pub fn cadence_s(&self) -> i64 {
        CADENCE_S
    }

    pub fn frames(&self) -> &[TelemetryFrame] {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Values of one channel over the whole segment.
    pub fn channel(&self, channel: Channel) -> Vec<f64> {
        self.frames.iter().map(|f| f.get(channel)).collect()
    }
}
