//! Canonical telemetry CSV format.
//!
//! Twenty comma-separated columns, `timestamp_s` first and then every
//! [`Channel`] in canonical order. Missing values are empty cells; floats use
//! Rust's shortest round-trip formatting, so `read(write(x)) == x` bit for
//! bit.

use std::fs::File;
use std::io::{self, BufReader, Read, Write};
use std::path::Path;

use super::frame::{Channel, TelemetryFrame, MISSING};
use super::TelemetryError;

pub const TIMESTAMP_COLUMN: &str = "timestamp_s";

/// The exact canonical header line (without the trailing LF).
pub fn canonical_header() -> String {
    std::iter::once(TIMESTAMP_COLUMN)
        .chain(Channel::ALL.iter().map(|c| c.name()))
        .collect::<Vec<_>>()
        .join(",")
}

/// A data row that could not be turned into a frame.
#[derive(Debug, Clone, PartialEq)]
pub struct RejectedRow {
    pub line: u64,
    pub reason: String,
}

/// Streaming reader over canonical CSV rows.
///
/// Yields one item per data row. Rows whose timestamp does not parse come
/// back as `Err(RowError::Rejected)` so callers can count and skip them;
/// numeric cells that do not parse become [`MISSING`].
pub struct FrameReader<R: Read> {
    inner: csv::Reader<R>,
    record: csv::StringRecord,
}

#[derive(Debug)]
pub enum RowError {
    Rejected(RejectedRow),
    Fatal(TelemetryError),
}

impl<R: Read> FrameReader<R> {
    /// Wraps a reader and validates the header line.
    pub fn new(reader: R) -> Result<Self, TelemetryError> {
        let mut inner = csv::ReaderBuilder::new()
            .has_headers(true)
            .flexible(true)
            .from_reader(reader);
        let headers = inner.headers().map_err(csv_error)?.clone();
        check_header(&headers)?;
        Ok(Self {
            inner,
            record: csv::StringRecord::new(),
        })
    }
}

impl<R: Read> Iterator for FrameReader<R> {
    /// `(line number, frame)`; the header is line 1.
    type Item = Result<(u64, TelemetryFrame), RowError>;

    fn next(&mut self) -> Option<Self::Item> {
        match self.inner.read_record(&mut self.record) {
            Ok(false) => None,
            Ok(true) => {
                let line = self.record.position().map_or(0, |p| p.line());
                Some(parse_record(&self.record, line).map(|f| (line, f)))
            }
            Err(e) => Some(Err(RowError::Fatal(csv_error(e)))),
        }
    }
}

fn csv_error(e: csv::Error) -> TelemetryError {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => TelemetryError::Io(io),
            _ => unreachable!(),
        }
    } else {
        TelemetryError::Csv(e.to_string())
    }
}

fn check_header(headers: &csv::StringRecord) -> Result<(), TelemetryError> {
    let expected: Vec<&str> = std::iter::once(TIMESTAMP_COLUMN)
        .chain(Channel::ALL.iter().map(|c| c.name()))
        .collect();
    for (i, want) in expected.iter().enumerate() {
        match headers.get(i) {
            Some(got) if got == *want => {}
            Some(got) => {
                return Err(TelemetryError::Schema(format!(
                    "column {} is `{got}`, expected `{want}`",
                    i + 1
                )))
            }
            None => return Err(TelemetryError::Schema(format!("missing column `{want}`"))),
        }
    }
    if headers.len() > expected.len() {
        return Err(TelemetryError::Schema(format!(
            "unexpected extra column `{}`",
            &headers[expected.len()]
        )));
    }
    Ok(())
}

fn parse_record(rec: &csv::StringRecord, line: u64) -> Result<TelemetryFrame, RowError> {
    let reject = |reason: String| RowError::Rejected(RejectedRow { line, reason });
    if rec.len() != 20 {
        return Err(reject(format!("expected 20 fields, found {}", rec.len())));
    }
    let timestamp_s: i64 = rec[0]
        .trim()
        .parse()
        .map_err(|_| reject(format!("unparsable timestamp `{}`", &rec[0])))?;
    let mut values = [MISSING; 19];
    for (v, cell) in values.iter_mut().zip(rec.iter().skip(1)) {
        *v = cell.trim().parse::<f64>().unwrap_or(MISSING);
    }
    Ok(TelemetryFrame::from_values(timestamp_s, &values))
}

/// Result of reading a whole file: frames in file order plus the rows that
/// were skipped.
#[derive(Debug, Clone, Default)]
pub struct CsvReadReport {
    pub frames: Vec<TelemetryFrame>,
    pub rejected: Vec<RejectedRow>,
}

/// Reads every frame from `reader`, enforcing non-decreasing timestamps.
pub fn read_frames<R: Read>(reader: R) -> Result<CsvReadReport, TelemetryError> {
    let mut report = CsvReadReport::default();
    let mut last: Option<i64> = None;
    for row in FrameReader::new(reader)? {
        match row {
            Ok((line, frame)) => {
                if let Some(prev) = last {
                    if frame.timestamp_s < prev {
                        return Err(TelemetryError::NonMonotone {
                            line,
                            timestamp_s: frame.timestamp_s,
                            previous_s: prev,
                        });
                    }
                }
                last = Some(frame.timestamp_s);
                report.frames.push(frame);
            }
            Err(RowError::Rejected(r)) => report.rejected.push(r),
            Err(RowError::Fatal(e)) => return Err(e),
        }
    }
    Ok(report)
}

/// Reads a canonical CSV file. Rows with unparsable timestamps are skipped;
/// use [`read_csv_report`] to see them.
pub fn read_csv(path: impl AsRef<Path>) -> Result<Vec<TelemetryFrame>, TelemetryError> {
    Ok(read_csv_report(path)?.frames)
}

pub fn read_csv_report(path: impl AsRef<Path>) -> Result<CsvReadReport, TelemetryError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| TelemetryError::Open {
        path: path.display().to_string(),
        source: e,
    })?;
    read_frames(BufReader::new(file))
}

fn format_value(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        format!("{v}")
    }
}

/// Writes frames in canonical form to any writer.
pub fn write_frames<W: Write>(frames: &[TelemetryFrame], writer: W) -> Result<(), TelemetryError> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(writer);
    w.write_record(std::iter::once(TIMESTAMP_COLUMN).chain(Channel::ALL.iter().map(|c| c.name())))
        .map_err(csv_error)?;
    let mut row: Vec<String> = Vec::with_capacity(20);
    for f in frames {
        row.clear();
        row.push(f.timestamp_s.to_string());
        row.extend(f.values().iter().map(|&v| format_value(v)));
        w.write_record(&row).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_csv(frames: &[TelemetryFrame], path: impl AsRef<Path>) -> Result<(), TelemetryError> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| TelemetryError::Open {
        path: path.display().to_string(),
        source: e,
    })?;
    write_frames(frames, io::BufWriter::new(file))
}
