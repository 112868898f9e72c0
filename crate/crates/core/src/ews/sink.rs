use std::fs::{File, OpenOptions};
use std::io::{self, Write};
use std::path::PathBuf;

use thiserror::Error;

use super::AlarmEvent;

/// Destination for serialized alarm records, one JSON object per line.
pub trait AlarmSink {
    fn name(&self) -> String;
    fn write_line(&mut self, line: &str) -> io::Result<()>;
}

#[derive(Debug, Error)]
#[error("alarm sink {sink}: {source}")]
pub struct SinkError {
    pub sink: String,
    #[source]
    pub source: io::Error,
}

/// Any writer, flushed after each record. `WriterSink::stdout()` is the
/// console sink.
pub struct WriterSink<W: Write> {
    name: String,
    writer: W,
}

impl<W: Write> WriterSink<W> {
    pub fn new(name: impl Into<String>, writer: W) -> Self {
        Self {
            name: name.into(),
            writer,
        }
    }

    pub fn into_inner(self) -> W {
        self.writer
    }
}

impl WriterSink<io::Stdout> {
    pub fn stdout() -> Self {
        Self::new("stdout", io::stdout())
    }
}

impl<W: Write> AlarmSink for WriterSink<W> {
    fn name(&self) -> String {
        self.name.clone()
    }

    fn write_line(&mut self, line: &str) -> io::Result<()> {
        self.writer.write_all(line.as_bytes())?;
        self.writer.write_all(b"\n")?;
        self.writer.flush()
    }
}

/// Append-only file sink. The file is opened on first use and reopened
/// after a failure, so a path that becomes writable later starts working.
#[derive(Debug)]
pub struct FileSink {
    path: PathBuf,
    file: Option<File>,
}

impl FileSink {
    pub fn new(path: impl Into<PathBuf>) -> Self {
        Self {
            path: path.into(),
            file: None,
        }
    }
}

impl AlarmSink for FileSink {
    fn name(&self) -> String {
        self.path.display().to_string()
    }

    fn write_line(&mut self, line: &str) -> io::Result<()> {
        if self.file.is_none() {
            self.file = Some(OpenOptions::new().create(true).append(true).open(&self.path)?);
        }
        let f = self.file.as_mut().expect("opened above");
        let result = f.write_all(format!("{line}\n").as_bytes()).and_then(|_| f.flush());
        if result.is_err() {
            self.file = None;
        }
        result
    }
}

/// Writes `event` to every sink in order. A failing sink does not stop the
/// others; its error is returned.
pub fn emit(event: &AlarmEvent, sinks: &mut [Box<dyn AlarmSink>]) -> Vec<SinkError> {
    let line = serde_json::to_string(event).expect("alarm events always serialize");
    let mut errors = Vec::new();
    for sink in sinks.iter_mut() {
        if let Err(source) = sink.write_line(&line) {
            errors.push(SinkError {
                sink: sink.name(),
                source,
            });
        }
    }
    errors
}
