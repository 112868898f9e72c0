//! Binary checkpoint of a [`Forecaster`]. All integers and floats are
//! little-endian.
//!
//! ```text
//! magic       4 bytes  "AEDM"
//! version     u16      CHECKPOINT_VERSION
//! flags       u16      bit 0: bidirectional, other bits zero
//! dims        7 × u32  features, targets, enc_hidden, dec_hidden,
//!                      head_hidden, lookback, horizon
//! seed        u64
//! generation  u32
//! n_features  u32, then one u8 channel index per feature
//! n_targets   u32, then one u8 channel index per target
//! n_params    u64
//! params      n_params × f64: encoder forward, encoder backward (if
//!             bidirectional), decoder, head (if head_hidden > 0), output;
//!             each GRU as input weights, hidden weights, bias and each
//!             affine layer as weight, bias, all row-major
//! n_ranges    u32, then per range: u8 channel index, f64 min, f64 max
//! crc32       u32 over every preceding byte
//! ```

use std::fs;
use std::path::Path;

use thiserror::Error;

use super::{Forecaster, ModelConfig, Seq2SeqModel, Seq2SeqParams};
use crate::nn::ParamTensors;
use crate::preprocess::{ChannelRange, NormalizationParams};
use crate::telemetry::Channel;

pub const CHECKPOINT_MAGIC: [u8; 4] = *b"AEDM";
pub const CHECKPOINT_VERSION: u16 = 1;

const FLAG_BIDIRECTIONAL: u16 = 1;
/// Bytes from the start of the file through `n_features`.
const FIXED_HEADER: usize = 4 + 2 + 2 + 7 * 4 + 8 + 4;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("not a checkpoint: bad magic bytes {0:?}")]
    BadMagic([u8; 4]),
    #[error("unsupported checkpoint version {found} (this build reads {expected})")]
    UnsupportedVersion { found: u16, expected: u16 },
    #[error("checkpoint truncated: need {needed} bytes, file has {available}")]
    Truncated { needed: usize, available: usize },
    #[error("checkpoint checksum mismatch: stored {stored:08x}, computed {computed:08x}")]
    ChecksumMismatch { stored: u32, computed: u32 },
    #[error("invalid checkpoint: {0}")]
    Invalid(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Serializes `f` to bytes.
pub fn write_checkpoint(f: &Forecaster) -> Vec<u8> {
    let c = &f.model.config;
    let mut out = Vec::new();
    out.extend_from_slice(&CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    let flags = if c.bidirectional { FLAG_BIDIRECTIONAL } else { 0 };
    out.extend_from_slice(&flags.to_le_bytes());
    for d in [
        c.feature_dim,
        c.target_dim,
        c.enc_hidden,
        c.dec_hidden,
        c.head_hidden,
        c.lookback,
        c.horizon,
    ] {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    out.extend_from_slice(&c.seed.to_le_bytes());
    out.extend_from_slice(&f.generation.to_le_bytes());
    for list in [&f.features, &f.targets] {
        out.extend_from_slice(&(list.len() as u32).to_le_bytes());
        out.extend(list.iter().map(|ch| ch.index() as u8));
    }
    out.extend_from_slice(&(f.model.params.param_count() as u64).to_le_bytes());
    for t in f.model.params.tensors() {
        for v in t {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out.extend_from_slice(&(f.norm.ranges.len() as u32).to_le_bytes());
    for r in &f.norm.ranges {
        out.push(r.channel.index() as u8);
        out.extend_from_slice(&r.min.to_le_bytes());
        out.extend_from_slice(&r.max.to_le_bytes());
    }
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    out
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CheckpointError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        match end {
            Some(end) => {
                let s = &self.buf[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(CheckpointError::Truncated {
                needed: self.pos.saturating_add(n),
                available: self.buf.len(),
            }),
        }
    }

    fn u8(&mut self) -> Result<u8, CheckpointError> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16, CheckpointError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().expect("2 bytes")))
    }

    fn u32(&mut self) -> Result<u32, CheckpointError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64, CheckpointError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self) -> Result<f64, CheckpointError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn channel(&mut self) -> Result<Channel, CheckpointError> {
        let i = self.u8()? as usize;
        Channel::ALL
            .get(i)
            .copied()
            .ok_or_else(|| CheckpointError::Invalid(format!("channel index {i}")))
    }

    fn channels(&mut self) -> Result<Vec<Channel>, CheckpointError> {
        let n = self.u32()? as usize;
        // each index is one byte, so an impossible count shows up as truncation
        self.take(n)?;
        self.pos -= n;
        (0..n).map(|_| self.channel()).collect()
    }
}

/// Parses checkpoint bytes.
///
/// A damaged file is reported as truncation when its body ends before the
/// layout says it should, and as a checksum mismatch otherwise.
pub fn read_checkpoint(bytes: &[u8]) -> Result<Forecaster, CheckpointError> {
    let mut magic = [0u8; 4];
    let head = bytes.len().min(4);
    magic[..head].copy_from_slice(&bytes[..head]);
    if head < 4 {
        if bytes[..head] != CHECKPOINT_MAGIC[..head] {
            return Err(CheckpointError::BadMagic(magic));
        }
        return Err(CheckpointError::Truncated {
            needed: FIXED_HEADER,
            available: bytes.len(),
        });
    }
    if magic != CHECKPOINT_MAGIC {
        return Err(CheckpointError::BadMagic(magic));
    }
    let mut cur = Cursor { buf: bytes, pos: 4 };
    let version = cur.u16()?;
    if version != CHECKPOINT_VERSION {
        return Err(CheckpointError::UnsupportedVersion {
            found: version,
            expected: CHECKPOINT_VERSION,
        });
    }
    // the trailing checksum is checked only once the layout proved complete
    let body_len = bytes.len().saturating_sub(4);
    let mut body = Cursor {
        buf: &bytes[..body_len],
        pos: cur.pos,
    };
    let parsed = parse_body(&mut body);
    if let Err(CheckpointError::Truncated { needed, .. }) = parsed {
        return Err(CheckpointError::Truncated {
            needed: needed + 4,
            available: bytes.len(),
        });
    }
    let stored = u32::from_le_bytes(bytes[body_len..].try_into().map_err(|_| CheckpointError::Truncated {
        needed: body_len + 4,
        available: bytes.len(),
    })?);
    let computed = crc32fast::hash(&bytes[..body_len]);
    if stored != computed {
        return Err(CheckpointError::ChecksumMismatch { stored, computed });
    }
    let f = parsed?;
    if body.pos != body_len {
        return Err(CheckpointError::Invalid(format!(
            "{} unexpected bytes before the checksum",
            body_len - body.pos
        )));
    }
    Ok(f)
}

fn parse_body(cur: &mut Cursor<'_>) -> Result<Forecaster, CheckpointError> {
    let flags = cur.u16()?;
    if flags & !FLAG_BIDIRECTIONAL != 0 {
        return Err(CheckpointError::Invalid(format!("unknown flags {flags:#06x}")));
    }
    let mut dims = [0usize; 7];
    for d in &mut dims {
        *d = cur.u32()? as usize;
    }
    let config = ModelConfig {
        feature_dim: dims[0],
        target_dim: dims[1],
        enc_hidden: dims[2],
        dec_hidden: dims[3],
        head_hidden: dims[4],
        lookback: dims[5],
        horizon: dims[6],
        bidirectional: flags & FLAG_BIDIRECTIONAL != 0,
        seed: cur.u64()?,
    };
    let generation = cur.u32()?;
    let features = cur.channels()?;
    let targets = cur.channels()?;
    let n_params = cur.u64()? as usize;
    let raw = cur.take(n_params.saturating_mul(8))?;
    config.validate().map_err(|e| CheckpointError::Invalid(e.to_string()))?;
    let mut params = Seq2SeqParams::zeros(&config);
    if params.param_count() != n_params {
        return Err(CheckpointError::Invalid(format!(
            "{n_params} parameters stored, config implies {}",
            params.param_count()
        )));
    }
    let mut values = raw
        .chunks_exact(8)
        .map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes")));
    for t in params.tensors_mut() {
        for v in t.iter_mut() {
            *v = values.next().expect("count checked");
        }
    }
    let n_ranges = cur.u32()? as usize;
    cur.take(n_ranges.saturating_mul(17))?;
    cur.pos -= n_ranges * 17;
    let mut ranges = Vec::with_capacity(n_ranges);
    for _ in 0..n_ranges {
        ranges.push(ChannelRange {
            channel: cur.channel()?,
            min: cur.f64()?,
            max: cur.f64()?,
        });
    }
    let model = Seq2SeqModel::from_parts(config, params).map_err(|e| CheckpointError::Invalid(e.to_string()))?;
    Forecaster::new(model, NormalizationParams { ranges }, features, targets, generation)
        .map_err(|e| CheckpointError::Invalid(e.to_string()))
}

/// Writes `f` to `path`, replacing any existing file.
pub fn save_checkpoint(f: &Forecaster, path: impl AsRef<Path>) -> Result<(), CheckpointError> {
    let path = path.as_ref();
    fs::write(path, write_checkpoint(f)).map_err(|source| CheckpointError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Forecaster, CheckpointError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|source| CheckpointError::Io {
        path: path.display().to_string(),
        source,
    })?;
    read_checkpoint(&bytes)
}
