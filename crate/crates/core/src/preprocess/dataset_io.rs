//! On-disk layout of a [`WindowedDataset`]:
//!
//! ```text
//! <dir>/meta.json   config echo, channels, norm params, split sizes,
//!                   window origins, clamp events, pipeline report
//! <dir>/train.bin   x tensor (N × lookback × F) then y tensor (N × horizon × O)
//! <dir>/val.bin
//! <dir>/test.bin
//! ```
//!
//! Tensors use the [`crate::tensor_io`] layout.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use ndarray::Ix3;
use serde::{Deserialize, Serialize};

use super::normalize::{ClampEvents, NormalizationParams};
use super::window::{Split, SplitWindows, WindowedDataset};
use super::{PrepReport, PreprocessConfig, PreprocessError};
use crate::telemetry::Channel;
use crate::tensor_io::{read_tensor, write_tensor};

pub const META_FILE: &str = "meta.json";
pub const DATASET_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub format_version: u32,
    pub config: PreprocessConfig,
    pub features: Vec<Channel>,
    pub targets: Vec<Channel>,
    pub norm: NormalizationParams,
    pub split_sizes: BTreeMap<String, usize>,
    pub origins: BTreeMap<String, Vec<i64>>,
    pub clamp_events: ClampEvents,
    pub report: Option<PrepReport>,
}

fn split_file(split: Split) -> String {
    format!("{}.bin", split.name())
}

pub fn save_dataset(
    ds: &WindowedDataset,
    report: Option<&PrepReport>,
    dir: impl AsRef<Path>,
) -> Result<(), PreprocessError> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let meta = DatasetMeta {
        format_version: DATASET_FORMAT_VERSION,
        config: ds.config.clone(),
        features: ds.features.clone(),
        targets: ds.targets.clone(),
        norm: ds.norm.clone(),
        split_sizes: Split::ALL
            .iter()
            .map(|&s| (s.name().to_string(), ds.split(s).len()))
            .collect(),
        origins: Split::ALL
            .iter()
            .map(|&s| (s.name().to_string(), ds.split(s).origins.clone()))
            .collect(),
        clamp_events: report.map(|r| r.clamp_events.clone()).unwrap_or_default(),
        report: report.cloned(),
    };
    let mut text = serde_json::to_string_pretty(&meta)?;
    text.push('\n');
    fs::write(dir.join(META_FILE), text)?;
    for split in Split::ALL {
        let w = ds.split(split);
        let mut out = BufWriter::new(File::create(dir.join(split_file(split)))?);
        write_tensor(&mut out, w.x.view().into_dyn())?;
        write_tensor(&mut out, w.y.view().into_dyn())?;
        out.flush()?;
    }
    Ok(())
}

pub fn load_meta(dir: impl AsRef<Path>) -> Result<DatasetMeta, PreprocessError> {
    let path = dir.as_ref().join(META_FILE);
    let text = fs::read_to_string(&path)
        .map_err(|e| PreprocessError::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
    let meta: DatasetMeta = serde_json::from_str(&text)?;
    if meta.format_version != DATASET_FORMAT_VERSION {
        return Err(PreprocessError::Format(format!(
            "dataset format version {} (expected {DATASET_FORMAT_VERSION})",
            meta.format_version
        )));
    }
    Ok(meta)
}

pub fn load_dataset(dir: impl AsRef<Path>) -> Result<(WindowedDataset, DatasetMeta), PreprocessError> {
    let dir = dir.as_ref();
    let meta = load_meta(dir)?;
    let (lb, h) = (meta.config.lookback_s, meta.config.horizon_s);
    let mut splits = Vec::with_capacity(3);
    for split in Split::ALL {
        let mut r = BufReader::new(File::open(dir.join(split_file(split)))?);
        let to3 = |t: ndarray::ArrayD<f64>| {
            t.into_dimensionality::<Ix3>()
                .map_err(|e| PreprocessError::Format(format!("{}: {e}", split.name())))
        };
        let x = to3(read_tensor(&mut r)?)?;
        let y = to3(read_tensor(&mut r)?)?;
        let origins = meta.origins.get(split.name()).cloned().unwrap_or_default();
        let n = origins.len();
        if x.dim() != (n, lb, meta.features.len()) || y.dim() != (n, h, meta.targets.len()) {
            return Err(PreprocessError::Format(format!(
                "{} tensors {:?}/{:?} disagree with meta ({n} windows, lookback {lb}, horizon {h})",
                split.name(),
                x.dim(),
                y.dim()
            )));
        }
        splits.push(SplitWindows { x, y, origins });
    }
    let test = splits.pop().expect("three splits");
    let val = splits.pop().expect("three splits");
    let train = splits.pop().expect("three splits");
    Ok((
        WindowedDataset {
            features: meta.features.clone(),
            targets: meta.targets.clone(),
            train,
            val,
            test,
            norm: meta.norm.clone(),
            config: meta.config.clone(),
        },
        meta,
    ))
}
