//! Particulate early-warning pipeline for spacecraft cabin telemetry.
//!
//! The crate covers the whole loop:
//!
//! - [`telemetry`]: the 19-channel frame model, canonical CSV I/O and a
//!   seeded synthetic generator.
//! - [`preprocess`]: outlier removal, gap segmentation, correlation pruning,
//!   train-only min-max normalization, lookback/horizon windowing and
//!   undersampling of all-zero targets.
//! - [`nn`]: GRU cells with exact backpropagation through time, repeat
//!   vector, time-distributed affine layers, MSE and Adam.
//! - [`seq2seq`]: the bidirectional-GRU encoder-decoder forecaster, its
//!   training loop and the binary checkpoint format.
//! - [`ews`]: threshold alarms with hysteresis, the streaming monitor and
//!   alarm sinks.
//! - [`eval`]: RMSE, the GRU vs Bi-GRU comparison and plot-ready exports.
//! - [`cli`]: the `cabin-ews` command line.
//!
//! Runnable walkthroughs live under `examples/`.

pub mod cli;
pub mod eval;
pub mod ews;
pub mod nn;
pub mod preprocess;
pub mod seq2seq;
pub mod telemetry;
pub mod tensor_io;

mod error;

pub use error::{Error, Result};
