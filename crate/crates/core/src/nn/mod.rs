//! Differentiable building blocks with hand-written backward passes.
//!
//! Everything is batched: a matrix of shape `(B, D)` holds `B` independent
//! samples, and sequences are time-major `(T, B, D)`. A single sample is a
//! batch of one. All arithmetic is `f64`.

mod adam;
mod gru;
mod layers;
mod loss;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use gru::{
    bidirectional_backward, bidirectional_encode, gru_cell_backward, gru_cell_forward, gru_sequence_backward,
    gru_sequence_forward, BiEncoderCache, GruCellParams, GruSequenceCache, GruStepCache,
};
pub use layers::{
    relu, repeat_vector, repeat_vector_backward, sigmoid, time_distributed_affine, time_distributed_affine_backward,
    Activation, AffineCache, AffineParams,
};
pub use loss::mse_loss;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum NnError {
    #[error("{op}: shape mismatch, expected {expected}, got {got}")]
    Shape {
        op: &'static str,
        expected: String,
        got: String,
    },
    #[error("{op}: {msg}")]
    Invalid { op: &'static str, msg: String },
}

pub(crate) fn shape_err(op: &'static str, expected: impl std::fmt::Debug, got: impl std::fmt::Debug) -> NnError {
    NnError::Shape {
        op,
        expected: format!("{expected:?}"),
        got: format!("{got:?}"),
    }
}

/// A set of parameter tensors visited in a fixed order.
///
/// Optimizers, gradient clipping and checkpoints all rely on that order
/// being stable.
pub trait ParamTensors {
    fn tensors(&self) -> Vec<&[f64]>;
    fn tensors_mut(&mut self) -> Vec<&mut [f64]>;

    fn param_count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    fn global_norm(&self) -> f64 {
        self.tensors()
            .iter()
            .flat_map(|t| t.iter())
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }

    fn scale(&mut self, k: f64) {
        for t in self.tensors_mut() {
            t.iter_mut().for_each(|v| *v *= k);
        }
    }

    fn fill(&mut self, value: f64) {
        for t in self.tensors_mut() {
            t.fill(value);
        }
    }

    fn all_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|v| v.is_finite()))
    }
}

/// Products with a transposed operand can come back column-major; parameter
/// and gradient tensors must be row-major for [`ParamTensors`].
pub(crate) fn row_major(a: ndarray::Array2<f64>) -> ndarray::Array2<f64> {
    if a.is_standard_layout() {
        a
    } else {
        a.as_standard_layout().into_owned()
    }
}

pub(crate) fn slice_of<D: ndarray::Dimension>(a: &ndarray::Array<f64, D>) -> &[f64] {
    a.as_slice().expect("parameter arrays are standard layout")
}

pub(crate) fn slice_of_mut<D: ndarray::Dimension>(a: &mut ndarray::Array<f64, D>) -> &mut [f64] {
    a.as_slice_mut().expect("parameter arrays are standard layout")
}
