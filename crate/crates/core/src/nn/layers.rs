use ndarray::{Array1, Array2, Array3, ArrayView2, ArrayView3, Axis, Zip};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{row_major, shape_err, slice_of, slice_of_mut, NnError, ParamTensors};

/// Logistic sigmoid, split by sign so `exp` never overflows.
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[inline]
pub fn relu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Identity,
}

/// `y = activation(W x + b)` with `W` of shape `(out, in)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineParams {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
    pub activation: Activation,
}

impl AffineParams {
    pub fn zeros(input_dim: usize, output_dim: usize, activation: Activation) -> Self {
        Self {
            weight: Array2::zeros((output_dim, input_dim)),
            bias: Array1::zeros(output_dim),
            activation,
        }
    }

    /// Uniform weights in `±1/√in`, zero bias.
    pub fn init<R: Rng>(input_dim: usize, output_dim: usize, activation: Activation, rng: &mut R) -> Self {
        let k = 1.0 / (input_dim as f64).sqrt();
        let mut p = Self::zeros(input_dim, output_dim, activation);
        p.weight.iter_mut().for_each(|w| *w = rng.random_range(-k..=k));
        p
    }

    pub fn input_dim(&self) -> usize {
        self.weight.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.weight.nrows()
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.input_dim(), self.output_dim(), self.activation)
    }
}

impl ParamTensors for AffineParams {
    fn tensors(&self) -> Vec<&[f64]> {
        vec![slice_of(&self.weight), slice_of(&self.bias)]
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        vec![slice_of_mut(&mut self.weight), slice_of_mut(&mut self.bias)]
    }
}

/// Copies `state` (`B × D`) once per output step, giving `(n, B, D)`.
pub fn repeat_vector(state: ArrayView2<'_, f64>, n: usize) -> Result<Array3<f64>, NnError> {
    if n < 1 {
        return Err(NnError::Invalid {
            op: "repeat_vector",
            msg: "n must be >= 1".into(),
        });
    }
    let (b, d) = state.dim();
    let mut out = Array3::zeros((n, b, d));
    for mut step in out.outer_iter_mut() {
        step.assign(&state);
    }
    Ok(out)
}

/// Gradient of [`repeat_vector`]: the sum over copies.
pub fn repeat_vector_backward(upstream: ArrayView3<'_, f64>) -> Array2<f64> {
    upstream.sum_axis(Axis(0))
}

#[derive(Debug, Clone)]
pub struct AffineCache {
    inputs: Array2<f64>,
    outputs: Array2<f64>,
    steps: usize,
}

/// Applies the same affine map to every timestep of `(T, B, H)`.
pub fn time_distributed_affine(
    p: &AffineParams,
    inputs: ArrayView3<'_, f64>,
) -> Result<(Array3<f64>, AffineCache), NnError> {
    let (t, b, h) = inputs.dim();
    if h != p.input_dim() {
        return Err(shape_err("time_distributed_affine", p.input_dim(), h));
    }
    let flat = inputs.to_shape((t * b, h)).expect("contiguous reshape").into_owned();
    let mut out = flat.dot(&p.weight.t()) + &p.bias;
    if p.activation == Activation::Relu {
        out.mapv_inplace(relu);
    }
    // products may come back column-major; to_shape copies when needed
    let shaped = out
        .to_shape((t, b, p.output_dim()))
        .expect("row-major reshape")
        .into_owned();
    Ok((
        shaped,
        AffineCache {
            inputs: flat,
            outputs: out,
            steps: t,
        },
    ))
}

/// Returns `(parameter gradients, input gradients)`.
pub fn time_distributed_affine_backward(
    p: &AffineParams,
    cache: &AffineCache,
    upstream: ArrayView3<'_, f64>,
) -> Result<(AffineParams, Array3<f64>), NnError> {
    let (t, b, o) = upstream.dim();
    if o != p.output_dim() || t != cache.steps || t * b != cache.inputs.nrows() {
        return Err(shape_err(
            "time_distributed_affine_backward",
            (cache.steps, cache.inputs.nrows() / cache.steps.max(1), p.output_dim()),
            (t, b, o),
        ));
    }
    let mut d = upstream.to_shape((t * b, o)).expect("contiguous reshape").into_owned();
    if p.activation == Activation::Relu {
        Zip::from(&mut d).and(&cache.outputs).for_each(|g, &y| {
            if y <= 0.0 {
                *g = 0.0
            }
        });
    }
    let grads = AffineParams {
        weight: row_major(d.t().dot(&cache.inputs)),
        bias: d.sum_axis(Axis(0)),
        activation: p.activation,
    };
    let d_in = d
        .dot(&p.weight)
        .to_shape((t, b, p.input_dim()))
        .expect("row-major reshape")
        .into_owned();
    Ok((grads, d_in))
}
