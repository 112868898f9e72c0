//! Gated recurrent unit with exact backpropagation through time.
//!
//! ```text
//! z  = σ(W_z x + U_z h + b_z)
//! r  = σ(W_r x + U_r h + b_r)
//! h̃  = tanh(W_h x + U_h (r ⊙ h) + b_h)
//! h' = (1 − z) ⊙ h + z ⊙ h̃
//! ```
//!
//! The three gates are stored side by side: `input_weights` is `I × 3H`
//! with column blocks `[z | r | h̃]`, `hidden_weights` is `H × 3H` with the
//! same blocks, and `bias` is `3H`. Samples are rows, so the products above
//! are computed as `x · W` and `h · U`.

use ndarray::linalg::general_mat_mul;
use ndarray::{s, Array1, Array2, Array3, ArrayView2, ArrayView3, Axis, Zip};
use rand::Rng;

use super::layers::sigmoid;
use super::{row_major, shape_err, slice_of, slice_of_mut, NnError, ParamTensors};

#[derive(Debug, Clone, PartialEq)]
pub struct GruCellParams {
    pub input_weights: Array2<f64>,
    pub hidden_weights: Array2<f64>,
    pub bias: Array1<f64>,
}

impl GruCellParams {
    pub fn zeros(input_dim: usize, hidden_dim: usize) -> Self {
        Self {
            input_weights: Array2::zeros((input_dim, 3 * hidden_dim)),
            hidden_weights: Array2::zeros((hidden_dim, 3 * hidden_dim)),
            bias: Array1::zeros(3 * hidden_dim),
        }
    }

    /// Uniform in `±1/√I` (input weights) and `±1/√H` (hidden weights),
    /// zero biases.
    pub fn init<R: Rng>(input_dim: usize, hidden_dim: usize, rng: &mut R) -> Self {
        let mut p = Self::zeros(input_dim, hidden_dim);
        let ki = 1.0 / (input_dim as f64).sqrt();
        let kh = 1.0 / (hidden_dim as f64).sqrt();
        p.input_weights.iter_mut().for_each(|w| *w = rng.random_range(-ki..=ki));
        p.hidden_weights
            .iter_mut()
            .for_each(|w| *w = rng.random_range(-kh..=kh));
        p
    }

    pub fn input_dim(&self) -> usize {
        self.input_weights.nrows()
    }

    pub fn hidden_dim(&self) -> usize {
        self.hidden_weights.nrows()
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.input_dim(), self.hidden_dim())
    }

    /// `W_z`, `W_r`, `W_h` as `H × I` matrices.
    pub fn gate_input_weights(&self) -> [Array2<f64>; 3] {
        let h = self.hidden_dim();
        std::array::from_fn(|g| self.input_weights.slice(s![.., g * h..(g + 1) * h]).t().to_owned())
    }

    /// `U_z`, `U_r`, `U_h` as `H × H` matrices.
    pub fn gate_hidden_weights(&self) -> [Array2<f64>; 3] {
        let h = self.hidden_dim();
        std::array::from_fn(|g| self.hidden_weights.slice(s![.., g * h..(g + 1) * h]).t().to_owned())
    }

    /// `b_z`, `b_r`, `b_h`.
    pub fn gate_biases(&self) -> [Array1<f64>; 3] {
        let h = self.hidden_dim();
        std::array::from_fn(|g| self.bias.slice(s![g * h..(g + 1) * h]).to_owned())
    }

    /// Builds parameters from per-gate matrices (`W_*` are `H × I`,
    /// `U_*` are `H × H`).
    pub fn from_gates(w: [&Array2<f64>; 3], u: [&Array2<f64>; 3], b: [&Array1<f64>; 3]) -> Self {
        let (h, i) = w[0].dim();
        let mut p = Self::zeros(i, h);
        for g in 0..3 {
            p.input_weights.slice_mut(s![.., g * h..(g + 1) * h]).assign(&w[g].t());
            p.hidden_weights.slice_mut(s![.., g * h..(g + 1) * h]).assign(&u[g].t());
            p.bias.slice_mut(s![g * h..(g + 1) * h]).assign(b[g]);
        }
        p
    }

    fn check_input(&self, op: &'static str, dim: usize) -> Result<(), NnError> {
        if dim != self.input_dim() {
            return Err(shape_err(op, self.input_dim(), dim));
        }
        Ok(())
    }
}

impl ParamTensors for GruCellParams {
    fn tensors(&self) -> Vec<&[f64]> {
        vec![
            slice_of(&self.input_weights),
            slice_of(&self.hidden_weights),
            slice_of(&self.bias),
        ]
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        vec![
            slice_of_mut(&mut self.input_weights),
            slice_of_mut(&mut self.hidden_weights),
            slice_of_mut(&mut self.bias),
        ]
    }
}

/// Intermediates of one step, enough for its backward pass.
#[derive(Debug, Clone)]
pub struct GruStepCache {
    h_prev: Array2<f64>,
    z: Array2<f64>,
    r: Array2<f64>,
    cand: Array2<f64>,
}

impl GruStepCache {
    pub fn update_gate(&self) -> &Array2<f64> {
        &self.z
    }

    pub fn reset_gate(&self) -> &Array2<f64> {
        &self.r
    }

    pub fn candidate(&self) -> &Array2<f64> {
        &self.cand
    }
}

/// One step given the input projection `x · W + b` (`B × 3H`).
fn step_forward(
    p: &GruCellParams,
    input_proj: ArrayView2<'_, f64>,
    h_prev: ArrayView2<'_, f64>,
) -> (Array2<f64>, GruStepCache) {
    let h = p.hidden_dim();
    let u_zr = p.hidden_weights.slice(s![.., 0..2 * h]);
    let u_c = p.hidden_weights.slice(s![.., 2 * h..]);
    let mut zr = h_prev.dot(&u_zr);
    zr += &input_proj.slice(s![.., 0..2 * h]);
    zr.mapv_inplace(sigmoid);
    let z = zr.slice(s![.., 0..h]).to_owned();
    let r = zr.slice(s![.., h..]).to_owned();
    let rh = &r * &h_prev;
    let mut cand = rh.dot(&u_c);
    cand += &input_proj.slice(s![.., 2 * h..]);
    cand.mapv_inplace(f64::tanh);
    let mut h_next = Array2::zeros(h_prev.raw_dim());
    Zip::from(&mut h_next)
        .and(&h_prev)
        .and(&z)
        .and(&cand)
        .for_each(|o, &hp, &zz, &c| *o = (1.0 - zz) * hp + zz * c);
    (
        h_next,
        GruStepCache {
            h_prev: h_prev.to_owned(),
            z,
            r,
            cand,
        },
    )
}

/// Backward through one step. Returns the gate pre-activation gradients
/// (`B × 3H`, blocks `[z | r | h̃]`) and the gradient on `h_prev`, and
/// accumulates into `grads.hidden_weights`.
fn step_backward(
    p: &GruCellParams,
    cache: &GruStepCache,
    dh: ArrayView2<'_, f64>,
    grads: &mut GruCellParams,
) -> (Array2<f64>, Array2<f64>) {
    let h = p.hidden_dim();
    let b = dh.nrows();
    let mut da = Array2::<f64>::zeros((b, 3 * h));
    let mut dh_prev = Array2::<f64>::zeros((b, h));
    {
        let (mut da_zr, mut da_c) = da.view_mut().split_at(Axis(1), 2 * h);
        let (mut da_z, _) = da_zr.view_mut().split_at(Axis(1), h);
        // update gate and the direct path to h_prev
        Zip::from(&mut da_z)
            .and(&mut dh_prev)
            .and(&dh)
            .and(&cache.z)
            .and(&cache.cand)
            .and(&cache.h_prev)
            .for_each(|dz_pre, dhp, &g, &z, &c, &hp| {
                *dz_pre = g * (c - hp) * z * (1.0 - z);
                *dhp = g * (1.0 - z);
            });
        Zip::from(&mut da_c)
            .and(&dh)
            .and(&cache.z)
            .and(&cache.cand)
            .for_each(|dc_pre, &g, &z, &c| *dc_pre = g * z * (1.0 - c * c));
    }
    let u_c = p.hidden_weights.slice(s![.., 2 * h..]);
    let rh = &cache.r * &cache.h_prev;
    let da_c = da.slice(s![.., 2 * h..]).to_owned();
    general_mat_mul(
        1.0,
        &rh.t(),
        &da_c,
        1.0,
        &mut grads.hidden_weights.slice_mut(s![.., 2 * h..]),
    );
    let d_rh = da_c.dot(&u_c.t());
    {
        let mut da_r = da.slice_mut(s![.., h..2 * h]);
        Zip::from(&mut da_r)
            .and(&mut dh_prev)
            .and(&d_rh)
            .and(&cache.r)
            .and(&cache.h_prev)
            .for_each(|dr_pre, dhp, &g, &r, &hp| {
                *dr_pre = g * hp * r * (1.0 - r);
                *dhp += g * r;
            });
    }
    let u_zr = p.hidden_weights.slice(s![.., 0..2 * h]);
    let da_zr = da.slice(s![.., 0..2 * h]);
    general_mat_mul(
        1.0,
        &cache.h_prev.t(),
        &da_zr,
        1.0,
        &mut grads.hidden_weights.slice_mut(s![.., 0..2 * h]),
    );
    general_mat_mul(1.0, &da_zr, &u_zr.t(), 1.0, &mut dh_prev);
    (da, dh_prev)
}

/// One GRU step on a batch: `x` is `B × I`, `h_prev` is `B × H`.
pub fn gru_cell_forward(
    p: &GruCellParams,
    x: ArrayView2<'_, f64>,
    h_prev: ArrayView2<'_, f64>,
) -> Result<(Array2<f64>, GruStepCache), NnError> {
    p.check_input("gru_cell_forward", x.ncols())?;
    if h_prev.dim() != (x.nrows(), p.hidden_dim()) {
        return Err(shape_err("gru_cell_forward", (x.nrows(), p.hidden_dim()), h_prev.dim()));
    }
    let proj = x.dot(&p.input_weights) + &p.bias;
    Ok(step_forward(p, proj.view(), h_prev))
}

/// Backward of [`gru_cell_forward`]: returns `(param grads, dx, dh_prev)`.
pub fn gru_cell_backward(
    p: &GruCellParams,
    x: ArrayView2<'_, f64>,
    cache: &GruStepCache,
    dh: ArrayView2<'_, f64>,
) -> Result<(GruCellParams, Array2<f64>, Array2<f64>), NnError> {
    if dh.dim() != cache.h_prev.dim() || x.nrows() != dh.nrows() {
        return Err(shape_err("gru_cell_backward", cache.h_prev.dim(), dh.dim()));
    }
    p.check_input("gru_cell_backward", x.ncols())?;
    let mut grads = p.zeros_like();
    let (da, dh_prev) = step_backward(p, cache, dh, &mut grads);
    grads.input_weights = row_major(x.t().dot(&da));
    grads.bias = da.sum_axis(Axis(0));
    let dx = da.dot(&p.input_weights.t());
    Ok((grads, dx, dh_prev))
}

#[derive(Debug, Clone)]
pub struct GruSequenceCache {
    inputs: Array2<f64>,
    steps: Vec<GruStepCache>,
    batch: usize,
}

impl GruSequenceCache {
    pub fn steps(&self) -> &[GruStepCache] {
        &self.steps
    }
}

/// Runs the cell over `inputs` (`T × B × I`) from `h0` (`B × H`).
///
/// Returns the hidden sequence (`T × B × H`, row `t` is the state after
/// step `t`), the final state, and the caches for
/// [`gru_sequence_backward`].
pub fn gru_sequence_forward(
    p: &GruCellParams,
    inputs: ArrayView3<'_, f64>,
    h0: ArrayView2<'_, f64>,
) -> Result<(Array3<f64>, Array2<f64>, GruSequenceCache), NnError> {
    let (t, b, i) = inputs.dim();
    if t == 0 {
        return Err(NnError::Invalid {
            op: "gru_sequence_forward",
            msg: "sequence must have at least one step".into(),
        });
    }
    p.check_input("gru_sequence_forward", i)?;
    if h0.dim() != (b, p.hidden_dim()) {
        return Err(shape_err("gru_sequence_forward", (b, p.hidden_dim()), h0.dim()));
    }
    let flat = inputs.to_shape((t * b, i)).expect("reshape").into_owned();
    let proj = flat.dot(&p.input_weights) + &p.bias;
    let mut hidden = Array3::zeros((t, b, p.hidden_dim()));
    let mut steps = Vec::with_capacity(t);
    let mut h = h0.to_owned();
    for k in 0..t {
        let (h_next, cache) = step_forward(p, proj.slice(s![k * b..(k + 1) * b, ..]), h.view());
        hidden.index_axis_mut(Axis(0), k).assign(&h_next);
        steps.push(cache);
        h = h_next;
    }
    Ok((
        hidden,
        h,
        GruSequenceCache {
            inputs: flat,
            steps,
            batch: b,
        },
    ))
}

/// Backpropagation through time.
///
/// `d_hidden` is the upstream gradient on every hidden row (`T × B × H`);
/// pass zeros except the last row when only the final state is used.
/// Returns `(param grads, d_inputs (T × B × I), d_h0)`.
pub fn gru_sequence_backward(
    p: &GruCellParams,
    cache: &GruSequenceCache,
    d_hidden: ArrayView3<'_, f64>,
) -> Result<(GruCellParams, Array3<f64>, Array2<f64>), NnError> {
    let t = cache.steps.len();
    let b = cache.batch;
    let h = p.hidden_dim();
    if d_hidden.dim() != (t, b, h) {
        return Err(shape_err("gru_sequence_backward", (t, b, h), d_hidden.dim()));
    }
    let mut grads = p.zeros_like();
    let mut d_proj = Array2::<f64>::zeros((t * b, 3 * h));
    let mut carry = Array2::<f64>::zeros((b, h));
    for k in (0..t).rev() {
        carry += &d_hidden.index_axis(Axis(0), k);
        let (da, dh_prev) = step_backward(p, &cache.steps[k], carry.view(), &mut grads);
        d_proj.slice_mut(s![k * b..(k + 1) * b, ..]).assign(&da);
        carry = dh_prev;
    }
    grads.input_weights = row_major(cache.inputs.t().dot(&d_proj));
    grads.bias = d_proj.sum_axis(Axis(0));
    let d_inputs = d_proj
        .dot(&p.input_weights.t())
        .to_shape((t, b, p.input_dim()))
        .expect("row-major reshape")
        .into_owned();
    Ok((grads, d_inputs, carry))
}

#[derive(Debug, Clone)]
pub struct BiEncoderCache {
    fwd: GruSequenceCache,
    bwd: GruSequenceCache,
}

/// Encodes `inputs` (`T × B × I`) in both directions from zero states and
/// returns `[forward final ‖ backward final]` (`B × 2H`). The backward cell
/// reads the sequence time-reversed.
pub fn bidirectional_encode(
    fwd: &GruCellParams,
    bwd: &GruCellParams,
    inputs: ArrayView3<'_, f64>,
) -> Result<(Array2<f64>, BiEncoderCache), NnError> {
    let h = fwd.hidden_dim();
    if bwd.hidden_dim() != h {
        return Err(shape_err("bidirectional_encode", h, bwd.hidden_dim()));
    }
    let b = inputs.dim().1;
    let h0 = Array2::zeros((b, h));
    let (_, hf, cf) = gru_sequence_forward(fwd, inputs, h0.view())?;
    let reversed = inputs.slice(s![..;-1, .., ..]);
    let (_, hb, cb) = gru_sequence_forward(bwd, reversed, h0.view())?;
    let state = ndarray::concatenate(Axis(1), &[hf.view(), hb.view()]).expect("same rows");
    Ok((state, BiEncoderCache { fwd: cf, bwd: cb }))
}

/// Backward of [`bidirectional_encode`]: returns
/// `(forward grads, backward grads, d_inputs)`.
pub fn bidirectional_backward(
    fwd: &GruCellParams,
    bwd: &GruCellParams,
    cache: &BiEncoderCache,
    d_state: ArrayView2<'_, f64>,
) -> Result<(GruCellParams, GruCellParams, Array3<f64>), NnError> {
    let h = fwd.hidden_dim();
    let t = cache.fwd.steps.len();
    let b = cache.fwd.batch;
    if d_state.dim() != (b, 2 * h) {
        return Err(shape_err("bidirectional_backward", (b, 2 * h), d_state.dim()));
    }
    let mut d_hidden = Array3::<f64>::zeros((t, b, h));
    d_hidden
        .index_axis_mut(Axis(0), t - 1)
        .assign(&d_state.slice(s![.., ..h]));
    let (gf, mut d_in, _) = gru_sequence_backward(fwd, &cache.fwd, d_hidden.view())?;
    d_hidden
        .index_axis_mut(Axis(0), t - 1)
        .assign(&d_state.slice(s![.., h..]));
    let (gb, d_in_rev, _) = gru_sequence_backward(bwd, &cache.bwd, d_hidden.view())?;
    d_in += &d_in_rev.slice(s![..;-1, .., ..]);
    Ok((gf, gb, d_in))
}
