//! Scalar reference implementations, written loop by loop from the gate
//! equations with no shared code from the crate's batched kernels.

#![allow(dead_code)]

use cabin_ews::nn::{Activation, AffineParams, GruCellParams, ParamTensors};
use cabin_ews::preprocess::{ChannelRange, NormalizationParams, PreprocessConfig, SplitWindows, WindowedDataset};
use cabin_ews::seq2seq::Seq2SeqModel;
use cabin_ews::telemetry::Channel;
use ndarray::{Array1, Array2, Array3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Mat = Vec<Vec<f64>>;

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn matvec(m: &Mat, v: &[f64]) -> Vec<f64> {
    m.iter()
        .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
        .collect()
}

/// GRU weights gate by gate: `w[g]` is `H × I`, `u[g]` is `H × H`, order
/// update, reset, candidate.
#[derive(Debug, Clone)]
pub struct ScalarGru {
    pub w: [Mat; 3],
    pub u: [Mat; 3],
    pub b: [Vec<f64>; 3],
}

impl ScalarGru {
    pub fn random(input: usize, hidden: usize, scale: f64, rng: &mut ChaCha8Rng) -> Self {
        let mut mat = |r: usize, c: usize| -> Mat {
            (0..r)
                .map(|_| (0..c).map(|_| rng.random_range(-scale..scale)).collect())
                .collect()
        };
        let w = [mat(hidden, input), mat(hidden, input), mat(hidden, input)];
        let u = [mat(hidden, hidden), mat(hidden, hidden), mat(hidden, hidden)];
        let b = [
            mat(1, hidden).remove(0),
            mat(1, hidden).remove(0),
            mat(1, hidden).remove(0),
        ];
        Self { w, u, b }
    }

    /// Reads the gates back out of the crate's fused layout.
    pub fn from_params(p: &GruCellParams) -> Self {
        let to_mat = |a: &Array2<f64>| -> Mat { a.outer_iter().map(|r| r.to_vec()).collect() };
        let [w0, w1, w2] = p.gate_input_weights();
        let [u0, u1, u2] = p.gate_hidden_weights();
        let [b0, b1, b2] = p.gate_biases();
        Self {
            w: [to_mat(&w0), to_mat(&w1), to_mat(&w2)],
            u: [to_mat(&u0), to_mat(&u1), to_mat(&u2)],
            b: [b0.to_vec(), b1.to_vec(), b2.to_vec()],
        }
    }

    pub fn to_params(&self) -> GruCellParams {
        let arr = |m: &Mat| Array2::from_shape_fn((m.len(), m[0].len()), |(i, j)| m[i][j]);
        let w = [arr(&self.w[0]), arr(&self.w[1]), arr(&self.w[2])];
        let u = [arr(&self.u[0]), arr(&self.u[1]), arr(&self.u[2])];
        let b = [
            Array1::from(self.b[0].clone()),
            Array1::from(self.b[1].clone()),
            Array1::from(self.b[2].clone()),
        ];
        GruCellParams::from_gates([&w[0], &w[1], &w[2]], [&u[0], &u[1], &u[2]], [&b[0], &b[1], &b[2]])
    }

    pub fn hidden(&self) -> usize {
        self.b[0].len()
    }

    /// z = σ(W_z x + U_z h + b_z), r = σ(W_r x + U_r h + b_r),
    /// c = tanh(W_h x + U_h (r ⊙ h) + b_h), h' = (1 − z) ⊙ h + z ⊙ c.
    pub fn cell(&self, x: &[f64], h: &[f64]) -> Vec<f64> {
        let n = self.hidden();
        let wz = matvec(&self.w[0], x);
        let uz = matvec(&self.u[0], h);
        let wr = matvec(&self.w[1], x);
        let ur = matvec(&self.u[1], h);
        let z: Vec<f64> = (0..n).map(|k| sigmoid(wz[k] + uz[k] + self.b[0][k])).collect();
        let r: Vec<f64> = (0..n).map(|k| sigmoid(wr[k] + ur[k] + self.b[1][k])).collect();
        let rh: Vec<f64> = (0..n).map(|k| r[k] * h[k]).collect();
        let wc = matvec(&self.w[2], x);
        let uc = matvec(&self.u[2], &rh);
        (0..n)
            .map(|k| {
                let c = (wc[k] + uc[k] + self.b[2][k]).tanh();
                (1.0 - z[k]) * h[k] + z[k] * c
            })
            .collect()
    }

    /// Hidden state after each step, starting from `h0`.
    pub fn sequence(&self, xs: &[Vec<f64>], h0: &[f64]) -> Vec<Vec<f64>> {
        let mut h = h0.to_vec();
        xs.iter()
            .map(|x| {
                h = self.cell(x, &h);
                h.clone()
            })
            .collect()
    }
}

/// `activation(W x + b)` with `W` stored `out × in`.
pub fn affine(p: &AffineParams, x: &[f64]) -> Vec<f64> {
    p.weight
        .outer_iter()
        .zip(p.bias.iter())
        .map(|(row, b)| {
            let v: f64 = row.iter().zip(x).map(|(w, xi)| w * xi).sum::<f64>() + b;
            match p.activation {
                Activation::Relu => v.max(0.0),
                Activation::Identity => v,
            }
        })
        .collect()
}

/// [forward final ‖ backward final over the reversed sequence].
pub fn bidirectional(fwd: &ScalarGru, bwd: &ScalarGru, xs: &[Vec<f64>]) -> Vec<f64> {
    let h0 = vec![0.0; fwd.hidden()];
    let f = fwd.sequence(xs, &h0).pop().unwrap();
    let rev: Vec<Vec<f64>> = xs.iter().rev().cloned().collect();
    let b = bwd.sequence(&rev, &h0).pop().unwrap();
    f.into_iter().chain(b).collect()
}

/// Whole encoder-decoder on one window `T_in × I`, giving `T_out × O`.
pub fn seq2seq(model: &Seq2SeqModel, xs: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let p = &model.params;
    let fwd = ScalarGru::from_params(&p.enc_fwd);
    let context = match &p.enc_bwd {
        Some(bwd) => bidirectional(&fwd, &ScalarGru::from_params(bwd), xs),
        None => fwd.sequence(xs, &vec![0.0; fwd.hidden()]).pop().unwrap(),
    };
    let dec = ScalarGru::from_params(&p.decoder);
    let repeated = vec![context; model.config.horizon];
    dec.sequence(&repeated, &vec![0.0; dec.hidden()])
        .iter()
        .map(|h| {
            let mid = match &p.head {
                Some(head) => affine(head, h),
                None => h.clone(),
            };
            affine(&p.output, &mid)
        })
        .collect()
}

pub fn rows(a: &Array2<f64>) -> Vec<Vec<f64>> {
    a.outer_iter().map(|r| r.to_vec()).collect()
}

pub fn max_abs_diff(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .flat_map(|(x, y)| {
            assert_eq!(x.len(), y.len());
            x.iter().zip(y).map(|(p, q)| (p - q).abs())
        })
        .fold(0.0, f64::max)
}

pub fn random_tensor(shape: (usize, usize, usize), rng: &mut ChaCha8Rng) -> Array3<f64> {
    Array3::from_shape_fn(shape, |_| rng.random_range(-1.0..1.0))
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Worst disagreement between analytic and central-difference gradients.
#[derive(Debug, Clone, Copy, Default)]
pub struct GradCheck {
    /// Largest relative error over entries whose magnitude exceeds 1e-6.
    pub max_rel: f64,
    /// Largest absolute error over the remaining entries.
    pub max_abs_small: f64,
    pub checked: usize,
    /// Entries whose step straddled a ReLU kink and were re-measured with
    /// a step 10x smaller.
    pub kinks: usize,
}

pub const FD_STEP: f64 = 1e-5;
pub const FD_DENOM_FLOOR: f64 = 1e-6;

/// `(central, forward, backward)` differences of the loss in one scalar.
fn differences(
    probe: &mut Seq2SeqModel,
    ti: usize,
    j: usize,
    h: f64,
    x: &Array3<f64>,
    y: &Array3<f64>,
) -> (f64, f64, f64) {
    let orig = probe.params.tensors()[ti][j];
    let base = probe.loss(x.view(), y.view()).unwrap();
    probe.params.tensors_mut()[ti][j] = orig + h;
    let up = probe.loss(x.view(), y.view()).unwrap();
    probe.params.tensors_mut()[ti][j] = orig - h;
    let down = probe.loss(x.view(), y.view()).unwrap();
    probe.params.tensors_mut()[ti][j] = orig;
    ((up - down) / (2.0 * h), (up - base) / h, (base - down) / h)
}

/// Central differences over every scalar of `model`'s parameters.
///
/// Where the loss is smooth the one-sided differences agree to O(step). When
/// they disagree by more than 1% the step crossed a ReLU kink for some
/// sample, and the central difference averages two different slopes; that
/// entry is re-measured with a step 10x smaller. A wrong analytic gradient
/// does not trigger this, since it leaves the loss itself smooth.
pub fn grad_check(model: &Seq2SeqModel, x: &Array3<f64>, y: &Array3<f64>) -> GradCheck {
    let (_, analytic) = model.loss_and_grad(x.view(), y.view()).unwrap();
    let analytic: Vec<f64> = analytic.tensors().iter().flat_map(|t| t.iter().copied()).collect();
    let mut probe = model.clone();
    let mut out = GradCheck::default();
    let mut k = 0;
    let n_tensors = probe.params.tensors().len();
    for ti in 0..n_tensors {
        let len = probe.params.tensors()[ti].len();
        for j in 0..len {
            let (mut numeric, fwd, bwd) = differences(&mut probe, ti, j, FD_STEP, x, y);
            let size = fwd.abs().max(bwd.abs());
            if size > FD_DENOM_FLOOR && (fwd - bwd).abs() > 0.01 * size {
                out.kinks += 1;
                numeric = differences(&mut probe, ti, j, FD_STEP / 10.0, x, y).0;
            }
            let a = analytic[k];
            let denom = a.abs().max(numeric.abs());
            if denom > FD_DENOM_FLOOR {
                out.max_rel = out.max_rel.max((a - numeric).abs() / denom);
            } else {
                out.max_abs_small = out.max_abs_small.max((a - numeric).abs());
            }
            out.checked += 1;
            k += 1;
        }
    }
    assert_eq!(k, analytic.len());
    out
}

/// One-feature, one-target dataset with lookback 2 and horizon 2. Train
/// window `i` has an all-zero target when `train_zero[i]`; the target range
/// is `[0, 10]`, so raw 0 normalizes to 0.
pub fn windowed_fixture(train_zero: &[bool], n_val: usize, n_test: usize, seed: u64) -> WindowedDataset {
    let mut rng = rng(seed);
    let mut split = |zero: &[bool], first_origin: i64| {
        let n = zero.len();
        let x = Array3::from_shape_fn((n, 2, 1), |_| rng.random_range(0.0..1.0));
        let mut y = Array3::<f64>::zeros((n, 2, 1));
        for (i, &z) in zero.iter().enumerate() {
            if !z {
                y[[i, rng.random_range(0..2), 0]] = rng.random_range(0.05..1.0);
            }
        }
        SplitWindows {
            x,
            y,
            origins: (0..n as i64).map(|k| first_origin + 4 * k).collect(),
        }
    };
    let train = split(train_zero, 0);
    let val_zero: Vec<bool> = (0..n_val).map(|k| k % 3 == 0).collect();
    let test_zero: Vec<bool> = (0..n_test).map(|k| k % 2 == 0).collect();
    let val = split(&val_zero, 1_000_000);
    let test = split(&test_zero, 2_000_000);
    let config = PreprocessConfig {
        lookback_s: 2,
        horizon_s: 2,
        window_stride_s: 4,
        feature_channels: vec![Channel::TempC],
        target_channels: vec![Channel::Pc0_3],
        rng_seed: seed,
        ..Default::default()
    };
    WindowedDataset {
        features: vec![Channel::TempC],
        targets: vec![Channel::Pc0_3],
        train,
        val,
        test,
        norm: NormalizationParams {
            ranges: vec![
                ChannelRange {
                    channel: Channel::TempC,
                    min: 20.0,
                    max: 26.0,
                },
                ChannelRange {
                    channel: Channel::Pc0_3,
                    min: 0.0,
                    max: 10.0,
                },
            ],
        },
        config,
    }
}
