mod common;

use cabin_ews::nn::{
    adam_step, bidirectional_encode, gru_cell_backward, gru_cell_forward, gru_sequence_backward, gru_sequence_forward,
    mse_loss, repeat_vector, time_distributed_affine, time_distributed_affine_backward, Activation, AdamConfig,
    AdamState, AffineParams, GruCellParams, ParamTensors,
};
use common::{max_abs_diff, rows, ScalarGru};
use ndarray::{array, s, Array2, Array3, Axis};
use proptest::prelude::*;

fn fixture_2x2() -> ScalarGru {
    ScalarGru {
        w: [
            vec![vec![0.1, -0.2], vec![0.3, 0.05]],
            vec![vec![-0.15, 0.25], vec![0.2, -0.1]],
            vec![vec![0.4, 0.1], vec![-0.3, 0.2]],
        ],
        u: [
            vec![vec![0.05, 0.1], vec![-0.2, 0.15]],
            vec![vec![0.1, -0.05], vec![0.3, 0.2]],
            vec![vec![-0.25, 0.35], vec![0.1, -0.15]],
        ],
        b: [vec![0.01, -0.02], vec![0.03, 0.0], vec![-0.05, 0.04]],
    }
}

fn batch_of_one(v: &[f64]) -> Array2<f64> {
    Array2::from_shape_vec((1, v.len()), v.to_vec()).unwrap()
}

fn sequence_tensor(xs: &[Vec<f64>]) -> Array3<f64> {
    Array3::from_shape_fn((xs.len(), 1, xs[0].len()), |(t, _, i)| xs[t][i])
}

#[test]
fn cell_matches_scalar_equations() {
    let g = fixture_2x2();
    let p = g.to_params();
    let x = [0.7, -1.3];
    let h = [0.2, -0.4];
    let (out, cache) = gru_cell_forward(&p, batch_of_one(&x).view(), batch_of_one(&h).view()).unwrap();
    let expected = g.cell(&x, &h);
    assert!(max_abs_diff(&rows(&out), &[expected]) < 1e-12);
    // gates exposed by the cache agree with the hand evaluation too
    let z0 = common::sigmoid(0.1 * 0.7 - 0.2 * -1.3 + 0.05 * 0.2 + 0.1 * -0.4 + 0.01);
    assert!((cache.update_gate()[[0, 0]] - z0).abs() < 1e-12);
}

#[test]
fn three_steps_chain_the_cell() {
    let g = fixture_2x2();
    let p = g.to_params();
    let xs = vec![vec![0.5, 0.1], vec![-0.3, 0.8], vec![1.2, -0.6]];
    let h0 = [0.1, 0.0];
    let (hidden, last, _) = gru_sequence_forward(&p, sequence_tensor(&xs).view(), batch_of_one(&h0).view()).unwrap();
    let oracle = g.sequence(&xs, &h0);
    let got: Vec<Vec<f64>> = hidden.outer_iter().map(|r| r.row(0).to_vec()).collect();
    assert!(max_abs_diff(&got, &oracle) < 1e-12);
    assert_eq!(last.row(0).to_vec(), got[2]);
}

#[test]
fn zero_params_keep_hidden_at_zero() {
    let p = GruCellParams::zeros(3, 4);
    let x = common::random_tensor((5, 2, 3), &mut common::rng(1));
    let (hidden, _, _) = gru_sequence_forward(&p, x.view(), Array2::zeros((2, 4)).view()).unwrap();
    assert!(hidden.iter().all(|&v| v == 0.0));
}

#[test]
fn bidirectional_matches_two_sequence_oracles() {
    let mut rng = common::rng(11);
    let fwd = ScalarGru::random(3, 2, 0.6, &mut rng);
    let bwd = ScalarGru::random(3, 2, 0.6, &mut rng);
    let xs: Vec<Vec<f64>> = (0..4)
        .map(|t| vec![0.3 * t as f64 - 0.4, (t as f64).sin(), 0.25])
        .collect();
    let (state, _) = bidirectional_encode(&fwd.to_params(), &bwd.to_params(), sequence_tensor(&xs).view()).unwrap();
    let expected = common::bidirectional(&fwd, &bwd, &xs);
    assert!(max_abs_diff(&rows(&state), &[expected]) < 1e-12);
}

#[test]
fn bidirectional_single_step_is_two_cells() {
    let mut rng = common::rng(12);
    let fwd = ScalarGru::random(2, 3, 0.5, &mut rng);
    let bwd = ScalarGru::random(2, 3, 0.5, &mut rng);
    let x = vec![0.9, -0.2];
    let (state, _) = bidirectional_encode(
        &fwd.to_params(),
        &bwd.to_params(),
        sequence_tensor(std::slice::from_ref(&x)).view(),
    )
    .unwrap();
    let zero = [0.0; 3];
    let expected: Vec<f64> = fwd.cell(&x, &zero).into_iter().chain(bwd.cell(&x, &zero)).collect();
    assert!(max_abs_diff(&rows(&state), &[expected]) < 1e-12);
}

#[test]
fn bidirectional_rejects_unequal_widths() {
    let x = Array3::zeros((2, 1, 3));
    assert!(bidirectional_encode(&GruCellParams::zeros(3, 2), &GruCellParams::zeros(3, 4), x.view()).is_err());
}

#[test]
fn repeat_vector_and_head_match_oracles() {
    let state = array![[0.5, -1.0, 2.0]];
    let rep = repeat_vector(state.view(), 4).unwrap();
    assert_eq!(rep.dim(), (4, 1, 3));
    for step in rep.outer_iter() {
        assert_eq!(step, state);
    }
    assert!(repeat_vector(state.view(), 0).is_err());

    let head = AffineParams {
        weight: array![[0.2, -0.5, 0.1], [1.0, 0.3, -0.7]],
        bias: array![0.05, -0.1],
        activation: Activation::Relu,
    };
    let inputs = common::random_tensor((3, 2, 3), &mut common::rng(5));
    let (out, _) = time_distributed_affine(&head, inputs.view()).unwrap();
    for t in 0..3 {
        for b in 0..2 {
            let x = inputs.slice(s![t, b, ..]).to_vec();
            let expected = common::affine(&head, &x);
            assert!(max_abs_diff(&[out.slice(s![t, b, ..]).to_vec()], &[expected]) < 1e-12);
        }
    }
}

/// Hand-differentiated single-step GRU with `H = I = 1`:
/// `dh'/dθ` for every gate parameter, with loss `L = h'`.
#[test]
fn scalar_cell_gradient_matches_symbolic_derivative() {
    let (wz, wr, wh) = (0.3, -0.4, 0.8);
    let (uz, ur, uh) = (0.5, 0.2, -0.6);
    let (bz, br, bh) = (0.1, -0.05, 0.2);
    let (x, h) = (0.7, -0.3);
    let z = common::sigmoid(wz * x + uz * h + bz);
    let r = common::sigmoid(wr * x + ur * h + br);
    let c = (wh * x + uh * r * h + bh).tanh();
    let dz = (c - h) * z * (1.0 - z);
    let dc = z * (1.0 - c * c);
    let dr = dc * uh * h * r * (1.0 - r);
    let expected_w = [dz * x, dr * x, dc * x];
    let expected_u = [dz * h, dr * h, dc * r * h];
    let expected_b = [dz, dr, dc];
    let expected_dx = dz * wz + dr * wr + dc * wh;
    let expected_dh = (1.0 - z) + dz * uz + dr * ur + dc * uh * r;

    let g = ScalarGru {
        w: [vec![vec![wz]], vec![vec![wr]], vec![vec![wh]]],
        u: [vec![vec![uz]], vec![vec![ur]], vec![vec![uh]]],
        b: [vec![bz], vec![br], vec![bh]],
    };
    let p = g.to_params();
    let (xa, ha) = (array![[x]], array![[h]]);
    let (_, cache) = gru_cell_forward(&p, xa.view(), ha.view()).unwrap();
    let (grads, dx, dh) = gru_cell_backward(&p, xa.view(), &cache, array![[1.0]].view()).unwrap();
    let gw = grads.gate_input_weights();
    let gu = grads.gate_hidden_weights();
    let gb = grads.gate_biases();
    for k in 0..3 {
        assert!((gw[k][[0, 0]] - expected_w[k]).abs() < 1e-14, "w gate {k}");
        assert!((gu[k][[0, 0]] - expected_u[k]).abs() < 1e-14, "u gate {k}");
        assert!((gb[k][0] - expected_b[k]).abs() < 1e-14, "b gate {k}");
    }
    assert!((dx[[0, 0]] - expected_dx).abs() < 1e-14);
    assert!((dh[[0, 0]] - expected_dh).abs() < 1e-14);
}

#[test]
fn mse_gradient_matches_finite_differences() {
    let mut rng = common::rng(21);
    let pred = common::random_tensor((4, 3, 2), &mut rng);
    let target = common::random_tensor((4, 3, 2), &mut rng);
    let (_, grad) = mse_loss(pred.view(), target.view()).unwrap();
    let h = 1e-6;
    for idx in [(0, 0, 0), (1, 2, 1), (3, 1, 0), (2, 0, 1)] {
        let mut up = pred.clone();
        up[idx] += h;
        let mut down = pred.clone();
        down[idx] -= h;
        let numeric = (mse_loss(up.view(), target.view()).unwrap().0 - mse_loss(down.view(), target.view()).unwrap().0)
            / (2.0 * h);
        assert!((numeric - grad[idx]).abs() < 1e-7);
    }
    let ones = Array3::<f64>::ones((2, 2, 2));
    assert_eq!(mse_loss(ones.view(), Array3::zeros((2, 2, 2)).view()).unwrap().0, 1.0);
}

fn scalar_param(theta: f64) -> AffineParams {
    AffineParams {
        weight: array![[theta]],
        bias: array![0.0],
        activation: Activation::Identity,
    }
}

#[test]
fn adam_first_step_closed_form() {
    let mut p = scalar_param(0.0);
    let g = scalar_param(1.0);
    let mut state = AdamState::new(2);
    adam_step(&mut p, &g, &mut state, &AdamConfig::default()).unwrap();
    assert_eq!(state.step, 1);
    assert!((state.m[0] - 0.1).abs() < 1e-15);
    assert!((state.v[0] - 0.001).abs() < 1e-15);
    // θ = −α · m̂ / (√v̂ + ε) with m̂ = v̂ = 1
    let expected = -0.001 / (1.0 + 1e-8);
    assert!((p.weight[[0, 0]] - expected).abs() < 1e-18);
    assert!((p.weight[[0, 0]] - -0.000999999990).abs() < 1e-14);
}

#[test]
fn adam_zero_gradient_is_a_fixpoint() {
    let mut p = scalar_param(0.75);
    let mut state = AdamState::new(2);
    adam_step(&mut p, &scalar_param(0.0), &mut state, &AdamConfig::default()).unwrap();
    assert_eq!(p.weight[[0, 0]], 0.75);
    assert_eq!(state.step, 1);
}

#[test]
fn adam_first_step_is_bounded_by_learning_rate() {
    for g in [1e-3, 1.0, 1000.0] {
        let mut p = scalar_param(0.0);
        let mut state = AdamState::new(2);
        adam_step(&mut p, &scalar_param(g), &mut state, &AdamConfig::default()).unwrap();
        let step = p.weight[[0, 0]].abs();
        assert!(step <= 0.001 && step > 0.000999, "gradient {g} moved {step}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn hidden_state_stays_in_unit_box(seed in any::<u64>(), t in 1usize..12, scale in 0.1f64..4.0) {
        let mut rng = common::rng(seed);
        let g = ScalarGru::random(3, 4, scale, &mut rng);
        let x = common::random_tensor((t, 2, 3), &mut rng).mapv(|v| v * 10.0);
        let h0 = Array2::from_shape_fn((2, 4), |(i, j)| if (i + j) % 2 == 0 { 1.0 } else { -1.0 });
        let (hidden, _, _) = gru_sequence_forward(&g.to_params(), x.view(), h0.view()).unwrap();
        prop_assert!(hidden.iter().all(|v| v.abs() <= 1.0));
    }

    #[test]
    fn swapping_directions_and_time_swaps_halves(seed in any::<u64>(), t in 1usize..7) {
        let mut rng = common::rng(seed);
        let f = ScalarGru::random(2, 3, 0.8, &mut rng).to_params();
        let b = ScalarGru::random(2, 3, 0.8, &mut rng).to_params();
        let x = common::random_tensor((t, 3, 2), &mut rng);
        let (state, _) = bidirectional_encode(&f, &b, x.view()).unwrap();
        let reversed = x.slice(s![..;-1, .., ..]).to_owned();
        let (swapped, _) = bidirectional_encode(&b, &f, reversed.view()).unwrap();
        prop_assert_eq!(state.slice(s![.., ..3]), swapped.slice(s![.., 3..]));
        prop_assert_eq!(state.slice(s![.., 3..]), swapped.slice(s![.., ..3]));
    }

    #[test]
    fn head_handles_every_small_shape(seed in any::<u64>(), t in 1usize..5, b in 1usize..5, i in 1usize..5, o in 1usize..5) {
        let mut rng = common::rng(seed);
        let head = AffineParams {
            weight: common::random_tensor((1, o, i), &mut rng).index_axis_move(Axis(0), 0),
            bias: common::random_tensor((1, 1, o), &mut rng).into_shape_with_order(o).unwrap(),
            activation: Activation::Relu,
        };
        let x = common::random_tensor((t, b, i), &mut rng);
        let (out, cache) = time_distributed_affine(&head, x.view()).unwrap();
        for k in 0..t {
            for j in 0..b {
                let want = common::affine(&head, &x.slice(s![k, j, ..]).to_vec());
                prop_assert!(max_abs_diff(&[out.slice(s![k, j, ..]).to_vec()], &[want]) < 1e-12);
            }
        }
        let (grads, d_in) = time_distributed_affine_backward(&head, &cache, out.view()).unwrap();
        prop_assert_eq!(d_in.dim(), (t, b, i));
        // enumerating the tensors requires row-major gradients
        prop_assert_eq!(grads.param_count(), o * i + o);
    }

    #[test]
    fn sequence_gradients_are_row_major(seed in any::<u64>(), t in 1usize..5, b in 1usize..5, i in 1usize..5, h in 1usize..5) {
        let mut rng = common::rng(seed);
        let g = ScalarGru::random(i, h, 1.0, &mut rng).to_params();
        let x = common::random_tensor((t, b, i), &mut rng);
        let (seq, _, cache) = gru_sequence_forward(&g, x.view(), Array2::zeros((b, h)).view()).unwrap();
        let (grads, dx, _) = gru_sequence_backward(&g, &cache, seq.view()).unwrap();
        prop_assert_eq!(dx.dim(), (t, b, i));
        prop_assert_eq!(grads.param_count(), g.param_count());
    }

    #[test]
    fn forward_and_backward_are_repeatable(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let g = ScalarGru::random(2, 2, 1.0, &mut rng).to_params();
        let x = common::random_tensor((1, 4, 2), &mut rng).index_axis_move(Axis(0), 0);
        let h = common::random_tensor((1, 4, 2), &mut rng).index_axis_move(Axis(0), 0);
        let (a, ca) = gru_cell_forward(&g, x.view(), h.view()).unwrap();
        let (b, cb) = gru_cell_forward(&g, x.view(), h.view()).unwrap();
        prop_assert_eq!(&a, &b);
        let (ga, _, _) = gru_cell_backward(&g, x.view(), &ca, a.view()).unwrap();
        let (gb, _, _) = gru_cell_backward(&g, x.view(), &cb, b.view()).unwrap();
        prop_assert_eq!(ga, gb);
    }
}
