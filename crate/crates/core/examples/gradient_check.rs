//! Compares the analytic gradient of a small encoder-decoder against
//! central finite differences, tensor by tensor.

use cabin_ews::nn::ParamTensors;
use cabin_ews::seq2seq::{Architecture, ModelConfig, Seq2SeqModel};
use ndarray::Array3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const STEP: f64 = 1e-5;

fn main() -> cabin_ews::Result<()> {
    let arch = Architecture {
        enc_hidden: 4,
        dec_hidden: 3,
        head_hidden: 3,
        bidirectional: true,
    };
    let (features, targets, lookback, horizon, batch) = (3, 2, 6, 3, 4);
    let model = Seq2SeqModel::new(ModelConfig::new(features, targets, lookback, horizon, arch, 11))?;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let x = Array3::from_shape_simple_fn((lookback, batch, features), || rng.random_range(-1.0..1.0));
    let y = Array3::from_shape_simple_fn((horizon, batch, targets), || rng.random_range(-1.0..1.0));

    let (loss, grads) = model.loss_and_grad(x.view(), y.view())?;
    println!("loss {loss:.6}, {} parameters", model.params.param_count());

    // tensor order for a bidirectional model with a head
    let mut labels = Vec::new();
    for gru in ["encoder fwd", "encoder bwd", "decoder"] {
        for part in ["input weights", "hidden weights", "bias"] {
            labels.push(format!("{gru} {part}"));
        }
    }
    for layer in ["head", "output"] {
        for part in ["weight", "bias"] {
            labels.push(format!("{layer} {part}"));
        }
    }
    let mut probe = model.clone();
    let analytic: Vec<Vec<f64>> = grads.tensors().iter().map(|t| t.to_vec()).collect();
    for (ti, a) in analytic.iter().enumerate() {
        let mut worst = 0.0f64;
        for (j, &g) in a.iter().enumerate() {
            let orig = probe.params.tensors()[ti][j];
            probe.params.tensors_mut()[ti][j] = orig + STEP;
            let up = probe.loss(x.view(), y.view())?;
            probe.params.tensors_mut()[ti][j] = orig - STEP;
            let down = probe.loss(x.view(), y.view())?;
            probe.params.tensors_mut()[ti][j] = orig;
            let numeric = (up - down) / (2.0 * STEP);
            let scale = g.abs().max(numeric.abs()).max(1e-8);
            worst = worst.max((g - numeric).abs() / scale);
        }
        println!("{:<28} {:>4} scalars  max rel err {worst:.2e}", labels[ti], a.len());
    }
    Ok(())
}
