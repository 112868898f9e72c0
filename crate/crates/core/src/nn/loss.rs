use ndarray::{Array3, ArrayView3, Zip};

use super::{shape_err, NnError};

/// Mean squared error over every element of a `(T, B, O)` batch, with its
/// gradient `2 (pred − target) / (T·B·O)`.
///
/// With equal-length windows this equals the mean over windows of the
/// per-window MSE.
pub fn mse_loss(pred: ArrayView3<'_, f64>, target: ArrayView3<'_, f64>) -> Result<(f64, Array3<f64>), NnError> {
    if pred.dim() != target.dim() {
        return Err(shape_err("mse_loss", target.dim(), pred.dim()));
    }
    let n = pred.len();
    if n == 0 {
        return Err(NnError::Invalid {
            op: "mse_loss",
            msg: "empty batch".into(),
        });
    }
    let scale = 2.0 / n as f64;
    let mut grad = Array3::zeros(pred.raw_dim());
    let mut sum = 0.0;
    Zip::from(&mut grad).and(&pred).and(&target).for_each(|g, &p, &t| {
        let e = p - t;
        sum += e * e;
        *g = scale * e;
    });
    Ok((sum / n as f64, grad))
}
