use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{PreprocessConfig, PreprocessError, WindowedDataset};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct UndersampleReport {
    pub zero_windows: usize,
    pub nonzero_windows: usize,
    pub retained_zero: usize,
}

/// Normalized image of raw 0 for each target channel, in target order.
pub fn zero_images(ds: &WindowedDataset) -> Result<Vec<f64>, PreprocessError> {
    ds.targets
        .iter()
        .map(|&c| ds.norm.range(c).map(|r| r.normalize(0.0)))
        .collect()
}

/// Thins all-zero-target windows out of the train split.
///
/// A window is zero when every horizon entry equals its channel's normalized
/// image of raw 0. At most `ratio × nonzero` zero windows survive (one, when
/// there are no nonzero windows), chosen with `rng_seed`; survivors keep
/// their order. Validation and test are untouched.
pub fn undersample(
    ds: &WindowedDataset,
    cfg: &PreprocessConfig,
) -> Result<(WindowedDataset, UndersampleReport), PreprocessError> {
    let zero_img = zero_images(ds)?;
    let train = &ds.train;
    let is_zero = |i: usize| {
        train
            .window_y(i)
            .rows()
            .into_iter()
            .all(|row| row.iter().zip(&zero_img).all(|(v, z)| v == z))
    };
    let (zero, nonzero): (Vec<usize>, Vec<usize>) = (0..train.len()).partition(|&i| is_zero(i));
    let budget = if nonzero.is_empty() {
        1
    } else if cfg.undersample_zero_ratio.is_infinite() {
        usize::MAX
    } else {
        (cfg.undersample_zero_ratio * nonzero.len() as f64).floor() as usize
    };
    let keep_n = budget.min(zero.len());
    let mut keep: Vec<usize> = if keep_n == zero.len() {
        zero.clone()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
        index::sample(&mut rng, zero.len(), keep_n)
            .into_iter()
            .map(|k| zero[k])
            .collect()
    };
    keep.extend_from_slice(&nonzero);
    keep.sort_unstable();

    let mut out = ds.clone();
    out.train = train.select(&keep);
    Ok((
        out,
        UndersampleReport {
            zero_windows: zero.len(),
            nonzero_windows: nonzero.len(),
            retained_zero: keep_n,
        },
    ))
}
