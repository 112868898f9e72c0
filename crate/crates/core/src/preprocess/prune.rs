use serde::{Deserialize, Serialize};

use super::{PreprocessConfig, PreprocessError};
use crate::telemetry::{Channel, TimeSeriesSegment};

/// A feature removed because it duplicated `partner`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DroppedChannel {
    pub channel: Channel,
    pub partner: Channel,
    pub correlation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PruneResult {
    pub kept: Vec<Channel>,
    pub dropped: Vec<DroppedChannel>,
    /// Zero-variance channels; their correlation with anything is taken as 0.
    pub constant: Vec<Channel>,
}

/// Pearson correlation; 0 when either side has zero variance.
pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        0.0
    } else {
        (sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0)
    }
}

/// Drops redundant feature channels.
///
/// Pairs are visited in configured channel order; for any pair with
/// `|ρ| > threshold` the later channel goes, unless it is a target, in which
/// case the earlier one goes. Pairs of two targets are left intact, and a
/// channel already dropped never causes another drop.
pub fn prune_correlated(
    segments: &[TimeSeriesSegment],
    cfg: &PreprocessConfig,
) -> Result<PruneResult, PreprocessError> {
    let total: usize = segments.iter().map(|s| s.len()).sum();
    if total < 2 {
        return Err(PreprocessError::TooFewSamples(total));
    }
    let channels = &cfg.feature_channels;
    let columns: Vec<Vec<f64>> = channels
        .iter()
        .map(|&c| segments.iter().flat_map(|s| s.channel(c)).collect())
        .collect();
    let is_target = |c: Channel| cfg.target_channels.contains(&c);
    let constant: Vec<Channel> = channels
        .iter()
        .zip(&columns)
        .filter(|(_, col)| col.iter().all(|&v| v == col[0]))
        .map(|(&c, _)| c)
        .collect();

    let mut dropped: Vec<DroppedChannel> = Vec::new();
    let gone = |dropped: &[DroppedChannel], c: Channel| dropped.iter().any(|d| d.channel == c);
    for i in 0..channels.len() {
        for j in (i + 1)..channels.len() {
            let (a, b) = (channels[i], channels[j]);
            if gone(&dropped, a) || gone(&dropped, b) {
                continue;
            }
            let rho = pearson(&columns[i], &columns[j]);
            if rho.abs() <= cfg.correlation_prune_threshold {
                continue;
            }
            let (victim, partner) = match (is_target(a), is_target(b)) {
                (_, false) => (b, a),
                (false, true) => (a, b),
                (true, true) => continue,
            };
            dropped.push(DroppedChannel {
                channel: victim,
                partner,
                correlation: rho,
            });
        }
    }
    let kept = channels.iter().copied().filter(|&c| !gone(&dropped, c)).collect();
    Ok(PruneResult {
        kept,
        dropped,
        constant,
    })
}
