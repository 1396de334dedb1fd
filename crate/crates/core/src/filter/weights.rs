//! Log-space weight arithmetic and weighted posterior summaries.

use crate::error::{Error, Result};

/// Normalizes log-weights with the max-shift trick. Returns the normalized
/// weights and `ln((1/n) Σ e^{log_w})`, or `None` if every entry is `-∞`.
pub fn normalize_log_weights(log_w: &[f64]) -> Result<Option<(Vec<f64>, f64)>> {
    if let Some(index) = log_w.iter().position(|w| w.is_nan() || *w == f64::INFINITY) {
        return Err(Error::NonFiniteWeight { index });
    }
    let max = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Ok(None);
    }
    let mut weights: Vec<f64> = log_w.iter().map(|&w| (w - max).exp()).collect();
    let sum: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= sum;
    }
    let log_mean = max + sum.ln() - (log_w.len() as f64).ln();
    Ok(Some((weights, log_mean)))
}

/// Weighted mean.
pub fn weighted_mean(values: &[f64], weights: &[f64]) -> f64 {
    let total: f64 = weights.iter().sum();
    values.iter().zip(weights).map(|(v, w)| v * w).sum::<f64>() / total
}

/// Weighted quantiles `inf { x : F(x) >= q }` for each `q` in `levels`
/// (ascending).
pub fn weighted_quantiles(values: &[f64], weights: &[f64], levels: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    let total: f64 = weights.iter().sum();
    let mut out = Vec::with_capacity(levels.len());
    let mut cum = 0.0;
    let mut idx = 0;
    for &q in levels {
        let target = q * total;
        while idx < order.len() {
            let next = cum + weights[order[idx]];
            if next >= target && weights[order[idx]] > 0.0 {
                break;
            }
            cum = next;
            idx += 1;
        }
        let pick = order[idx.min(order.len() - 1)];
        out.push(values[pick]);
    }
    out
}
