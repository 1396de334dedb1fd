//! Multinomial resampling.

use crate::error::{domain, Error, Result};
use rand::Rng;

fn check(weights: &[f64]) -> Result<f64> {
    if let Some(index) = weights.iter().position(|w| !w.is_finite() || *w < 0.0) {
        return Err(Error::NonFiniteWeight { index });
    }
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return domain("weights sum to zero");
    }
    Ok(total)
}

/// `weights.len()` i.i.d. categorical draws, returned in ascending order.
pub fn resample_multinomial<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> Result<Vec<usize>> {
    let uniforms: Vec<f64> = (0..weights.len()).map(|_| rng.random::<f64>()).collect();
    multinomial_from_uniforms(weights, &uniforms)
}

/// Categorical draws by inversion of the cumulative weights at the given
/// uniforms. Uniforms are sorted first so one pass over the weights suffices;
/// the draws stay i.i.d., only their order is fixed.
pub fn multinomial_from_uniforms(weights: &[f64], uniforms: &[f64]) -> Result<Vec<usize>> {
    let total = check(weights)?;
    let mut u: Vec<f64> = uniforms.iter().map(|&x| x * total).collect();
    u.sort_by(f64::total_cmp);
    let last_positive = weights.iter().rposition(|&w| w > 0.0).expect("total > 0");
    let mut out = Vec::with_capacity(u.len());
    let mut i = 0;
    let mut cum = weights[0];
    for target in u {
        while (target >= cum || weights[i] == 0.0) && i < last_positive {
            i += 1;
            cum += weights[i];
        }
        out.push(i);
    }
    Ok(out)
}
