//! Empirical continuity of the filter in the Hurst index.
//!
//! The bootstrap filter is run at `H` and at `H + δ` from the same random
//! stream, so both runs see identical normals and resampling uniforms, and
//! the largest gap between the posterior expectations of `tanh(X)` and
//! `exp(-X²)` is recorded for every `δ`.

use super::bootstrap::{run_bootstrap_observed, BankRule, BootstrapConfig};
use crate::error::Result;
use crate::hurst::{HurstIndex, ParamBox};
use crate::observation::{IntensitySpec, ObservationSeries};
use crate::rng::SeedTree;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContinuityConfig {
    pub particles: usize,
    /// Shared bank size; must not depend on `H` for the runs to be coupled.
    pub bank_size: usize,
    pub prior_sd: f64,
    pub param_box: ParamBox,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContinuityRow {
    pub delta: f64,
    /// `max_n |E[tanh X_n](H + δ) - E[tanh X_n](H)|`
    pub d_tanh: f64,
    /// Same for `exp(-X²)`.
    pub d_gauss: f64,
    /// `H + δ` fell outside the parameter box and the run was skipped.
    pub skipped: bool,
}

impl ContinuityRow {
    pub fn d_max(&self) -> f64 {
        self.d_tanh.max(self.d_gauss)
    }
}

fn expectations(
    h: HurstIndex,
    obs: &ObservationSeries,
    ispec: &IntensitySpec,
    config: &ContinuityConfig,
    seeds: SeedTree,
) -> Result<Vec<(f64, f64)>> {
    let cfg = BootstrapConfig {
        particles: config.particles,
        prior_sd: config.prior_sd,
        bank: BankRule::Fixed(config.bank_size),
    };
    let mut out = Vec::with_capacity(obs.len());
    run_bootstrap_observed(obs, h, ispec, &cfg, seeds, |_, step| {
        out.push((step.expectation(f64::tanh), step.expectation(|x| (-x * x).exp())));
    })?;
    Ok(out)
}

pub fn continuity_probe(
    h: HurstIndex,
    deltas: &[f64],
    obs: &ObservationSeries,
    ispec: &IntensitySpec,
    config: &ContinuityConfig,
    seeds: SeedTree,
) -> Result<Vec<ContinuityRow>> {
    let base = expectations(h, obs, ispec, config, seeds)?;
    deltas
        .iter()
        .map(|&delta| {
            let shifted = h.value() + delta;
            if !config.param_box.contains(shifted) {
                return Ok(ContinuityRow { delta, d_tanh: f64::NAN, d_gauss: f64::NAN, skipped: true });
            }
            let other = expectations(HurstIndex::new(shifted)?, obs, ispec, config, seeds)?;
            let (mut d_tanh, mut d_gauss) = (0.0f64, 0.0f64);
            for (a, b) in base.iter().zip(&other) {
                d_tanh = d_tanh.max((a.0 - b.0).abs());
                d_gauss = d_gauss.max((a.1 - b.1).abs());
            }
            Ok(ContinuityRow { delta, d_tanh, d_gauss, skipped: false })
        })
        .collect()
}
