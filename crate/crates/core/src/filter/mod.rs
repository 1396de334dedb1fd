//! Particle filters: the bootstrap filter for known `H` and the nested
//! filter that estimates `H` online.

mod bootstrap;
mod nested;
mod probe;
mod resample;
mod weights;

pub use bootstrap::{
    bootstrap_step, bootstrap_step_with_noise, init_bootstrap, run_bootstrap, run_bootstrap_observed, BankRule,
    BootstrapConfig, BootstrapRun, BootstrapStep, ParticleCloud,
};
pub use nested::{
    init_nested, jitter, nested_step, run_nested, JitterKernel, NestedConfig, NestedRun, NestedStep,
    ParameterCloud, ParameterParticle,
};
pub use probe::{continuity_probe, ContinuityConfig, ContinuityRow};
pub use resample::{multinomial_from_uniforms, resample_multinomial};
pub use weights::{normalize_log_weights, weighted_mean, weighted_quantiles};

/// Standard deviation of the centred Gaussian prior on each bank factor.
pub const DEFAULT_PRIOR_SD: f64 = 0.01;

/// Lower and upper posterior quantile levels reported in summaries.
pub const QUANTILE_LEVELS: [f64; 2] = [0.01, 0.99];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateSummary {
    pub mean: f64,
    pub q01: f64,
    pub q99: f64,
}

impl StateSummary {
    pub fn weighted(values: &[f64], weights: &[f64]) -> Self {
        let q = weighted_quantiles(values, weights, &QUANTILE_LEVELS);
        Self { mean: weighted_mean(values, weights), q01: q[0], q99: q[1] }
    }

    pub fn equal(values: &[f64]) -> Self {
        Self::weighted(values, &vec![1.0; values.len()])
    }
}

/// Per-step posterior summary. `time` is the left endpoint `t_{n-1}` of the
/// bin whose count was assimilated at step `n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PosteriorSummary {
    pub step: usize,
    pub time: f64,
    pub state_mean: f64,
    pub state_q01: f64,
    pub state_q99: f64,
    pub hurst: Option<StateSummary>,
}

impl PosteriorSummary {
    pub fn state_only(step: usize, time: f64, s: StateSummary) -> Self {
        Self { step, time, state_mean: s.mean, state_q01: s.q01, state_q99: s.q99, hurst: None }
    }
}
