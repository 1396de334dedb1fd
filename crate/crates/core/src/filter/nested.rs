//! Nested particle filter: an outer layer of jittered Hurst-index particles,
//! each carrying an inner bootstrap filter whose averaged likelihood weights
//! the outer layer.

use super::bootstrap::{init_bootstrap, step_drawing, ParticleCloud};
use super::resample::resample_multinomial;
use super::weights::normalize_log_weights;
use super::{PosteriorSummary, StateSummary};
use crate::error::{domain, Error, Result};
use crate::hurst::{HurstIndex, ParamBox};
use crate::kernel::OUBankSpec;
use crate::observation::{IntensitySpec, ObservationSeries};
use crate::paths::OuPropagator;
use crate::rng::{Domain, SeedTree};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

/// Reflected Gaussian move of scale `scale / sqrt(K)`. With probability
/// `refresh_prob` the move is replaced by a fresh uniform draw from the box.
///
/// The refresh is off by default. A single step carries little information
/// about the Hurst index, so refreshed particles survive for many steps and
/// drag the posterior toward the middle of the box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JitterKernel {
    pub refresh_prob: f64,
    pub scale: f64,
}

impl Default for JitterKernel {
    fn default() -> Self {
        Self { refresh_prob: 0.0, scale: 0.05 }
    }
}

impl JitterKernel {
    pub fn step_sd(&self, outer: usize) -> f64 {
        self.scale / (outer.max(1) as f64).sqrt()
    }
}

pub fn jitter<R: Rng + ?Sized>(theta: f64, outer: usize, param_box: &ParamBox, kernel: &JitterKernel, rng: &mut R) -> f64 {
    let u: f64 = rng.random();
    let e: f64 = rng.sample(StandardNormal);
    if u < kernel.refresh_prob {
        param_box.sample_uniform(rng)
    } else {
        param_box.reflect(theta + kernel.step_sd(outer) * e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NestedConfig {
    /// Number of parameter particles `K`.
    pub outer: usize,
    /// Inner particles per parameter particle `M`.
    pub inner: usize,
    /// Shared bank size `J`, fixed for every parameter value.
    pub bank_size: usize,
    pub param_box: ParamBox,
    pub jitter: JitterKernel,
    pub prior_sd: f64,
    pub intensity: IntensitySpec,
}

impl NestedConfig {
    pub fn new(outer: usize, inner: usize, bank_size: usize, intensity: IntensitySpec) -> Self {
        Self {
            outer,
            inner,
            bank_size,
            param_box: ParamBox::default(),
            jitter: JitterKernel::default(),
            prior_sd: super::DEFAULT_PRIOR_SD,
            intensity,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.outer == 0 || self.inner == 0 || self.bank_size == 0 {
            return domain("K, M and J must all be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParameterParticle {
    theta: HurstIndex,
    inner: ParticleCloud,
}

impl ParameterParticle {
    pub fn theta(&self) -> HurstIndex {
        self.theta
    }

    pub fn inner(&self) -> &ParticleCloud {
        &self.inner
    }

    pub fn bank_size(&self) -> usize {
        self.inner.dim()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParameterCloud {
    particles: Vec<ParameterParticle>,
    /// `ln u_n^M` of each particle at the last step (0 at initialization).
    log_likelihoods: Vec<f64>,
    step: usize,
}

impl ParameterCloud {
    pub fn particles(&self) -> &[ParameterParticle] {
        &self.particles
    }

    pub fn log_likelihoods(&self) -> &[f64] {
        &self.log_likelihoods
    }

    pub fn step(&self) -> usize {
        self.step
    }

    pub fn thetas(&self) -> Vec<f64> {
        self.particles.iter().map(|p| p.theta.value()).collect()
    }

    /// Mean and quantiles of the equally weighted atoms `{θ^k}`.
    pub fn hurst_summary(&self) -> StateSummary {
        StateSummary::equal(&self.thetas())
    }
}

/// Draws `K` parameters from the uniform prior on the box and an inner cloud
/// for each.
pub fn init_nested(config: &NestedConfig, seeds: SeedTree) -> Result<ParameterCloud> {
    config.validate()?;
    let mut rng = seeds.stream(Domain::OuterInit, 0);
    let thetas: Vec<HurstIndex> =
        (0..config.outer).map(|_| config.param_box.hurst(config.param_box.sample_uniform(&mut rng))).collect();
    let particles = thetas
        .into_par_iter()
        .enumerate()
        .map(|(k, theta)| {
            let spec = OUBankSpec::for_hurst(theta, config.bank_size)?;
            let inner = init_bootstrap(&spec, config.inner, config.prior_sd, &mut seeds.stream(Domain::Prior, k as u64))?;
            Ok(ParameterParticle { theta, inner })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ParameterCloud { log_likelihoods: vec![0.0; particles.len()], particles, step: 0 })
}

#[derive(Debug, Clone)]
pub struct NestedStep {
    pub cloud: ParameterCloud,
    pub summary: PosteriorSummary,
    pub clamped: usize,
}

struct OuterMove {
    particle: ParameterParticle,
    log_u: f64,
    aggregates: Vec<f64>,
    weights: Vec<f64>,
    clamped: usize,
}

/// One recursion: jitter every `θ^k`, regenerate its bank, move its inner
/// cloud and record `u^M(θ̄^k)` from the pre-resampling inner weights, update
/// the inner filter, then resample the outer layer with weights `∝ u^M`.
///
/// Outer particle `k` at step `n` uses its own stream, so the result is the
/// same for any number of worker threads.
pub fn nested_step(
    cloud: &ParameterCloud,
    y: u64,
    delta: f64,
    config: &NestedConfig,
    seeds: SeedTree,
) -> Result<NestedStep> {
    let n = cloud.step + 1;
    let outer = cloud.particles.len();
    let stream_base = n as u64 * outer as u64;
    let moves = cloud
        .particles
        .par_iter()
        .enumerate()
        .map(|(k, p)| {
            let mut rng = seeds.stream(Domain::Inner, stream_base + k as u64);
            let theta = config.param_box.hurst(jitter(p.theta.value(), outer, &config.param_box, &config.jitter, &mut rng));
            let spec = OUBankSpec::for_hurst(theta, config.bank_size)?;
            let prop = OuPropagator::new(&spec, delta);
            let inner = p.inner.clone().with_spec(spec)?;
            let step = step_drawing(&inner, &prop, y, delta, &config.intensity, &mut rng, n)?;
            Ok(OuterMove {
                particle: ParameterParticle { theta, inner: step.cloud },
                log_u: step.log_evidence,
                aggregates: step.aggregates,
                weights: step.weights,
                clamped: step.clamped,
            })
        })
        .map(|r| match r {
            // Every inner weight vanished: this parameter has zero likelihood.
            Err(Error::Degeneracy { .. }) => Ok(None),
            other => other.map(Some),
        })
        .collect::<Result<Vec<_>>>()?;

    let log_u: Vec<f64> = moves.iter().map(|m| m.as_ref().map_or(f64::NEG_INFINITY, |m| m.log_u)).collect();
    let Some((outer_w, _)) = normalize_log_weights(&log_u)? else {
        return Err(Error::Degeneracy {
            step: n,
            count: y,
            lambda_min: f64::NAN,
            lambda_max: f64::NAN,
        });
    };

    // Joint state posterior: outer weights times inner weights, before resampling.
    let mut xs = Vec::new();
    let mut ws = Vec::new();
    let mut clamped = 0;
    for (m, &wk) in moves.iter().zip(&outer_w) {
        if let Some(m) = m {
            clamped += m.clamped;
            if wk > 0.0 {
                xs.extend(m.aggregates.iter().map(|&x| config.intensity.kind().identified(x)));
                ws.extend(m.weights.iter().map(|&w| w * wk));
            }
        }
    }
    let state = StateSummary::weighted(&xs, &ws);

    let ancestors = resample_multinomial(&outer_w, &mut seeds.stream(Domain::Outer, n as u64))?;
    let particles: Vec<ParameterParticle> = ancestors
        .iter()
        .map(|&a| moves[a].as_ref().expect("positive weight").particle.clone())
        .collect();
    let log_likelihoods = ancestors.iter().map(|&a| log_u[a]).collect();
    let next = ParameterCloud { particles, log_likelihoods, step: n };
    let summary = PosteriorSummary {
        step: n,
        time: (n - 1) as f64 * delta,
        state_mean: state.mean,
        state_q01: state.q01,
        state_q99: state.q99,
        hurst: Some(next.hurst_summary()),
    };
    Ok(NestedStep { cloud: next, summary, clamped })
}

#[derive(Debug, Clone, PartialEq)]
pub struct NestedRun {
    pub summaries: Vec<PosteriorSummary>,
    /// `{θ_N^k}` after the last step.
    pub final_thetas: Vec<f64>,
    pub prior_summary: StateSummary,
    pub clamped: usize,
}

pub fn run_nested(obs: &ObservationSeries, config: &NestedConfig, seeds: SeedTree) -> Result<NestedRun> {
    let mut cloud = init_nested(config, seeds)?;
    let prior_summary = cloud.hurst_summary();
    let mut summaries = Vec::with_capacity(obs.len());
    let mut clamped = 0;
    for &y in obs.counts() {
        let step = nested_step(&cloud, y, obs.delta(), config, seeds)?;
        summaries.push(step.summary);
        clamped += step.clamped;
        cloud = step.cloud;
    }
    Ok(NestedRun { summaries, final_thetas: cloud.thetas(), prior_summary, clamped })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::observation::IntensityKind;

    #[test]
    fn jitter_stays_in_box() {
        let b = ParamBox::default();
        let k = JitterKernel { refresh_prob: 0.2, scale: 2.0 };
        let mut rng = SeedTree::new(1).stream(Domain::Inner, 0);
        let mut theta = 0.011;
        for _ in 0..10_000 {
            theta = jitter(theta, 1, &b, &k, &mut rng);
            assert!(b.contains(theta));
        }
    }

    #[test]
    fn jitter_identity_when_switched_off() {
        let b = ParamBox::default();
        let k = JitterKernel { refresh_prob: 0.0, scale: 0.0 };
        let mut rng = SeedTree::new(2).stream(Domain::Inner, 0);
        for &t in &[0.01, 0.1234, 0.49] {
            assert_eq!(jitter(t, 10, &b, &k, &mut rng), t);
        }
        let d = JitterKernel::default();
        assert!(d.step_sd(10_000) < d.step_sd(100));
        assert!((d.step_sd(100) - 0.005).abs() < 1e-15);
    }

    fn config(outer: usize, inner: usize, b: f64) -> NestedConfig {
        NestedConfig::new(outer, inner, 10, IntensitySpec::new(IntensityKind::Exp, b).unwrap())
    }

    #[test]
    fn prior_mean_at_start() {
        let cloud = init_nested(&config(2000, 2, 100.0), SeedTree::new(3)).unwrap();
        let s = cloud.hurst_summary();
        // Uniform(0.01, 0.49): sd 0.1386, so the mean of 2000 draws has sd 0.0031.
        assert!((s.mean - 0.25).abs() < 0.0124, "{}", s.mean);
        assert!(cloud.particles().iter().all(|p| p.bank_size() == 10));
    }

    #[test]
    fn single_outer_particle_resamples_to_itself() {
        let cfg = config(1, 20, 200.0);
        let cloud = init_nested(&cfg, SeedTree::new(4)).unwrap();
        let step = nested_step(&cloud, 3, 0.01, &cfg, SeedTree::new(4)).unwrap();
        assert_eq!(step.cloud.particles().len(), 1);
        assert_eq!(step.summary.hurst.unwrap().mean, step.cloud.thetas()[0]);
    }

    #[test]
    fn deterministic_across_thread_counts() {
        let cfg = config(12, 15, 500.0);
        let obs = ObservationSeries::new(0.01, vec![4, 6, 2, 9, 5, 0, 3]).unwrap();
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| run_nested(&obs, &cfg, SeedTree::new(8)).unwrap())
        };
        assert_eq!(run(1), run(3));
    }

    #[test]
    fn thetas_stay_in_box() {
        let mut cfg = config(30, 10, 500.0);
        cfg.param_box = ParamBox::new(0.2, 0.3).unwrap();
        cfg.jitter = JitterKernel { refresh_prob: 0.1, scale: 1.0 };
        let obs = ObservationSeries::new(0.01, vec![4, 6, 2, 9, 5, 0, 3, 8, 1]).unwrap();
        let run = run_nested(&obs, &cfg, SeedTree::new(2)).unwrap();
        assert!(run.final_thetas.iter().all(|&t| (0.2..=0.3).contains(&t)));
        for s in &run.summaries {
            let h = s.hurst.unwrap();
            assert!(h.q01 >= 0.2 && h.q99 <= 0.3 && h.q01 <= h.q99);
        }
    }
}
