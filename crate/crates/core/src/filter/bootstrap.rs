//! Bootstrap particle filter for the OU-bank state with known `H`.

use super::resample::multinomial_from_uniforms;
use super::weights::normalize_log_weights;
use super::{PosteriorSummary, StateSummary};
use crate::error::{domain, Error, Result};
use crate::hurst::HurstIndex;
use crate::kernel::{bank_size, OUBankSpec};
use crate::observation::{ln_factorial, log_likelihood_with, IntensityKind, IntensitySpec, ObservationSeries};
use crate::paths::{dot, OUBankState, OuPropagator};
use crate::rng::{Domain, SeedTree};
use rand::Rng;
use rand_distr::StandardNormal;

/// Weighted ensemble of bank states sharing one [`OUBankSpec`].
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleCloud {
    spec: OUBankSpec,
    /// Row-major `particles × J`.
    states: Vec<f64>,
    weights: Vec<f64>,
}

impl ParticleCloud {
    pub fn new(spec: OUBankSpec, states: Vec<OUBankState>) -> Result<Self> {
        if states.is_empty() {
            return domain("particle cloud needs at least one particle");
        }
        let j = spec.len();
        let mut flat = Vec::with_capacity(states.len() * j);
        for s in &states {
            if s.values().len() != j {
                return Err(Error::DimensionMismatch { expected: j, got: s.values().len() });
            }
            flat.extend_from_slice(s.values());
        }
        let m = states.len();
        Ok(Self { spec, states: flat, weights: vec![1.0 / m as f64; m] })
    }

    pub fn spec(&self) -> &OUBankSpec {
        &self.spec
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.spec.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn state(&self, m: usize) -> &[f64] {
        let j = self.dim();
        &self.states[m * j..(m + 1) * j]
    }

    pub fn states(&self) -> Vec<OUBankState> {
        (0..self.len()).map(|m| OUBankState::new(self.state(m).to_vec(), 0).expect("finite")).collect()
    }

    /// `Σ c_j Z_j` for every particle.
    pub fn aggregates(&self) -> Vec<f64> {
        (0..self.len()).map(|m| dot(self.spec.coeffs(), self.state(m))).collect()
    }

    /// Same states under a different bank of equal size (parameter jitter).
    pub fn with_spec(mut self, spec: OUBankSpec) -> Result<Self> {
        if spec.len() != self.spec.len() {
            return Err(Error::DimensionMismatch { expected: self.spec.len(), got: spec.len() });
        }
        self.spec = spec;
        Ok(self)
    }
}

/// `m` states with i.i.d. `N(0, prior_sd²)` entries and uniform weights.
pub fn init_bootstrap<R: Rng + ?Sized>(spec: &OUBankSpec, m: usize, prior_sd: f64, rng: &mut R) -> Result<ParticleCloud> {
    if m == 0 {
        return domain("need at least one particle");
    }
    if !(prior_sd >= 0.0 && prior_sd.is_finite()) {
        return domain(format!("prior standard deviation must be non-negative, got {prior_sd}"));
    }
    let states = (0..m * spec.len())
        .map(|_| prior_sd * rng.sample::<f64, _>(StandardNormal))
        .collect();
    Ok(ParticleCloud { spec: spec.clone(), states, weights: vec![1.0 / m as f64; m] })
}

/// Everything one filter step produces.
#[derive(Debug, Clone)]
pub struct BootstrapStep {
    /// Resampled, uniformly weighted cloud.
    pub cloud: ParticleCloud,
    /// `ln((1/M) Σ_m g(y | Z̄^m))`.
    pub log_evidence: f64,
    /// Aggregated states `X̄^m` before resampling.
    pub aggregates: Vec<f64>,
    /// Normalized weights before resampling.
    pub weights: Vec<f64>,
    /// Parent index of every resampled particle.
    pub ancestors: Vec<usize>,
    /// Intensities that hit the ceiling.
    pub clamped: usize,
    /// Scale of the reported summaries.
    pub kind: IntensityKind,
}

impl BootstrapStep {
    /// Weighted summary of the identified state (see
    /// [`IntensityKind::identified`]) before resampling.
    pub fn summary(&self) -> StateSummary {
        let xs: Vec<f64> = self.aggregates.iter().map(|&x| self.kind.identified(x)).collect();
        StateSummary::weighted(&xs, &self.weights)
    }

    /// Posterior expectation of `f(X)` before resampling.
    pub fn expectation(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.aggregates.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }
}

/// Propagate, weight, and resample once. Returns the resampled cloud and the
/// step's log evidence.
pub fn bootstrap_step<R: Rng + ?Sized>(
    cloud: &ParticleCloud,
    y: u64,
    delta: f64,
    ispec: &IntensitySpec,
    rng: &mut R,
) -> Result<(ParticleCloud, f64)> {
    let prop = OuPropagator::new(cloud.spec(), delta);
    let step = step_drawing(cloud, &prop, y, delta, ispec, rng, 0)?;
    Ok((step.cloud, step.log_evidence))
}

/// Draws `M` shared-factor normals, then `M` resampling uniforms, and runs
/// [`bootstrap_step_with_noise`]. The draw order does not depend on `H`, so
/// two runs from the same stream use common random numbers.
pub(crate) fn step_drawing<R: Rng + ?Sized>(
    cloud: &ParticleCloud,
    prop: &OuPropagator,
    y: u64,
    delta: f64,
    ispec: &IntensitySpec,
    rng: &mut R,
    step_index: usize,
) -> Result<BootstrapStep> {
    let m = cloud.len();
    let normals: Vec<f64> = (0..m).map(|_| rng.sample(StandardNormal)).collect();
    let uniforms: Vec<f64> = (0..m).map(|_| rng.random::<f64>()).collect();
    step_with_propagator(cloud, prop, y, delta, ispec, &normals, &uniforms, step_index)
}

/// One step with explicit randomness: `normals[m]` drives particle `m`, and
/// `uniforms` select the ancestors by inversion. `step_index` only labels
/// degeneracy diagnostics.
pub fn bootstrap_step_with_noise(
    cloud: &ParticleCloud,
    y: u64,
    delta: f64,
    ispec: &IntensitySpec,
    normals: &[f64],
    uniforms: &[f64],
    step_index: usize,
) -> Result<BootstrapStep> {
    let prop = OuPropagator::new(cloud.spec(), delta);
    step_with_propagator(cloud, &prop, y, delta, ispec, normals, uniforms, step_index)
}

#[allow(clippy::too_many_arguments)]
fn step_with_propagator(
    cloud: &ParticleCloud,
    prop: &OuPropagator,
    y: u64,
    delta: f64,
    ispec: &IntensitySpec,
    normals: &[f64],
    uniforms: &[f64],
    step_index: usize,
) -> Result<BootstrapStep> {
    let m = cloud.len();
    let j = cloud.dim();
    if normals.len() != m {
        return Err(Error::DimensionMismatch { expected: m, got: normals.len() });
    }
    if prop.len() != j {
        return Err(Error::DimensionMismatch { expected: j, got: prop.len() });
    }
    let coeffs = cloud.spec.coeffs();
    let ln_fact = ln_factorial(y);
    let mut moved = cloud.states.clone();
    let mut aggregates = Vec::with_capacity(m);
    let mut log_w = Vec::with_capacity(m);
    let mut clamped = 0;
    let (mut lambda_min, mut lambda_max) = (f64::INFINITY, f64::NEG_INFINITY);
    for (z, &v) in moved.chunks_exact_mut(j).zip(normals) {
        let x = prop.advance_aggregate(z, v, coeffs);
        let (lambda, hit) = ispec.rate_checked(x);
        clamped += hit as usize;
        lambda_min = lambda_min.min(lambda);
        lambda_max = lambda_max.max(lambda);
        aggregates.push(x);
        log_w.push(log_likelihood_with(y, lambda * delta, ln_fact));
    }
    let Some((weights, log_evidence)) = normalize_log_weights(&log_w)? else {
        return Err(Error::Degeneracy { step: step_index, count: y, lambda_min, lambda_max });
    };
    let ancestors = multinomial_from_uniforms(&weights, uniforms)?;
    let mut states = Vec::with_capacity(ancestors.len() * j);
    for &a in &ancestors {
        states.extend_from_slice(&moved[a * j..(a + 1) * j]);
    }
    let n_out = ancestors.len();
    Ok(BootstrapStep {
        cloud: ParticleCloud {
            spec: cloud.spec.clone(),
            states,
            weights: vec![1.0 / n_out as f64; n_out],
        },
        log_evidence,
        aggregates,
        weights,
        ancestors,
        clamped,
        kind: ispec.kind(),
    })
}

/// How the number of OU factors is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BankRule {
    /// `J(N, H)`, for a known Hurst index.
    HurstDependent,
    /// `J(N)`, shared by every Hurst index.
    HurstFree,
    Fixed(usize),
}

impl BankRule {
    pub fn resolve(self, steps: usize, h: Option<HurstIndex>) -> Result<usize> {
        match self {
            BankRule::HurstDependent => bank_size(steps, h),
            BankRule::HurstFree => bank_size(steps, None),
            BankRule::Fixed(j) if j > 0 => Ok(j),
            BankRule::Fixed(_) => domain("fixed bank size must be positive"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BootstrapConfig {
    pub particles: usize,
    pub prior_sd: f64,
    pub bank: BankRule,
}

impl BootstrapConfig {
    pub fn new(particles: usize) -> Self {
        Self { particles, prior_sd: super::DEFAULT_PRIOR_SD, bank: BankRule::HurstDependent }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapRun {
    pub summaries: Vec<PosteriorSummary>,
    pub log_evidence: f64,
    pub clamped: usize,
    pub bank_size: usize,
}

/// Filters `obs` with known `h`. Summary `n` describes the state at
/// `t_{n-1}`, the left endpoint that drives the count `y_n`.
pub fn run_bootstrap(
    obs: &ObservationSeries,
    h: HurstIndex,
    ispec: &IntensitySpec,
    config: &BootstrapConfig,
    seeds: SeedTree,
) -> Result<BootstrapRun> {
    run_bootstrap_observed(obs, h, ispec, config, seeds, |_, _| {})
}

/// As [`run_bootstrap`], calling `observe(n, step)` after every step.
pub fn run_bootstrap_observed(
    obs: &ObservationSeries,
    h: HurstIndex,
    ispec: &IntensitySpec,
    config: &BootstrapConfig,
    seeds: SeedTree,
    mut observe: impl FnMut(usize, &BootstrapStep),
) -> Result<BootstrapRun> {
    if obs.is_empty() {
        return Ok(BootstrapRun { summaries: Vec::new(), log_evidence: 0.0, clamped: 0, bank_size: 0 });
    }
    let j = config.bank.resolve(obs.len(), Some(h))?;
    let spec = OUBankSpec::for_hurst(h, j)?;
    let mut rng = seeds.stream(Domain::Filter, 0);
    let mut cloud = init_bootstrap(&spec, config.particles, config.prior_sd, &mut seeds.stream(Domain::Prior, 0))?;
    let prop = OuPropagator::new(&spec, obs.delta());
    let mut summaries = Vec::with_capacity(obs.len());
    let mut log_evidence = 0.0;
    let mut clamped = 0;
    for (i, &y) in obs.counts().iter().enumerate() {
        let n = i + 1;
        let step = step_drawing(&cloud, &prop, y, obs.delta(), ispec, &mut rng, n)?;
        log_evidence += step.log_evidence;
        clamped += step.clamped;
        summaries.push(PosteriorSummary::state_only(n, i as f64 * obs.delta(), step.summary()));
        observe(n, &step);
        cloud = step.cloud;
    }
    Ok(BootstrapRun { summaries, log_evidence, clamped, bank_size: j })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> OUBankSpec {
        OUBankSpec::for_hurst(HurstIndex::new(0.2).unwrap(), 12).unwrap()
    }

    fn exp_intensity(b: f64) -> IntensitySpec {
        IntensitySpec::new(IntensityKind::Exp, b).unwrap()
    }

    #[test]
    fn init_cloud_properties() {
        let tree = SeedTree::new(3);
        let zero = init_bootstrap(&spec(), 50, 0.0, &mut tree.stream(Domain::Prior, 0)).unwrap();
        assert!(zero.states.iter().all(|&v| v == 0.0));
        assert!(zero.weights().iter().all(|&w| w == 1.0 / 50.0));
        let a = init_bootstrap(&spec(), 50, 0.1, &mut tree.stream(Domain::Prior, 0)).unwrap();
        let b = init_bootstrap(&spec(), 50, 0.1, &mut tree.stream(Domain::Prior, 0)).unwrap();
        assert_eq!(a, b);
        assert!(init_bootstrap(&spec(), 0, 0.1, &mut tree.stream(Domain::Prior, 0)).is_err());
    }

    #[test]
    fn single_particle_is_its_own_posterior() {
        let tree = SeedTree::new(5);
        let cloud = init_bootstrap(&spec(), 1, 0.1, &mut tree.stream(Domain::Prior, 0)).unwrap();
        for y in [0, 3, 400] {
            let step =
                bootstrap_step_with_noise(&cloud, y, 0.01, &exp_intensity(800.0), &[0.4], &[0.9], 1).unwrap();
            assert_eq!(step.ancestors, vec![0]);
            assert_eq!(step.weights, vec![1.0]);
            let mut z = cloud.state(0).to_vec();
            OuPropagator::new(cloud.spec(), 0.01).advance(&mut z, 0.4);
            assert_eq!(step.cloud.state(0), &z[..]);
        }
    }

    #[test]
    fn large_count_favours_high_intensity() {
        let s = OUBankSpec::from_parts(HurstIndex::new(0.2).unwrap(), vec![1.0], vec![1.0]).unwrap();
        let lo = OUBankState::new(vec![-0.5], 0).unwrap();
        let hi = OUBankState::new(vec![0.5], 0).unwrap();
        let cloud = ParticleCloud::new(s, vec![lo, hi]).unwrap();
        let step = bootstrap_step_with_noise(&cloud, 30, 0.01, &exp_intensity(1000.0), &[0.0, 0.0], &[0.3, 0.6], 1)
            .unwrap();
        assert!(step.weights[1] > 0.5);
    }

    #[test]
    fn degeneracy_is_reported() {
        let s = spec();
        let cloud = init_bootstrap(&s, 4, 0.0, &mut SeedTree::new(1).stream(Domain::Prior, 0)).unwrap();
        let zero = IntensitySpec::new(IntensityKind::Exp, 0.0).unwrap();
        let err = bootstrap_step_with_noise(&cloud, 2, 0.01, &zero, &[0.0; 4], &[0.5; 4], 7).unwrap_err();
        assert!(matches!(err, Error::Degeneracy { step: 7, count: 2, .. }));
    }

    #[test]
    fn empty_observations_give_empty_run() {
        let obs = ObservationSeries::new(0.01, vec![]).unwrap();
        let run = run_bootstrap(
            &obs,
            HurstIndex::new(0.2).unwrap(),
            &exp_intensity(10.0),
            &BootstrapConfig::new(10),
            SeedTree::new(1),
        )
        .unwrap();
        assert!(run.summaries.is_empty());
    }

    #[test]
    fn evidence_of_run_is_sum_of_steps() {
        let obs = ObservationSeries::new(0.01, vec![3, 0, 7, 1, 2]).unwrap();
        let h = HurstIndex::new(0.2).unwrap();
        let cfg = BootstrapConfig { particles: 40, prior_sd: 0.05, bank: BankRule::Fixed(10) };
        let mut per_step = Vec::new();
        let run = run_bootstrap_observed(&obs, h, &exp_intensity(300.0), &cfg, SeedTree::new(4), |_, s| {
            per_step.push(s.log_evidence)
        })
        .unwrap();
        assert_eq!(per_step.len(), 5);
        assert!((run.log_evidence - per_step.iter().sum::<f64>()).abs() < 1e-12);
        for s in &run.summaries {
            assert!(s.state_q01 <= s.state_q99);
        }
    }
}
