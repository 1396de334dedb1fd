//! Hidden-state path simulation: the OU bank with exact shared-noise
//! updates, its fBM variant with the `Q_0` initial condition, exact Cholesky
//! reference paths, and the non-rough comparison models.

use crate::error::{domain, Error, Result};
use crate::hurst::HurstIndex;
use crate::kernel::{fbm_covariance, liouville_covariance, OUBankSpec};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

/// Largest grid accepted by the Cholesky reference sampler.
pub const MAX_REFERENCE_STEPS: usize = 5000;

/// Uniform time grid `t_n = n Δ`, `n = 0..=steps`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    delta: f64,
    steps: usize,
}

impl Grid {
    pub fn new(delta: f64, steps: usize) -> Result<Self> {
        if !(delta > 0.0 && delta.is_finite()) {
            return domain(format!("time step must be positive, got {delta}"));
        }
        Ok(Self { delta, steps })
    }

    /// Grid over `[0, horizon]`; `horizon / delta` must be an integer.
    pub fn from_horizon(horizon: f64, delta: f64) -> Result<Self> {
        if !(horizon > 0.0 && delta > 0.0) {
            return domain("horizon and step must be positive");
        }
        let ratio = horizon / delta;
        let steps = ratio.round();
        if (ratio - steps).abs() > 1e-9 * ratio.max(1.0) || steps < 1.0 {
            return domain(format!("T / delta = {ratio} is not a positive integer"));
        }
        Self::new(delta, steps as usize)
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn horizon(&self) -> f64 {
        self.delta * self.steps as f64
    }

    pub fn time(&self, n: usize) -> f64 {
        n as f64 * self.delta
    }
}

/// Values of the `J` OU factors at grid index `step`.
#[derive(Debug, Clone, PartialEq)]
pub struct OUBankState {
    values: Vec<f64>,
    step: usize,
}

impl OUBankState {
    pub fn zeros(j: usize) -> Self {
        Self { values: vec![0.0; j], step: 0 }
    }

    pub fn new(values: Vec<f64>, step: usize) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return domain("bank state entries must be finite");
        }
        Ok(Self { values, step })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn step(&self) -> usize {
        self.step
    }
}

/// Per-factor decay `e^{-κΔ}` and noise scale `sqrt((1 - e^{-2κΔ}) / 2κ)`
/// for one step size.
#[derive(Debug, Clone, PartialEq)]
pub struct OuPropagator {
    decay: Vec<f64>,
    scale: Vec<f64>,
}

impl OuPropagator {
    pub fn new(spec: &OUBankSpec, delta: f64) -> Self {
        let (decay, scale) = spec
            .speeds()
            .iter()
            .map(|&k| {
                let decay = (-k * delta).exp();
                let var = -(-2.0 * k * delta).exp_m1() / (2.0 * k);
                (decay, var.sqrt())
            })
            .unzip();
        Self { decay, scale }
    }

    pub fn len(&self) -> usize {
        self.decay.len()
    }

    pub fn is_empty(&self) -> bool {
        self.decay.is_empty()
    }

    pub fn decay(&self) -> &[f64] {
        &self.decay
    }

    pub fn scale(&self) -> &[f64] {
        &self.scale
    }

    /// Exact update of every factor with one shared standard normal `v`.
    #[inline]
    pub fn advance(&self, z: &mut [f64], v: f64) {
        for ((z, &a), &s) in z.iter_mut().zip(&self.decay).zip(&self.scale) {
            *z = *z * a + s * v;
        }
    }

    /// Advances `z` and returns `Σ c_j z_j` in the same pass.
    #[inline]
    pub fn advance_aggregate(&self, z: &mut [f64], v: f64, coeffs: &[f64]) -> f64 {
        let mut x = 0.0;
        for (((z, &a), &s), &c) in z.iter_mut().zip(&self.decay).zip(&self.scale).zip(coeffs) {
            *z = *z * a + s * v;
            x += c * *z;
        }
        x
    }
}

fn check_dim(state: &OUBankState, spec: &OUBankSpec) -> Result<()> {
    if state.values.len() != spec.len() {
        return Err(Error::DimensionMismatch { expected: spec.len(), got: state.values.len() });
    }
    Ok(())
}

/// One exact step of length `delta` driven by the shared normal `v`.
pub fn ou_step(state: &OUBankState, spec: &OUBankSpec, delta: f64, v: f64) -> Result<OUBankState> {
    check_dim(state, spec)?;
    if !(delta > 0.0) {
        return domain(format!("time step must be positive, got {delta}"));
    }
    let mut values = state.values.clone();
    OuPropagator::new(spec, delta).advance(&mut values, v);
    Ok(OUBankState { values, step: state.step + 1 })
}

/// Exact variance of `X_{t_N}` under the shared-normal update from a zero
/// bank: `Σ_{l<N} (Σ_j c_j s_j e^{-κ_j l Δ})²` with `s_j` the one-step noise
/// scale. One normal drives every factor, so the factor increments are
/// perfectly correlated within a step; this exceeds
/// [`approx_covariance`](crate::kernel::approx_covariance) by a term that
/// vanishes as `κ_j Δ → 0`.
pub fn shared_noise_variance(spec: &OUBankSpec, grid: Grid) -> f64 {
    let prop = OuPropagator::new(spec, grid.delta());
    let mut decay = vec![1.0; spec.len()];
    let mut total = 0.0;
    for _ in 0..grid.steps() {
        let g: f64 = spec.coeffs().iter().zip(prop.scale()).zip(&decay).map(|((c, s), d)| c * s * d).sum();
        total += g * g;
        for (d, k) in decay.iter_mut().zip(prop.decay()) {
            *d *= k;
        }
    }
    total
}

/// `X = Σ c_j Z^j`.
pub fn aggregate(state: &OUBankState, spec: &OUBankSpec) -> Result<f64> {
    check_dim(state, spec)?;
    Ok(dot(spec.coeffs(), &state.values))
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Scalar path on a grid; `values[n]` is the value at `t_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct StatePath {
    grid: Grid,
    values: Vec<f64>,
}

impl StatePath {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.steps() + 1 {
            return Err(Error::DimensionMismatch { expected: grid.steps() + 1, got: values.len() });
        }
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Lower Cholesky factor of `cov`, retrying with diagonal jitter
/// `1e-12, 1e-11, …, 1e-6` when the plain factorization fails.
pub fn cholesky_with_jitter(cov: &DMatrix<f64>) -> Result<(DMatrix<f64>, f64)> {
    if let Some(ch) = cov.clone().cholesky() {
        return Ok((ch.l(), 0.0));
    }
    let mut jitter = 1e-12;
    while jitter <= 1e-6 * (1.0 + 1e-9) {
        let mut m = cov.clone();
        for i in 0..m.nrows() {
            m[(i, i)] += jitter;
        }
        if let Some(ch) = m.cholesky() {
            return Ok((ch.l(), jitter));
        }
        jitter *= 10.0;
    }
    Err(Error::Factorization(format!(
        "{}x{} covariance not positive definite after jitter 1e-6",
        cov.nrows(),
        cov.ncols()
    )))
}

/// Covariance matrix `[1/(κ_i + κ_j)]` of `(Q_0^{κ_1}, …, Q_0^{κ_J})`.
pub fn q0_covariance(spec: &OUBankSpec) -> DMatrix<f64> {
    let k = spec.speeds();
    DMatrix::from_fn(k.len(), k.len(), |i, j| 1.0 / (k[i] + k[j]))
}

/// Draw of the initial-condition vector `Q_0^j = ∫_{-∞}^0 e^{κ_j s} dB_s`.
pub fn sample_q0<R: Rng + ?Sized>(spec: &OUBankSpec, rng: &mut R) -> Result<Vec<f64>> {
    let (l, _) = cholesky_with_jitter(&q0_covariance(spec))?;
    let z = DVector::from_iterator(spec.len(), (0..spec.len()).map(|_| rng.sample::<f64, _>(StandardNormal)));
    Ok((l * z).iter().copied().collect())
}

/// Liouville approximation `X_n = Σ c_j Z^j_{t_n}` from a zero bank. Returns the
/// path and the bank trajectory (`steps + 1` states).
pub fn simulate_liouville<R: Rng + ?Sized>(
    spec: &OUBankSpec,
    grid: Grid,
    rng: &mut R,
) -> (StatePath, Vec<OUBankState>) {
    let prop = OuPropagator::new(spec, grid.delta());
    let mut z = vec![0.0; spec.len()];
    let mut values = Vec::with_capacity(grid.steps() + 1);
    let mut bank = Vec::with_capacity(grid.steps() + 1);
    values.push(0.0);
    bank.push(OUBankState::zeros(spec.len()));
    for n in 1..=grid.steps() {
        let v: f64 = rng.sample(StandardNormal);
        values.push(prop.advance_aggregate(&mut z, v, spec.coeffs()));
        bank.push(OUBankState { values: z.clone(), step: n });
    }
    (StatePath { grid, values }, bank)
}

/// fBM approximation `Σ c_j (Z^j_t + (e^{-κ_j t} - 1) Q_0^j)` with `Q_0` drawn
/// first and the bank driven by the same generator afterwards.
pub fn simulate_fbm<R: Rng + ?Sized>(spec: &OUBankSpec, grid: Grid, rng: &mut R) -> Result<StatePath> {
    let q0 = sample_q0(spec, rng)?;
    simulate_fbm_with_q0(spec, grid, &q0, rng)
}

/// As [`simulate_fbm`] with a given initial-condition vector.
pub fn simulate_fbm_with_q0<R: Rng + ?Sized>(
    spec: &OUBankSpec,
    grid: Grid,
    q0: &[f64],
    rng: &mut R,
) -> Result<StatePath> {
    if q0.len() != spec.len() {
        return Err(Error::DimensionMismatch { expected: spec.len(), got: q0.len() });
    }
    let (liouville, _) = simulate_liouville(spec, grid, rng);
    let values = liouville
        .values
        .iter()
        .enumerate()
        .map(|(n, &x)| {
            let t = grid.time(n);
            let memory: f64 = spec
                .coeffs()
                .iter()
                .zip(spec.speeds())
                .zip(q0)
                .map(|((&c, &k), &q)| c * (-k * t).exp_m1() * q)
                .sum();
            x + memory
        })
        .collect();
    Ok(StatePath { grid, values })
}

/// Which exact Gaussian process the reference sampler targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReferenceKind {
    Fbm,
    Liouville,
}

/// Exact Gaussian sampler on a grid via the Cholesky factor of the full
/// covariance of `(V_{t_1}, …, V_{t_N})`.
#[derive(Debug, Clone)]
pub struct CholeskyReference {
    grid: Grid,
    factor: DMatrix<f64>,
    covariance: DMatrix<f64>,
}

impl CholeskyReference {
    /// `hurst` may be up to 1 for fBM; the Liouville kind needs `H < 1/2`.
    pub fn new(hurst: f64, kind: ReferenceKind, grid: Grid) -> Result<Self> {
        let n = grid.steps();
        if n > MAX_REFERENCE_STEPS {
            return domain(format!("reference grid of {n} steps exceeds {MAX_REFERENCE_STEPS}"));
        }
        if n == 0 {
            return domain("reference grid needs at least one step");
        }
        let covariance = match kind {
            ReferenceKind::Fbm => {
                if !(hurst > 0.0 && hurst <= 1.0) {
                    return domain(format!("fBM needs 0 < H <= 1, got {hurst}"));
                }
                DMatrix::from_fn(n, n, |i, j| fbm_covariance(grid.time(i + 1), grid.time(j + 1), hurst))
            }
            ReferenceKind::Liouville => {
                let h = HurstIndex::new(hurst)?;
                let mut cov = DMatrix::zeros(n, n);
                for i in 0..n {
                    for j in 0..=i {
                        let c = liouville_covariance(grid.time(i + 1), grid.time(j + 1), h)?;
                        cov[(i, j)] = c;
                        cov[(j, i)] = c;
                    }
                }
                cov
            }
        };
        let (factor, _) = cholesky_with_jitter(&covariance)?;
        Ok(Self { grid, factor, covariance })
    }

    /// Covariance of the values at `t_1, …, t_N`.
    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> StatePath {
        let n = self.grid.steps();
        let z = DVector::from_iterator(n, (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)));
        let x = &self.factor * z;
        let mut values = Vec::with_capacity(n + 1);
        values.push(0.0);
        values.extend(x.iter().copied());
        StatePath { grid: self.grid, values }
    }
}

/// One exact reference path; build a [`CholeskyReference`] to draw many.
pub fn cholesky_reference_path<R: Rng + ?Sized>(
    hurst: f64,
    kind: ReferenceKind,
    grid: Grid,
    rng: &mut R,
) -> Result<StatePath> {
    Ok(CholeskyReference::new(hurst, kind, grid)?.sample(rng))
}

/// Standard Brownian motion on the grid (the state of the `|W|²` model).
pub fn simulate_abs_bm<R: Rng + ?Sized>(grid: Grid, rng: &mut R) -> StatePath {
    let sd = grid.delta().sqrt();
    let mut w = 0.0;
    let mut values = Vec::with_capacity(grid.steps() + 1);
    values.push(0.0);
    for _ in 0..grid.steps() {
        w += sd * rng.sample::<f64, _>(StandardNormal);
        values.push(w);
    }
    StatePath { grid, values }
}

/// Parameters of the two-factor OU-OU volatility model
/// `dR = -βR dt + σ_R dW'`, `dV = κ(R - V) dt + σ_V dW`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OuOuParams {
    pub beta: f64,
    pub sigma_r2: f64,
    pub kappa: f64,
    pub sigma_v2: f64,
}

impl OuOuParams {
    pub fn new(beta: f64, sigma_r2: f64, kappa: f64, sigma_v2: f64) -> Result<Self> {
        let p = Self { beta, sigma_r2, kappa, sigma_v2 };
        if [beta, sigma_r2, kappa, sigma_v2].iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return domain(format!("OU-OU parameters must be positive: {p:?}"));
        }
        Ok(p)
    }

    /// `σ_V² = 20, σ_R² = 0.625, κ = 210, β = 2.5`.
    pub fn reference() -> Self {
        Self { beta: 2.5, sigma_r2: 0.625, kappa: 210.0, sigma_v2: 20.0 }
    }

    /// Stationary variance of `V` under the continuous-time dynamics.
    pub fn stationary_variance(&self) -> f64 {
        self.sigma_v2 / (2.0 * self.kappa)
            + self.sigma_r2 / (2.0 * self.beta) * self.kappa / (self.kappa + self.beta)
    }
}

/// OU-OU path of `V` started from `R_0 = V_0 = 0`. `R` is stepped exactly;
/// `V` takes the exact conditional step with `R` frozen at the left endpoint.
pub fn simulate_ou_ou<R: Rng + ?Sized>(params: &OuOuParams, grid: Grid, rng: &mut R) -> StatePath {
    simulate_ou_ou_from(params, grid, 0.0, 0.0, rng)
}

pub(crate) fn simulate_ou_ou_from<R: Rng + ?Sized>(
    params: &OuOuParams,
    grid: Grid,
    r0: f64,
    v0: f64,
    rng: &mut R,
) -> StatePath {
    let dt = grid.delta();
    let r_decay = (-params.beta * dt).exp();
    let r_sd = (params.sigma_r2 * -(-2.0 * params.beta * dt).exp_m1() / (2.0 * params.beta)).sqrt();
    let v_decay = (-params.kappa * dt).exp();
    let v_sd = (params.sigma_v2 * -(-2.0 * params.kappa * dt).exp_m1() / (2.0 * params.kappa)).sqrt();
    let (mut r, mut v) = (r0, v0);
    let mut values = Vec::with_capacity(grid.steps() + 1);
    values.push(v);
    for _ in 0..grid.steps() {
        let e_r: f64 = rng.sample(StandardNormal);
        let e_v: f64 = rng.sample(StandardNormal);
        v = r + (v - r) * v_decay + v_sd * e_v;
        r = r * r_decay + r_sd * e_r;
        values.push(v);
    }
    StatePath { grid, values }
}
