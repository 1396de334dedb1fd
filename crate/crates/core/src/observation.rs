//! Cox-process observation model: intensity maps, per-bin Poisson counts,
//! compound-Poisson prices, the Poisson log-likelihood, and the empirical
//! diffusion-limit check.

use crate::error::{domain, Error, Result};
use crate::hurst::HurstIndex;
use crate::kernel::OUBankSpec;
use crate::paths::{simulate_liouville, Grid, StatePath};
use crate::rng::{Domain, SeedTree};
use rand::Rng;
use rand_distr::{Distribution, Poisson};
use statrs::function::gamma::ln_gamma;

/// Upper bound applied to `b e^x` before it is used anywhere.
pub const INTENSITY_CEILING: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IntensityKind {
    /// `b e^x`
    Exp,
    /// `b x²`
    Square,
}

impl IntensityKind {
    pub fn name(self) -> &'static str {
        match self {
            IntensityKind::Exp => "exp",
            IntensityKind::Square => "square",
        }
    }

    /// The part of the state the intensity can see: `x` itself for `exp`,
    /// `|x|` for `square`, whose likelihood is even in `x`. Posterior
    /// summaries and error metrics are reported on this scale.
    pub fn identified(self, x: f64) -> f64 {
        match self {
            IntensityKind::Exp => x,
            IntensityKind::Square => x.abs(),
        }
    }
}

impl std::str::FromStr for IntensityKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exp" => Ok(IntensityKind::Exp),
            "square" => Ok(IntensityKind::Square),
            other => domain(format!("unknown intensity kind '{other}' (expected exp|square)")),
        }
    }
}

/// Intensity map `x ↦ λ(x)` with scale `b` (events per unit time).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntensitySpec {
    kind: IntensityKind,
    b: f64,
}

impl IntensitySpec {
    /// `b = 0` is accepted and yields an empty point process.
    pub fn new(kind: IntensityKind, b: f64) -> Result<Self> {
        if !(b >= 0.0 && b.is_finite()) {
            return domain(format!("intensity scale b must be finite and non-negative, got {b}"));
        }
        Ok(Self { kind, b })
    }

    pub fn kind(&self) -> IntensityKind {
        self.kind
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    /// `λ(x)` and whether the ceiling was hit.
    #[inline]
    pub fn rate_checked(&self, x: f64) -> (f64, bool) {
        let raw = match self.kind {
            IntensityKind::Exp => self.b * x.exp(),
            IntensityKind::Square => self.b * x * x,
        };
        if raw > INTENSITY_CEILING || raw.is_nan() {
            (INTENSITY_CEILING, true)
        } else {
            (raw, false)
        }
    }

    #[inline]
    pub fn rate(&self, x: f64) -> f64 {
        self.rate_checked(x).0
    }
}

/// `λ(x)` for the given spec.
pub fn intensity(x: f64, spec: &IntensitySpec) -> f64 {
    spec.rate(x)
}

/// Event counts `y_n = D_{t_n} - D_{t_{n-1}}`, `n = 1..=N`, on a grid of step `delta`.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationSeries {
    delta: f64,
    counts: Vec<u64>,
    total: u64,
}

impl ObservationSeries {
    pub fn new(delta: f64, counts: Vec<u64>) -> Result<Self> {
        if !(delta > 0.0 && delta.is_finite()) {
            return domain(format!("time step must be positive, got {delta}"));
        }
        let total = counts.iter().sum();
        Ok(Self { delta, counts, total })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.delta, self.counts.len())
    }
}

/// Draws `y_n ~ Pois(λ(x_{n-1}) Δ)` independently given the path; the count in
/// bin `n` depends on the state at the left endpoint `t_{n-1}` only.
pub fn sample_counts<R: Rng + ?Sized>(path: &StatePath, spec: &IntensitySpec, rng: &mut R) -> ObservationSeries {
    let delta = path.grid().delta();
    let values = path.values();
    let counts = values[..values.len() - 1]
        .iter()
        .map(|&x| poisson(spec.rate(x) * delta, rng))
        .collect();
    ObservationSeries::new(delta, counts).expect("grid step validated")
}

pub(crate) fn poisson<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    let draw: f64 = Poisson::new(mean).expect("finite positive mean").sample(rng);
    draw as u64
}

/// Compound-Poisson price `S = s0 + Σ ν_i` with jumps `±σ` of equal probability.
#[derive(Debug, Clone, PartialEq)]
pub struct PricePath {
    s0: f64,
    sigma2: f64,
    jumps: Vec<f64>,
    prices: Vec<f64>,
    bin_ends: Vec<usize>,
}

impl PricePath {
    pub fn s0(&self) -> f64 {
        self.s0
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn jumps(&self) -> &[f64] {
        &self.jumps
    }

    /// Price after each jump; `prices[0] = s0`.
    pub fn prices(&self) -> &[f64] {
        &self.prices
    }

    /// Price at the end of bin `n` (`n = 0` gives `s0`).
    pub fn price_at_bin(&self, n: usize) -> f64 {
        if n == 0 {
            self.s0
        } else {
            self.prices[self.bin_ends[n - 1]]
        }
    }

    /// `Σ ν_i²`.
    pub fn realized_quadratic_variation(&self) -> f64 {
        self.jumps.iter().map(|v| v * v).sum()
    }
}

pub fn sample_price_path<R: Rng + ?Sized>(
    counts: &ObservationSeries,
    s0: f64,
    sigma2: f64,
    rng: &mut R,
) -> Result<PricePath> {
    if !(sigma2 > 0.0 && sigma2.is_finite()) {
        return domain(format!("jump variance must be positive, got {sigma2}"));
    }
    let sigma = sigma2.sqrt();
    let mut jumps = Vec::with_capacity(counts.total() as usize);
    let mut prices = Vec::with_capacity(counts.total() as usize + 1);
    let mut bin_ends = Vec::with_capacity(counts.len());
    let mut s = s0;
    prices.push(s);
    for &y in counts.counts() {
        for _ in 0..y {
            let nu = if rng.random::<bool>() { sigma } else { -sigma };
            s += nu;
            jumps.push(nu);
            prices.push(s);
        }
        bin_ends.push(jumps.len());
    }
    Ok(PricePath { s0, sigma2, jumps, prices, bin_ends })
}

/// `ln g(y | λ) = y ln(λΔ) - λΔ - ln y!`; `-∞` when `λΔ = 0` and `y > 0`.
#[inline]
pub fn log_likelihood(y: u64, lambda: f64, delta: f64) -> f64 {
    log_likelihood_with(y, lambda * delta, ln_factorial(y))
}

/// As [`log_likelihood`] with the mean `λΔ` and `ln y!` precomputed.
#[inline]
pub fn log_likelihood_with(y: u64, mean: f64, ln_fact: f64) -> f64 {
    if y == 0 {
        return -mean;
    }
    if mean <= 0.0 {
        return f64::NEG_INFINITY;
    }
    y as f64 * mean.ln() - mean - ln_fact
}

pub fn ln_factorial(y: u64) -> f64 {
    if y < 2 {
        0.0
    } else {
        ln_gamma(y as f64 + 1.0)
    }
}

/// One row of the diffusion-limit report.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiffusionLimitRow {
    pub b: f64,
    pub sigma2: f64,
    pub events: u64,
    pub realized_qv: f64,
    pub integrated_variance: f64,
    pub relative_gap: f64,
}

/// For each `b`, scales the jump variance to `σ̄² / b` (so `σ² λ` does not
/// depend on `b`), simulates a Liouville state path, counts and prices, and
/// compares the realized quadratic variation with the integrated variance
/// `Σ σ² λ(X_{t_{n-1}}) Δ`. The state path is common to every `b`.
pub fn diffusion_limit_report(
    h: HurstIndex,
    b_list: &[f64],
    grid: Grid,
    sigma_bar2: f64,
    seeds: SeedTree,
) -> Result<Vec<DiffusionLimitRow>> {
    if b_list.windows(2).any(|w| w[0] >= w[1]) || b_list.iter().any(|&b| !(b > 0.0)) {
        return domain("b_list must be positive and strictly increasing");
    }
    let j = crate::kernel::bank_size(grid.steps().max(2), Some(h))?;
    let spec = OUBankSpec::for_hurst(h, j)?;
    let (path, _) = simulate_liouville(&spec, grid, &mut seeds.stream(Domain::Truth, 0));
    b_list
        .iter()
        .enumerate()
        .map(|(i, &b)| {
            let ispec = IntensitySpec::new(IntensityKind::Exp, b)?;
            diffusion_limit_row(&path, &ispec, sigma_bar2 / b, seeds, i as u64)
        })
        .collect()
}

/// Quadratic-variation comparison for one state path and intensity.
pub fn diffusion_limit_row(
    path: &StatePath,
    ispec: &IntensitySpec,
    sigma2: f64,
    seeds: SeedTree,
    index: u64,
) -> Result<DiffusionLimitRow> {
    let counts = sample_counts(path, ispec, &mut seeds.stream(Domain::Observation, index));
    let prices = sample_price_path(&counts, 0.0, sigma2, &mut seeds.stream(Domain::Price, index))?;
    let delta = path.grid().delta();
    let values = path.values();
    let integrated_variance: f64 =
        values[..values.len() - 1].iter().map(|&x| sigma2 * ispec.rate(x) * delta).sum();
    let realized_qv = prices.realized_quadratic_variation();
    let relative_gap = if integrated_variance > 0.0 {
        (realized_qv - integrated_variance).abs() / integrated_variance
    } else if realized_qv == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    Ok(DiffusionLimitRow {
        b: ispec.b(),
        sigma2,
        events: counts.total(),
        realized_qv,
        integrated_variance,
        relative_gap,
    })
}
