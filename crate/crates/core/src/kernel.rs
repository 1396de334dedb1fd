//! Finite Ornstein–Uhlenbeck superposition approximating Liouville and
//! fractional Brownian motion for `H < 1/2`.
//!
//! The power kernel `u^{H-1/2}` is a Laplace transform of the measure
//! `μ(dx) = c_H x^{-H-1/2} / Γ(1/2 - H) dx`. Lumping `μ` onto the cells of a
//! geometric partition gives weights `c_j = μ(cell_j)` and speeds
//! `κ_j = ∫_cell x μ(dx) / c_j`, so that `X_t = Σ c_j Z_t^j` with
//! `Z^j` OU processes of speed `κ_j` sharing one Brownian driver.

use crate::error::{domain, Result};
use crate::hurst::HurstIndex;
use crate::quad;
use statrs::function::gamma::gamma;
use std::f64::consts::PI;

/// Smallest bank size the geometric recipe is tuned for; smaller banks are
/// allowed but flagged.
pub const RECOMMENDED_MIN_BANK: usize = 17;

/// Normalizing constant of the Mandelbrot–Van Ness representation, chosen so
/// that `E[W_t W_s] = (|t|^{2H} + |s|^{2H} - |t-s|^{2H}) / 2`.
pub fn mvn_constant(h: f64) -> Result<f64> {
    if !(h > 0.0 && h < 0.5) {
        return domain(format!("mvn_constant needs 0 < H < 1/2, got {h}"));
    }
    let num = PI * h * (2.0 * h - 1.0);
    let den = gamma(2.0 - 2.0 * h) * gamma(h + 0.5).powi(2) * (PI * (h - 0.5)).sin();
    Ok((num / den).sqrt())
}

/// Number of OU factors for a grid of `n` steps: `⌊2 N^ζ ln N⌋` with
/// `ζ = ln(1 + H)` when `H` is given and `ζ = ln 1.25` otherwise.
pub fn bank_size(n: usize, h: Option<HurstIndex>) -> Result<usize> {
    if n < 2 {
        return domain(format!("bank_size needs N >= 2, got {n}"));
    }
    let zeta = match h {
        Some(h) => (1.0 + h.value()).ln(),
        None => 1.25f64.ln(),
    };
    let nf = n as f64;
    Ok((2.0 * nf.powf(zeta) * nf.ln()).floor() as usize)
}

/// Geometric partition `ξ_0 < … < ξ_J` of a compact subset of `(0, ∞)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    edges: Vec<f64>,
    ratio: f64,
}

impl Partition {
    /// Builds `ξ_j = ξ_0 r^j`, `j = 0..=cells`.
    pub fn geometric(first: f64, ratio: f64, cells: usize) -> Result<Self> {
        if cells == 0 {
            return domain("partition needs at least one cell");
        }
        if !(first > 0.0 && first.is_finite() && ratio > 1.0 && ratio.is_finite()) {
            return domain(format!("invalid geometric partition ξ_0 = {first}, r = {ratio}"));
        }
        let (l0, lr) = (first.ln(), ratio.ln());
        let edges = (0..=cells).map(|j| (l0 + j as f64 * lr).exp()).collect();
        Ok(Self { edges, ratio })
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn ratio(&self) -> f64 {
        self.ratio
    }

    /// Number of cells `J`.
    pub fn cells(&self) -> usize {
        self.edges.len() - 1
    }

    pub fn below_recommended(&self) -> bool {
        self.cells() < RECOMMENDED_MIN_BANK
    }
}

/// Partition of `[J^{-2α}, J^{4-2α}]`, `α = H + 1/2`, into `J` geometric cells
/// of ratio `J^{4/J}`.
pub fn build_partition(h: HurstIndex, j: usize) -> Result<Partition> {
    if j == 0 {
        return domain("bank size J must be positive");
    }
    let jf = j as f64;
    let lj = jf.ln();
    let first = (-2.0 * h.alpha() * lj).exp();
    let ratio = if j == 1 {
        // J^{4/J} degenerates to 1 for J = 1; keep the closed-form endpoints.
        (4.0 * lj).exp().max(2.0)
    } else {
        (4.0 * lj / jf).exp()
    };
    Partition::geometric(first, ratio, j)
}

fn density_scale(h: HurstIndex) -> f64 {
    mvn_constant(h.value()).expect("H validated") / gamma(0.5 - h.value())
}

/// `∫_lo^hi x^{p-1} dx / p` computed as `lo^p (e^{p ln(hi/lo)} - 1) / p`.
fn power_increment(lo: f64, hi: f64, p: f64) -> f64 {
    if lo == 0.0 {
        return hi.powf(p) / p;
    }
    lo.powf(p) * (p * (hi / lo).ln()).exp_m1() / p
}

/// `μ([lo, hi])`.
pub fn mu_mass(h: HurstIndex, lo: f64, hi: f64) -> f64 {
    density_scale(h) * power_increment(lo, hi, 0.5 - h.value())
}

/// `∫_lo^hi x μ(dx)`.
pub fn mu_first_moment(h: HurstIndex, lo: f64, hi: f64) -> f64 {
    density_scale(h) * power_increment(lo, hi, 1.5 - h.value())
}

/// Density of `μ` with respect to Lebesgue measure.
pub fn mu_density(h: HurstIndex, x: f64) -> f64 {
    density_scale(h) * x.powf(-h.alpha())
}

/// Weights and speeds of the OU bank approximating the Liouville process.
#[derive(Debug, Clone, PartialEq)]
pub struct OUBankSpec {
    hurst: HurstIndex,
    coeffs: Vec<f64>,
    speeds: Vec<f64>,
    below_recommended: bool,
}

impl OUBankSpec {
    /// Bank for `H` with `j` factors on the default partition.
    pub fn for_hurst(h: HurstIndex, j: usize) -> Result<Self> {
        Ok(quadrature(h, &build_partition(h, j)?))
    }

    /// Bank from explicit weights and speeds (for tests and custom rules).
    pub fn from_parts(hurst: HurstIndex, coeffs: Vec<f64>, speeds: Vec<f64>) -> Result<Self> {
        if coeffs.len() != speeds.len() || coeffs.is_empty() {
            return domain("coefficient and speed vectors must be non-empty and of equal length");
        }
        if coeffs.iter().chain(&speeds).any(|v| !(v.is_finite() && *v > 0.0)) {
            return domain("coefficients and speeds must be positive and finite");
        }
        if speeds.windows(2).any(|w| w[0] >= w[1]) {
            return domain("speeds must be strictly increasing");
        }
        let below_recommended = coeffs.len() < RECOMMENDED_MIN_BANK;
        Ok(Self { hurst, coeffs, speeds, below_recommended })
    }

    pub fn hurst(&self) -> HurstIndex {
        self.hurst
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn speeds(&self) -> &[f64] {
        &self.speeds
    }

    /// Set when the bank is smaller than the partition recipe is tuned for.
    pub fn below_recommended(&self) -> bool {
        self.below_recommended
    }
}

/// Lumps `μ` onto the cells of `partition` using the closed-form power-law
/// antiderivatives.
pub fn quadrature(h: HurstIndex, partition: &Partition) -> OUBankSpec {
    let scale = density_scale(h);
    let (p0, p1) = (0.5 - h.value(), 1.5 - h.value());
    let mut coeffs = Vec::with_capacity(partition.cells());
    let mut speeds = Vec::with_capacity(partition.cells());
    for w in partition.edges().windows(2) {
        let mass = scale * power_increment(w[0], w[1], p0);
        let moment = scale * power_increment(w[0], w[1], p1);
        coeffs.push(mass);
        speeds.push(moment / mass);
    }
    OUBankSpec {
        hurst: h,
        coeffs,
        speeds,
        below_recommended: partition.below_recommended(),
    }
}

fn check_times(s: f64, t: f64) -> Result<()> {
    if !(s >= 0.0 && t >= 0.0 && s.is_finite() && t.is_finite()) {
        return domain(format!("times must be finite and non-negative, got ({s}, {t})"));
    }
    Ok(())
}

/// `Cov(X_s, X_t)` for `X = Σ c_j Z^j` with zero-started OU factors.
pub fn approx_covariance(s: f64, t: f64, spec: &OUBankSpec) -> Result<f64> {
    check_times(s, t)?;
    let m = s.min(t);
    let mut acc = 0.0;
    for (&ci, &ki) in spec.coeffs.iter().zip(&spec.speeds) {
        for (&cj, &kj) in spec.coeffs.iter().zip(&spec.speeds) {
            let k = ki + kj;
            // e^{-κ_i t - κ_j s}(e^{k m} - 1) rewritten to avoid overflow
            let lag = (-ki * (t - m) - kj * (s - m)).exp();
            acc += ci * cj * lag * -(-k * m).exp_m1() / k;
        }
    }
    Ok(acc)
}

/// Variance of the initial-condition term `Σ c_j (e^{-κ_j t} - 1) Q_0^j`
/// that turns the Liouville approximation into the fBM approximation. `Q_0`
/// is independent of the bank noise, so this adds to `approx_covariance(t, t)`.
pub fn q0_memory_variance(t: f64, spec: &OUBankSpec) -> Result<f64> {
    check_times(t, t)?;
    let e: Vec<f64> = spec.speeds.iter().map(|&k| (-k * t).exp_m1()).collect();
    let mut acc = 0.0;
    for i in 0..spec.len() {
        for j in 0..spec.len() {
            acc += spec.coeffs[i] * spec.coeffs[j] * e[i] * e[j] / (spec.speeds[i] + spec.speeds[j]);
        }
    }
    Ok(acc)
}

/// `Cov(V_s, V_t) = c_H² ∫_0^{s∧t} (t-u)^{H-1/2} (s-u)^{H-1/2} du` of the
/// Liouville process, by adaptive quadrature.
pub fn liouville_covariance(s: f64, t: f64, h: HurstIndex) -> Result<f64> {
    liouville_covariance_tol(s, t, h, 1e-13)
}

/// As [`liouville_covariance`] with an explicit relative tolerance.
pub fn liouville_covariance_tol(s: f64, t: f64, h: HurstIndex, rel_tol: f64) -> Result<f64> {
    check_times(s, t)?;
    let m = s.min(t);
    if m == 0.0 {
        return Ok(0.0);
    }
    let ch = mvn_constant(h.value())?;
    let a = h.value() - 0.5;
    let d = (t - s).abs();
    // With w = m - u = v^p, p = 1/(2H), the integrand w^a (w+d)^a dw becomes
    // p v^{p(a+1)-1} (v^p + d)^a dv, bounded by p on [0, m^{2H}].
    let p = 1.0 / (2.0 * h.value());
    let upper = m.powf(2.0 * h.value());
    let f = |v: f64| {
        let w = v.powf(p);
        p * v.powf(p * (a + 1.0) - 1.0) * (w + d).powf(a)
    };
    let q = quad::integrate(f, 0.0, upper, 0.0, rel_tol);
    Ok(ch * ch * q.value)
}

/// `E[W_s W_t]` of fractional Brownian motion; valid for `0 < H ≤ 1`.
pub fn fbm_covariance(s: f64, t: f64, h: f64) -> f64 {
    let e = 2.0 * h;
    0.5 * (s.abs().powf(e) + t.abs().powf(e) - (t - s).abs().powf(e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn h(v: f64) -> HurstIndex {
        HurstIndex::new(v).unwrap()
    }

    #[test]
    fn mvn_constant_values() {
        // Reference computed with an independent high-precision gamma evaluation.
        assert!((mvn_constant(0.25).unwrap() - 0.645_998_003_740_751_9).abs() < 1e-12);
        assert!((mvn_constant(0.4999).unwrap() - 1.0).abs() < 1e-3);
        for v in [0.1, 0.4] {
            let c = mvn_constant(v).unwrap();
            assert!(c.is_finite() && c > 0.0);
        }
        assert!(mvn_constant(0.0).is_err());
        assert!(mvn_constant(0.5).is_err());
        assert!(mvn_constant(-0.1).is_err());
    }

    #[test]
    fn mvn_constant_is_continuous_on_box() {
        let mut prev = mvn_constant(0.01).unwrap();
        for i in 1..=480 {
            let c = mvn_constant(0.01 + i as f64 * 0.001).unwrap();
            assert!(c.is_finite());
            assert!((c - prev).abs() < 1e-2);
            prev = c;
        }
    }

    #[test]
    fn bank_sizes_reported_values() {
        assert_eq!(bank_size(960, Some(h(0.1))).unwrap(), 26);
        assert_eq!(bank_size(960, Some(h(0.4))).unwrap(), 138);
        assert_eq!(bank_size(960, Some(h(0.3))).unwrap(), 83);
        assert_eq!(bank_size(960, None).unwrap(), 63);
        assert_eq!(bank_size(2400, None).unwrap(), 88);
        assert_eq!(bank_size(1200, None).unwrap(), 68);
        assert_eq!(bank_size(4800, None).unwrap(), 112);
        assert!(bank_size(1, None).is_err());
    }

    #[test]
    fn bank_size_monotone() {
        for n in 2..3000 {
            assert!(bank_size(n + 1, None).unwrap() >= bank_size(n, None).unwrap());
        }
        let mut prev = 0;
        for i in 1..49 {
            let j = bank_size(960, Some(h(i as f64 * 0.01))).unwrap();
            assert!(j >= prev);
            prev = j;
        }
    }

    #[test]
    fn partition_closed_form() {
        let p = build_partition(h(0.1), 26).unwrap();
        assert_eq!(p.cells(), 26);
        assert!((p.edges()[0] - 26f64.powf(-1.2)).abs() < 1e-15);
        assert!((p.edges()[0] - 0.0200).abs() < 5e-5);
        let last = p.edges()[26];
        assert!((last / 26f64.powf(2.8) - 1.0).abs() < 1e-12);
        assert!((last - 9.16e3).abs() < 5.0);
        assert!((p.ratio() - 1.6508).abs() < 5e-5);
        for w in p.edges().windows(2) {
            assert!((w[1] / w[0] / p.ratio() - 1.0).abs() < 1e-12);
        }
        assert!(!p.below_recommended());
    }

    #[test]
    fn partition_start_shrinks_with_h() {
        let lo = build_partition(h(0.1), 30).unwrap();
        let hi = build_partition(h(0.4), 30).unwrap();
        assert!(hi.edges()[0] < lo.edges()[0]);
        assert!(build_partition(h(0.1), 0).is_err());
        assert!(build_partition(h(0.1), 8).unwrap().below_recommended());
    }

    #[test]
    fn speeds_lie_in_their_cells() {
        for (v, j) in [(0.05, 19), (0.1, 26), (0.25, 63), (0.45, 176), (0.2, 5)] {
            let p = build_partition(h(v), j).unwrap();
            let spec = quadrature(h(v), &p);
            for (i, &k) in spec.speeds().iter().enumerate() {
                assert!(p.edges()[i] < k && k < p.edges()[i + 1]);
            }
            assert!(spec.speeds().windows(2).all(|w| w[0] < w[1]));
            assert!(spec.coeffs().iter().all(|&c| c > 0.0));
        }
    }

    #[test]
    fn masses_add_under_refinement() {
        let hv = h(0.3);
        let p = build_partition(hv, 20).unwrap();
        let spec = quadrature(hv, &p);
        for (i, w) in p.edges().windows(2).enumerate() {
            let subs = 7;
            let step = (w[1] / w[0]).powf(1.0 / subs as f64);
            let mut sum = 0.0;
            let mut moment = 0.0;
            for s in 0..subs {
                let a = w[0] * step.powi(s);
                let b = if s + 1 == subs { w[1] } else { w[0] * step.powi(s + 1) };
                sum += mu_mass(hv, a, b);
                moment += mu_first_moment(hv, a, b);
            }
            assert!((sum / spec.coeffs()[i] - 1.0).abs() < 1e-12);
            assert!((moment / sum / spec.speeds()[i] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn single_cell_matches_numerical_integration() {
        let hv = h(0.25);
        let p = Partition::geometric(1.0, 2.0, 1).unwrap();
        let spec = quadrature(hv, &p);
        let mass = quad::integrate(|x| mu_density(hv, x), 1.0, 2.0, 1e-15, 1e-14).value;
        let moment = quad::integrate(|x| x * mu_density(hv, x), 1.0, 2.0, 1e-15, 1e-14).value;
        assert!((spec.coeffs()[0] - mass).abs() < 1e-10);
        assert!((spec.speeds()[0] - moment / mass).abs() < 1e-10);
    }

    #[test]
    fn approx_covariance_basics() {
        let spec = OUBankSpec::for_hurst(h(0.2), 30).unwrap();
        assert_eq!(approx_covariance(0.0, 0.0, &spec).unwrap(), 0.0);
        assert!(approx_covariance(-1.0, 0.5, &spec).is_err());
        let single = OUBankSpec::from_parts(h(0.2), vec![1.3], vec![0.7]).unwrap();
        let t: f64 = 0.8;
        let expected = 1.3f64.powi(2) * (1.0 - (-2.0 * 0.7 * t).exp()) / (2.0 * 0.7);
        assert!((approx_covariance(t, t, &single).unwrap() - expected).abs() < 1e-14);
        let a = approx_covariance(0.3, 0.9, &spec).unwrap();
        let b = approx_covariance(0.9, 0.3, &spec).unwrap();
        assert!((a - b).abs() < 1e-14);
    }

    #[test]
    fn liouville_variance_closed_form() {
        for v in [0.05, 0.1, 0.25, 0.4, 0.49] {
            let hv = h(v);
            let ch = mvn_constant(v).unwrap();
            for t in [0.1, 0.5, 1.0, 3.0] {
                let q = liouville_covariance(t, t, hv).unwrap();
                let exact = ch * ch * t.powf(2.0 * v) / (2.0 * v);
                assert!((q / exact - 1.0).abs() < 1e-10, "H={v} t={t}: {q} vs {exact}");
            }
        }
        assert_eq!(liouville_covariance(0.0, 1.0, h(0.2)).unwrap(), 0.0);
        assert_eq!(liouville_covariance(1.0, 0.0, h(0.2)).unwrap(), 0.0);
    }

    #[test]
    fn liouville_quadrature_is_converged() {
        let hv = h(0.1);
        let coarse = liouville_covariance_tol(0.5, 1.0, hv, 1e-10).unwrap();
        let fine = liouville_covariance_tol(0.5, 1.0, hv, 5e-11).unwrap();
        assert!((coarse / fine - 1.0).abs() < 1e-8);
        // symmetric in its arguments
        let swapped = liouville_covariance_tol(1.0, 0.5, hv, 1e-10).unwrap();
        assert!((coarse - swapped).abs() < 1e-14);
    }

    #[test]
    fn fbm_covariance_at_half_is_brownian() {
        for (s, t) in [(0.2, 0.7), (1.0, 0.4), (0.5, 0.5)] {
            assert!((fbm_covariance(s, t, 0.5) - f64::min(s, t)).abs() < 1e-15);
        }
    }
}
