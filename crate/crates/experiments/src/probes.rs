//! Batch runs of the diffusion-limit and filter-continuity probes.

use crate::error::ExpResult;
use rayon::prelude::*;
use roughvol::filter::{continuity_probe, ContinuityConfig, ContinuityRow, DEFAULT_PRIOR_SD};
use roughvol::io::fmt_f64;
use roughvol::kernel::bank_size;
use roughvol::observation::{diffusion_limit_report, sample_counts, DiffusionLimitRow};
use roughvol::paths::simulate_liouville;
use roughvol::{Domain, Grid, HurstIndex, IntensityKind, IntensitySpec, OUBankSpec, ParamBox, SeedTree};
use std::fmt::Write as _;

pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[derive(Debug, Clone)]
pub struct DiffusionProbe {
    pub hurst: f64,
    pub b_list: Vec<f64>,
    pub steps: usize,
    pub sigma_bar2: f64,
    pub seeds: Vec<u64>,
}

impl Default for DiffusionProbe {
    fn default() -> Self {
        Self { hurst: 0.1, b_list: vec![1e3, 1e4, 1e5], steps: 960, sigma_bar2: 1.0, seeds: (1..=50).collect() }
    }
}

impl DiffusionProbe {
    /// Rows per seed, in seed order.
    pub fn run(&self) -> ExpResult<Vec<(u64, Vec<DiffusionLimitRow>)>> {
        let h = HurstIndex::new(self.hurst)?;
        let grid = Grid::new(1.0 / self.steps as f64, self.steps)?;
        self.seeds
            .par_iter()
            .map(|&s| Ok((s, diffusion_limit_report(h, &self.b_list, grid, self.sigma_bar2, SeedTree::new(s))?)))
            .collect()
    }

    /// Median relative gap for every `b`.
    pub fn median_gaps(rows: &[(u64, Vec<DiffusionLimitRow>)]) -> Vec<f64> {
        let nb = rows.first().map_or(0, |r| r.1.len());
        (0..nb).map(|i| median(&rows.iter().map(|r| r.1[i].relative_gap).collect::<Vec<_>>())).collect()
    }

    pub fn csv(rows: &[(u64, Vec<DiffusionLimitRow>)]) -> String {
        let mut s = String::from("seed,b,sigma2,events,realized_qv,integrated_variance,relative_gap\n");
        for (seed, rs) in rows {
            for r in rs {
                writeln!(
                    s,
                    "{seed},{},{},{},{},{},{}",
                    fmt_f64(r.b),
                    fmt_f64(r.sigma2),
                    r.events,
                    fmt_f64(r.realized_qv),
                    fmt_f64(r.integrated_variance),
                    fmt_f64(r.relative_gap)
                )
                .unwrap();
            }
        }
        s
    }
}

#[derive(Debug, Clone)]
pub struct ContinuityProbe {
    pub hurst: f64,
    /// Includes `0` so the exact-coupling check is part of every run.
    pub deltas: Vec<f64>,
    pub b: f64,
    pub steps: usize,
    pub particles: usize,
    pub seeds: Vec<u64>,
}

impl Default for ContinuityProbe {
    fn default() -> Self {
        Self {
            hurst: 0.2,
            deltas: vec![0.0, 0.1, 0.05, 0.025, 0.0125],
            b: 8000.0,
            steps: 240,
            particles: 300,
            seeds: (1..=20).collect(),
        }
    }
}

impl ContinuityProbe {
    /// Data from a Liouville path at `hurst`; the filter bank size is the
    /// `H`-free `J(N)` so every shifted run has the same dimension.
    pub fn run(&self) -> ExpResult<Vec<(u64, Vec<ContinuityRow>)>> {
        let h = HurstIndex::new(self.hurst)?;
        let grid = Grid::new(1.0 / self.steps as f64, self.steps)?;
        let ispec = IntensitySpec::new(IntensityKind::Exp, self.b)?;
        let truth_spec = OUBankSpec::for_hurst(h, bank_size(self.steps, Some(h))?)?;
        let cfg = ContinuityConfig {
            particles: self.particles,
            bank_size: bank_size(self.steps, None)?,
            prior_sd: DEFAULT_PRIOR_SD,
            param_box: ParamBox::default(),
        };
        self.seeds
            .par_iter()
            .map(|&s| {
                let seeds = SeedTree::new(s);
                let (path, _) = simulate_liouville(&truth_spec, grid, &mut seeds.stream(Domain::Truth, 0));
                let obs = sample_counts(&path, &ispec, &mut seeds.stream(Domain::Observation, 0));
                Ok((s, continuity_probe(h, &self.deltas, &obs, &ispec, &cfg, seeds.child(1))?))
            })
            .collect()
    }

    /// Median `D(δ)` for every `δ`.
    pub fn median_discrepancy(rows: &[(u64, Vec<ContinuityRow>)]) -> Vec<f64> {
        let nd = rows.first().map_or(0, |r| r.1.len());
        (0..nd).map(|i| median(&rows.iter().map(|r| r.1[i].d_max()).collect::<Vec<_>>())).collect()
    }

    pub fn csv(rows: &[(u64, Vec<ContinuityRow>)]) -> String {
        let mut s = String::from("seed,delta,d_tanh,d_gauss,d_max,skipped\n");
        for (seed, rs) in rows {
            for r in rs {
                writeln!(
                    s,
                    "{seed},{},{},{},{},{}",
                    fmt_f64(r.delta),
                    fmt_f64(r.d_tanh),
                    fmt_f64(r.d_gauss),
                    fmt_f64(r.d_max()),
                    r.skipped
                )
                .unwrap();
            }
        }
        s
    }
}

/// `key,value` table of medians.
pub fn medians_csv(key: &str, keys: &[f64], medians: &[f64]) -> String {
    let mut s = format!("{key},median\n");
    for (k, m) in keys.iter().zip(medians) {
        writeln!(s, "{},{}", fmt_f64(*k), fmt_f64(*m)).unwrap();
    }
    s
}

/// Number of strict decreases between consecutive entries.
pub fn decreases(xs: &[f64]) -> usize {
    xs.windows(2).filter(|w| w[1] < w[0]).count()
}
