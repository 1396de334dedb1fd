//! End-to-end pipelines: simulate the truth, draw counts, filter, score.

use crate::config::{ScenarioConfig, Variant};
use crate::error::{ExpError, ExpResult};
use crate::output::{write_file, OutputDir};
use crate::plotdata::emit_plotdata;
use rayon::prelude::*;
use roughvol::filter::{
    run_bootstrap, run_nested, BankRule, BootstrapConfig, JitterKernel, NestedConfig, NestedRun, PosteriorSummary,
};
use roughvol::io::{
    fmt_f64, write_observations_csv, write_path_csv, write_posterior_csv, write_theta_csv, ObservationMeta, StateModel,
};
use roughvol::observation::sample_counts;
use roughvol::paths::{simulate_abs_bm, simulate_fbm, simulate_liouville, simulate_ou_ou, OuOuParams};
use roughvol::{Domain, IntensitySpec, OUBankSpec, OUBankState, ObservationSeries, SeedTree, StatePath};
use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

/// Simulated truth and its observations for one seed.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub path: StatePath,
    /// OU factors of the truth, for the bank-driven models.
    pub bank: Option<Vec<OUBankState>>,
    pub obs: ObservationSeries,
    pub meta: ObservationMeta,
}

/// Truth from `Truth/0`, counts from `Observation/0`. The Liouville and fBM
/// truths use the bank size chosen by `cfg.truth_bank`.
pub fn simulate_dataset(cfg: &ScenarioConfig, v: &Variant, seed: u64) -> ExpResult<Dataset> {
    let seeds = SeedTree::new(seed);
    let mut rng = seeds.stream(Domain::Truth, 0);
    let (path, bank) = match cfg.model {
        StateModel::Liouville | StateModel::Fbm => {
            let h = v.hurst.expect("validated");
            let spec = OUBankSpec::for_hurst(h, cfg.truth_bank_size(v)?)?;
            if cfg.model == StateModel::Liouville {
                let (p, b) = simulate_liouville(&spec, v.grid, &mut rng);
                (p, Some(b))
            } else {
                (simulate_fbm(&spec, v.grid, &mut rng)?, None)
            }
        }
        StateModel::AbsBm => (simulate_abs_bm(v.grid, &mut rng), None),
        StateModel::OuOu => (simulate_ou_ou(&cfg.ouou.unwrap_or_else(OuOuParams::reference), v.grid, &mut rng), None),
    };
    let ispec = IntensitySpec::new(cfg.intensity, v.b)?;
    let obs = sample_counts(&path, &ispec, &mut seeds.stream(Domain::Observation, 0));
    let meta = ObservationMeta {
        delta: v.delta,
        horizon: cfg.horizon,
        b: v.b,
        kind: cfg.intensity,
        seed,
        model: cfg.model,
        hurst: v.hurst.map(|h| h.value()),
    };
    Ok(Dataset { path, bank, obs, meta })
}

/// Accuracy of a state posterior against the truth, on the identified scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateMetrics {
    pub rmse: f64,
    /// RMSE of the predictor that is identically zero.
    pub zero_rmse: f64,
    /// Fraction of steps whose `[q01, q99]` band covers the truth.
    pub coverage: f64,
    /// Mean band width `q99 - q01`.
    pub band_width: f64,
}

impl StateMetrics {
    /// `truth[n-1]` is compared with summary `n`.
    pub fn score(truth: &[f64], summaries: &[PosteriorSummary]) -> Self {
        let n = summaries.len().max(1) as f64;
        let (mut se, mut se0, mut cover, mut width) = (0.0, 0.0, 0usize, 0.0);
        for (x, s) in truth.iter().zip(summaries) {
            se += (x - s.state_mean).powi(2);
            se0 += x * x;
            cover += (s.state_q01 <= *x && *x <= s.state_q99) as usize;
            width += s.state_q99 - s.state_q01;
        }
        Self { rmse: (se / n).sqrt(), zero_rmse: (se0 / n).sqrt(), coverage: cover as f64 / n, band_width: width / n }
    }
}

#[derive(Debug, Clone)]
pub struct RunMetrics {
    pub seed: u64,
    pub events: u64,
    /// Truth at `t_0..t_{N-1}` on the identified scale.
    pub truth: Vec<f64>,
    pub bootstrap: Option<Vec<PosteriorSummary>>,
    pub bootstrap_state: Option<StateMetrics>,
    pub nested: Option<NestedRun>,
    pub nested_state: Option<StateMetrics>,
    /// `|Ĥ_n - H| / H` per step (nested filter with known truth).
    pub rel_error: Vec<f64>,
    pub clamped: usize,
    /// Not written to any output file, which must be reproducible.
    pub wall_seconds: f64,
}

impl RunMetrics {
    pub fn final_h_mean(&self) -> Option<f64> {
        self.nested.as_ref().and_then(|r| r.summaries.last()).and_then(|s| s.hurst).map(|h| h.mean)
    }

    pub fn final_h_sd(&self) -> Option<f64> {
        let thetas = &self.nested.as_ref()?.final_thetas;
        let n = thetas.len() as f64;
        let mean = thetas.iter().sum::<f64>() / n;
        Some((thetas.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / n).sqrt())
    }

    /// Bootstrap state metrics if that filter ran, else the nested ones.
    pub fn state(&self) -> Option<StateMetrics> {
        self.bootstrap_state.or(self.nested_state)
    }
}

/// Runs the configured filters on one data set.
pub fn filter_dataset(cfg: &ScenarioConfig, v: &Variant, data: &Dataset) -> ExpResult<RunMetrics> {
    let start = Instant::now();
    let seeds = SeedTree::new(data.meta.seed);
    let ispec = IntensitySpec::new(cfg.intensity, v.b)?;
    let truth: Vec<f64> = data.path.values()[..v.steps()].iter().map(|&x| cfg.intensity.identified(x)).collect();
    let mut clamped = 0;

    let bootstrap = if cfg.filter.bootstrap() {
        let h = v.hurst.expect("validated");
        let bc = BootstrapConfig { particles: cfg.particles, prior_sd: cfg.prior_sd, bank: BankRule::HurstDependent };
        let run = run_bootstrap(&data.obs, h, &ispec, &bc, seeds.child(1))?;
        clamped += run.clamped;
        Some(run.summaries)
    } else {
        None
    };
    let nested = if cfg.filter.nested() {
        let nc = NestedConfig {
            param_box: cfg.param_box,
            prior_sd: cfg.prior_sd,
            jitter: JitterKernel { refresh_prob: cfg.jitter_refresh, ..JitterKernel::default() },
            ..NestedConfig::new(cfg.outer.expect("validated"), cfg.particles, cfg.nested_bank(v)?, ispec)
        };
        let run = run_nested(&data.obs, &nc, seeds.child(2))?;
        clamped += run.clamped;
        Some(run)
    } else {
        None
    };
    let rel_error = match (&nested, v.hurst) {
        (Some(run), Some(h)) => {
            run.summaries.iter().map(|s| (s.hurst.expect("nested").mean - h.value()).abs() / h.value()).collect()
        }
        _ => Vec::new(),
    };
    Ok(RunMetrics {
        seed: data.meta.seed,
        events: data.obs.total(),
        bootstrap_state: bootstrap.as_ref().map(|s| StateMetrics::score(&truth, s)),
        nested_state: nested.as_ref().map(|r| StateMetrics::score(&truth, &r.summaries)),
        truth,
        bootstrap,
        nested,
        rel_error,
        clamped,
        wall_seconds: start.elapsed().as_secs_f64(),
    })
}

/// Simulate and filter one seed without touching the disk.
pub fn run_seed(cfg: &ScenarioConfig, v: &Variant, seed: u64) -> ExpResult<(Dataset, RunMetrics)> {
    let data = simulate_dataset(cfg, v, seed)?;
    let metrics = filter_dataset(cfg, v, &data)?;
    Ok((data, metrics))
}

#[derive(Debug, Clone)]
pub struct VariantResult {
    pub variant: Variant,
    pub runs: Vec<RunMetrics>,
}

impl VariantResult {
    /// Mean relative error across seeds at every step.
    pub fn mean_relative_error(&self) -> Vec<f64> {
        mean_series(self.runs.iter().map(|r| r.rel_error.as_slice()))
    }
}

pub fn mean_series<'a>(series: impl Iterator<Item = &'a [f64]>) -> Vec<f64> {
    let mut sum: Vec<f64> = Vec::new();
    let mut count = 0usize;
    for s in series {
        if s.is_empty() {
            continue;
        }
        if sum.is_empty() {
            sum = vec![0.0; s.len()];
        }
        for (a, x) in sum.iter_mut().zip(s) {
            *a += x;
        }
        count += 1;
    }
    sum.iter().map(|a| a / count as f64).collect()
}

#[derive(Debug, Clone)]
pub struct ScenarioResult {
    pub variants: Vec<VariantResult>,
}

/// Runs every variant and seed in memory. Seeds run in parallel; the
/// results are in seed order.
pub fn run_in_memory(cfg: &ScenarioConfig) -> ExpResult<ScenarioResult> {
    run_with(cfg, |_, _, _| Ok(()))
}

fn run_with(
    cfg: &ScenarioConfig,
    sink: impl Fn(&Variant, &Dataset, &RunMetrics) -> ExpResult<()> + Sync,
) -> ExpResult<ScenarioResult> {
    cfg.validate()?;
    let variants = cfg
        .variants()?
        .into_iter()
        .map(|v| {
            let runs = cfg
                .seeds
                .par_iter()
                .map(|&seed| {
                    let (data, metrics) = run_seed(cfg, &v, seed)?;
                    sink(&v, &data, &metrics)?;
                    Ok(metrics)
                })
                .collect::<ExpResult<Vec<_>>>()?;
            Ok(VariantResult { variant: v, runs })
        })
        .collect::<ExpResult<Vec<_>>>()?;
    Ok(ScenarioResult { variants })
}

/// Runs the scenario and writes every artifact under `outdir`. Output is
/// staged in a sibling `.partial` directory and moved into place only when
/// everything succeeded.
pub fn run_scenario(cfg: &ScenarioConfig, outdir: &Path, force: bool) -> ExpResult<ScenarioResult> {
    let out = OutputDir::stage(outdir, force)?;
    let root = out.staging().to_path_buf();
    let result = (|| {
        write_file(&root.join("config.txt"), cfg.render().as_bytes())?;
        let result = run_with(cfg, |v, data, m| write_seed(cfg, &root.join(v.label()), data, m))?;
        for vr in &result.variants {
            let dir = root.join(vr.variant.label());
            write_summary(&dir, &vr.runs)?;
            emit_plotdata(&vr.runs, &cfg.param_box, &dir)?;
        }
        Ok(result)
    })();
    match result {
        Ok(r) => {
            out.commit()?;
            Ok(r)
        }
        Err(e) => {
            out.abandon();
            Err(e)
        }
    }
}

pub fn seed_dir(variant_dir: &Path, seed: u64) -> std::path::PathBuf {
    variant_dir.join(format!("seed_{seed:03}"))
}

fn csv<F: FnOnce(&mut Vec<u8>) -> roughvol::Result<()>>(f: F) -> ExpResult<Vec<u8>> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(buf)
}

/// Writes truth, observations, posteriors and metrics of one seed.
pub fn write_seed(cfg: &ScenarioConfig, variant_dir: &Path, data: &Dataset, m: &RunMetrics) -> ExpResult<()> {
    let dir = seed_dir(variant_dir, m.seed);
    std::fs::create_dir_all(&dir).map_err(|e| ExpError::io(&dir, e))?;
    let bank = if cfg.export_bank { data.bank.as_deref() } else { None };
    write_file(&dir.join("truth.csv"), &csv(|b| write_path_csv(b, &data.path, bank))?)?;
    write_file(&dir.join("obs.csv"), &csv(|b| write_observations_csv(b, &data.obs))?)?;
    write_file(&dir.join("obs.meta"), data.meta.render().as_bytes())?;
    if let Some(s) = &m.bootstrap {
        write_file(&dir.join("bootstrap.csv"), &csv(|b| write_posterior_csv(b, s, false))?)?;
    }
    if let Some(r) = &m.nested {
        write_file(&dir.join("nested.csv"), &csv(|b| write_posterior_csv(b, &r.summaries, true))?)?;
        write_file(&dir.join("theta.csv"), &csv(|b| write_theta_csv(b, &r.final_thetas))?)?;
    }
    write_file(&dir.join("metrics.csv"), metrics_csv(m).as_bytes())
}

fn metrics_csv(m: &RunMetrics) -> String {
    let mut s = String::from("metric,value\n");
    let mut row = |k: &str, v: String| writeln!(s, "{k},{v}").unwrap();
    row("seed", m.seed.to_string());
    row("events", m.events.to_string());
    row("clamped", m.clamped.to_string());
    for (prefix, st) in [("bootstrap", m.bootstrap_state), ("nested", m.nested_state)] {
        if let Some(st) = st {
            row(&format!("{prefix}_state_rmse"), fmt_f64(st.rmse));
            row(&format!("{prefix}_zero_rmse"), fmt_f64(st.zero_rmse));
            row(&format!("{prefix}_coverage"), fmt_f64(st.coverage));
            row(&format!("{prefix}_band_width"), fmt_f64(st.band_width));
        }
    }
    if let Some(h) = m.final_h_mean() {
        row("h_final_mean", fmt_f64(h));
        row("h_final_sd", fmt_f64(m.final_h_sd().unwrap_or(f64::NAN)));
    }
    if let Some(e) = m.rel_error.last() {
        row("h_final_rel_error", fmt_f64(*e));
    }
    s
}

/// One row per seed: the headline numbers of `metrics.csv`.
pub fn write_summary(dir: &Path, runs: &[RunMetrics]) -> ExpResult<()> {
    let mut s = String::from("seed,events,state_rmse,zero_rmse,coverage,band_width,h_final_mean,h_final_sd\n");
    let opt = |x: Option<f64>| x.map(fmt_f64).unwrap_or_default();
    for m in runs {
        let st = m.state();
        writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            m.seed,
            m.events,
            opt(st.map(|x| x.rmse)),
            opt(st.map(|x| x.zero_rmse)),
            opt(st.map(|x| x.coverage)),
            opt(st.map(|x| x.band_width)),
            opt(m.final_h_mean()),
            opt(m.final_h_sd()),
        )
        .unwrap();
    }
    std::fs::create_dir_all(dir).map_err(|e| ExpError::io(dir, e))?;
    write_file(&dir.join("summary.csv"), s.as_bytes())
}
