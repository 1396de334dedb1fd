use clap::{Args, Parser, Subcommand};
use roughvol::filter::{run_bootstrap, run_nested, BootstrapConfig, JitterKernel, NestedConfig, DEFAULT_PRIOR_SD};
use roughvol::io::{load_observations, write_posterior_csv, write_theta_csv, StateModel};
use roughvol::kernel::bank_size;
use roughvol::{HurstIndex, IntensityKind, IntensitySpec, ParamBox, SeedTree};
use roughvol_experiments::config::{parse_seeds, resolve, FilterMode, ScenarioConfig, TruthBank};
use roughvol_experiments::error::{ExpError, ExpResult};
use roughvol_experiments::output::{write_file, OutputDir};
use roughvol_experiments::plotdata::HIST_BINS;
use roughvol_experiments::probes::{medians_csv, ContinuityProbe, DiffusionProbe};
use roughvol_experiments::scenario::{run_scenario, simulate_dataset};
use roughvol_experiments::load_config;
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(name = "roughvol", version, about = "Rough-volatility filtering experiments on simulated tick counts")]
struct Cli {
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Base seed.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Replace a nonempty output directory.
    #[arg(long)]
    force: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a true state path and its per-bin counts.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Take model, H, b, T and delta from a scenario file (first variant).
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "liouville")]
        model: String,
        #[arg(long)]
        hurst: Option<f64>,
        #[arg(long, default_value_t = 8000.0)]
        b: f64,
        #[arg(long = "horizon", default_value_t = 1.0)]
        horizon: f64,
        /// Bin width, e.g. `1/960`.
        #[arg(long, default_value = "1/960")]
        delta: String,
        /// exp or square (default: exp for liouville/fbm, square otherwise).
        #[arg(long)]
        intensity_kind: Option<String>,
        /// Bank size of a Liouville or fBM truth: `hurst` for J(N, H), `shared` for J(N).
        #[arg(long, default_value = "hurst")]
        truth_bank: String,
    },
    /// Bootstrap filter with a known Hurst index.
    Filter {
        #[command(flatten)]
        common: Common,
        /// Observation CSV with its `.meta` sidecar.
        #[arg(long)]
        obs: PathBuf,
        /// Hurst index (default: `H` from the sidecar).
        #[arg(long)]
        hurst: Option<f64>,
        #[arg(long, default_value_t = 600)]
        particles: usize,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Nested filter estimating the Hurst index.
    Nested {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        obs: PathBuf,
        /// Parameter particles K.
        #[arg(long, default_value_t = 300)]
        outer: usize,
        /// State particles per parameter particle M.
        #[arg(long, default_value_t = 300)]
        inner: usize,
        /// Parameter box `lo,hi`.
        #[arg(long, default_value = "0.01,0.49")]
        r#box: String,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Run a builtin scenario or a scenario file end to end.
    Scenario {
        /// Builtin name or path to a config file.
        scenario: Option<String>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        force: bool,
        /// Override the seed list, e.g. `1..5`.
        #[arg(long)]
        seeds: Option<String>,
        /// Run only this seed.
        #[arg(long, conflicts_with = "seeds")]
        seed: Option<u64>,
        /// Override M (state particles).
        #[arg(long)]
        particles: Option<usize>,
        /// Override K (parameter particles).
        #[arg(long)]
        outer: Option<usize>,
    },
    /// Diffusion-limit and filter-continuity probes.
    Check {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 50)]
        diffusion_seeds: u64,
        #[arg(long, default_value_t = 20)]
        continuity_seeds: u64,
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

fn parse_fraction(s: &str) -> ExpResult<f64> {
    let bad = || ExpError::Invalid(format!("'{s}' is not a number or fraction"));
    let v = match s.split_once('/') {
        Some((p, q)) => p.trim().parse::<f64>().map_err(|_| bad())? / q.trim().parse::<f64>().map_err(|_| bad())?,
        None => s.trim().parse::<f64>().map_err(|_| bad())?,
    };
    if v.is_finite() {
        Ok(v)
    } else {
        Err(bad())
    }
}

fn staged(common: &Common, f: impl FnOnce(&Path) -> ExpResult<()>) -> ExpResult<()> {
    let out = OutputDir::stage(&common.out, common.force)?;
    match f(out.staging()) {
        Ok(()) => out.commit(),
        Err(e) => {
            out.abandon();
            Err(e)
        }
    }
}

fn csv(f: impl FnOnce(&mut Vec<u8>) -> roughvol::Result<()>) -> ExpResult<Vec<u8>> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(buf)
}

fn simulate_config(
    model: &str,
    hurst: Option<f64>,
    b: f64,
    horizon: f64,
    delta: &str,
    intensity_kind: Option<&str>,
    truth_bank: &str,
) -> ExpResult<ScenarioConfig> {
    let model: StateModel = model.parse()?;
    let intensity = match intensity_kind {
        Some(k) => k.parse::<IntensityKind>()?,
        None if model.is_fractional() => IntensityKind::Exp,
        None => IntensityKind::Square,
    };
    let cfg = ScenarioConfig {
        name: "simulate".into(),
        model,
        hurst: hurst.into_iter().collect(),
        b: vec![b],
        horizon,
        deltas: vec![parse_fraction(delta)?],
        particles: 1,
        outer: Some(1),
        seeds: vec![1],
        param_box: ParamBox::default(),
        ouou: None,
        intensity,
        filter: FilterMode::Nested,
        prior_sd: DEFAULT_PRIOR_SD,
        jitter_refresh: 0.0,
        truth_bank: truth_bank.parse::<TruthBank>()?,
        export_bank: false,
    };
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> ExpResult<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| ExpError::Invalid(format!("thread pool: {e}")))?;
    }
    match cli.command {
        Command::Simulate { common, config, model, hurst, b, horizon, delta, intensity_kind, truth_bank } => {
            let cfg = match config {
                Some(p) => load_config(&p)?,
                None => simulate_config(&model, hurst, b, horizon, &delta, intensity_kind.as_deref(), &truth_bank)?,
            };
            let v = cfg.variants()?[0];
            let data = simulate_dataset(&cfg, &v, common.seed)?;
            staged(&common, |dir| {
                let bank = if cfg.export_bank { data.bank.as_deref() } else { None };
                write_file(&dir.join("truth.csv"), &csv(|w| roughvol::io::write_path_csv(w, &data.path, bank))?)?;
                write_file(&dir.join("obs.csv"), &csv(|w| roughvol::io::write_observations_csv(w, &data.obs))?)?;
                write_file(&dir.join("obs.meta"), data.meta.render().as_bytes())
            })?;
            println!("{} bins, {} events -> {}", data.obs.len(), data.obs.total(), common.out.display());
        }
        Command::Filter { common, obs, hurst, particles, config } => {
            let (series, meta) = load_observations(&obs)?;
            let mut particles = particles;
            if let Some(p) = config {
                particles = load_config(&p)?.particles;
            }
            let h = hurst
                .or(meta.hurst)
                .ok_or_else(|| ExpError::Invalid("no H given and none in the observation metadata".into()))?;
            let ispec = IntensitySpec::new(meta.kind, meta.b)?;
            let run = run_bootstrap(
                &series,
                HurstIndex::new(h)?,
                &ispec,
                &BootstrapConfig::new(particles),
                SeedTree::new(common.seed).child(1),
            )?;
            staged(&common, |dir| write_file(&dir.join("posterior.csv"), &csv(|w| write_posterior_csv(w, &run.summaries, false))?))?;
            println!("J = {}, log evidence {:.4} -> {}", run.bank_size, run.log_evidence, common.out.display());
        }
        Command::Nested { common, obs, outer, inner, r#box, config } => {
            let (series, meta) = load_observations(&obs)?;
            let (mut outer, mut inner) = (outer, inner);
            let bounds: Vec<f64> = r#box.split(',').map(parse_fraction).collect::<ExpResult<_>>()?;
            if bounds.len() != 2 {
                return Err(ExpError::Invalid("--box needs 'lo,hi'".into()));
            }
            let mut param_box = ParamBox::new(bounds[0], bounds[1])?;
            let mut jitter = JitterKernel::default();
            if let Some(p) = config {
                let c = load_config(&p)?;
                inner = c.particles;
                outer = c.outer.unwrap_or(outer);
                param_box = c.param_box;
                jitter.refresh_prob = c.jitter_refresh;
            }
            let ispec = IntensitySpec::new(meta.kind, meta.b)?;
            let cfg = NestedConfig { param_box, jitter, ..NestedConfig::new(outer, inner, bank_size(series.len(), None)?, ispec) };
            let run = run_nested(&series, &cfg, SeedTree::new(common.seed).child(2))?;
            let metrics = roughvol_experiments::RunMetrics {
                seed: common.seed,
                events: series.total(),
                truth: Vec::new(),
                bootstrap: None,
                bootstrap_state: None,
                nested: Some(run.clone()),
                nested_state: None,
                rel_error: Vec::new(),
                clamped: run.clamped,
                wall_seconds: 0.0,
            };
            staged(&common, |dir| {
                write_file(&dir.join("posterior.csv"), &csv(|w| write_posterior_csv(w, &run.summaries, true))?)?;
                write_file(&dir.join("theta.csv"), &csv(|w| write_theta_csv(w, &run.final_thetas))?)?;
                roughvol_experiments::plotdata::emit_plotdata(&[metrics], &param_box, dir)
            })?;
            let last = run.summaries.last().and_then(|s| s.hurst);
            match last {
                Some(h) => println!("final H: mean {:.4}, [{:.4}, {:.4}] ({HIST_BINS}-bin histogram in hist.csv)", h.mean, h.q01, h.q99),
                None => println!("no observations; prior mean {:.4}", run.prior_summary.mean),
            }
        }
        Command::Scenario { scenario, config, out, force, seeds, seed, particles, outer } => {
            let mut cfg = match (scenario, config) {
                (Some(s), None) => resolve(&s)?,
                (None, Some(p)) => load_config(&p)?,
                _ => return Err(ExpError::Invalid("give exactly one of <scenario> or --config".into())),
            };
            if let Some(s) = seeds {
                cfg.seeds = parse_seeds(&s).ok_or_else(|| ExpError::Invalid(format!("bad seed list '{s}'")))?;
            }
            if let Some(s) = seed {
                cfg.seeds = vec![s];
            }
            if let Some(m) = particles {
                cfg.particles = m;
            }
            if let (Some(k), Some(_)) = (outer, cfg.outer) {
                cfg.outer = Some(k);
            }
            let result = run_scenario(&cfg, &out, force)?;
            for vr in &result.variants {
                let secs: f64 = vr.runs.iter().map(|r| r.wall_seconds).sum();
                let mut line = format!("{}: {} seeds, {:.1}s filter time", vr.variant.label(), vr.runs.len(), secs);
                if let Some(e) = vr.mean_relative_error().last() {
                    line.push_str(&format!(", final MRE {e:.4}"));
                }
                println!("{line}");
            }
            println!("-> {}", out.display());
        }
        Command::Check { common, diffusion_seeds, continuity_seeds, config } => {
            if config.is_some() {
                return Err(ExpError::Invalid("check takes no config file".into()));
            }
            let p1 = DiffusionProbe { seeds: (common.seed..common.seed + diffusion_seeds).collect(), ..Default::default() };
            let p2 = ContinuityProbe { seeds: (common.seed..common.seed + continuity_seeds).collect(), ..Default::default() };
            let rows1 = p1.run()?;
            let gaps = DiffusionProbe::median_gaps(&rows1);
            let rows2 = p2.run()?;
            let ds = ContinuityProbe::median_discrepancy(&rows2);
            staged(&common, |dir| {
                write_file(&dir.join("diffusion_limit.csv"), DiffusionProbe::csv(&rows1).as_bytes())?;
                write_file(&dir.join("diffusion_limit_median.csv"), medians_csv("b", &p1.b_list, &gaps).as_bytes())?;
                write_file(&dir.join("continuity.csv"), ContinuityProbe::csv(&rows2).as_bytes())?;
                write_file(&dir.join("continuity_median.csv"), medians_csv("delta", &p2.deltas, &ds).as_bytes())
            })?;
            for (b, g) in p1.b_list.iter().zip(&gaps) {
                println!("diffusion limit: b = {b:>8}  median relative gap {g:.5}");
            }
            for (d, x) in p2.deltas.iter().zip(&ds) {
                println!("continuity: delta = {d:<7} median D {x:.3e}");
            }
        }
    }
    Ok(())
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
