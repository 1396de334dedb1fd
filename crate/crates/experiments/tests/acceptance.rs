//! Acceptance suite. Every criterion prints one `PASS`/`FAIL` line; run with
//! `cargo test -p roughvol-experiments --test acceptance -- --nocapture`.
//!
//! Criteria 5 and 8 run the nested filter at a desk scale of K = M = 100
//! instead of the builtin 300², which the output flags.

use rand::Rng;
use rand_distr::StandardNormal;
use roughvol::filter::{bootstrap_step_with_noise, ParticleCloud};
use roughvol::kernel::{approx_covariance, bank_size, liouville_covariance};
use roughvol::paths::OuPropagator;
use roughvol::{Domain, HurstIndex, IntensityKind, IntensitySpec, OUBankSpec, OUBankState, SeedTree};
use roughvol_experiments::config::builtin;
use roughvol_experiments::probes::{decreases, median, ContinuityProbe, DiffusionProbe};
use roughvol_experiments::{run_in_memory, ScenarioConfig, ScenarioResult};

const DESK: usize = 100;

fn report(id: u32, pass: bool, detail: &str) {
    println!("[criterion {id:>2}] {}: {detail}", if pass { "PASS" } else { "FAIL" });
}

fn h(x: f64) -> HurstIndex {
    HurstIndex::new(x).unwrap()
}

/// Criteria 5 and 8 at full scale would take hours on one core.
fn desk(name: &str) -> ScenarioConfig {
    builtin(name).unwrap().scaled(DESK, DESK)
}

fn run(cfg: &ScenarioConfig) -> ScenarioResult {
    run_in_memory(cfg).unwrap_or_else(|e| panic!("{}: {e}", cfg.name))
}

#[test]
fn criterion_01_bank_sizes() {
    let cases = [
        (960, Some(0.1), 26),
        (960, Some(0.4), 138),
        (960, Some(0.3), 83),
        (960, None, 63),
        (2400, None, 88),
        (1200, None, 68),
        (4800, None, 112),
    ];
    let got: Vec<usize> = cases.iter().map(|&(n, hh, _)| bank_size(n, hh.map(h)).unwrap()).collect();
    let pass = cases.iter().zip(&got).all(|(c, g)| c.2 == *g);
    report(1, pass, &format!("J = {got:?} (expected 26, 138, 83, 63, 88, 68, 112)"));
    assert!(pass);
}

#[test]
fn criterion_02_covariance_fidelity() {
    let grid: Vec<f64> = (1..=10).map(|i| i as f64 / 10.0).collect();
    let mut worst = Vec::new();
    for hh in [0.1, 0.2, 0.3, 0.4] {
        let spec = OUBankSpec::for_hurst(h(hh), bank_size(960, Some(h(hh))).unwrap()).unwrap();
        let mut gap = 0.0f64;
        for &s in &grid {
            for &t in &grid {
                let exact = liouville_covariance(s, t, h(hh)).unwrap();
                let scale = liouville_covariance(t, t, h(hh)).unwrap();
                gap = gap.max((approx_covariance(s, t, &spec).unwrap() - exact).abs() / scale);
            }
        }
        worst.push((hh, spec.len(), gap));
    }
    let pass = worst.iter().all(|w| w.2 <= 0.15);
    let detail: Vec<String> = worst.iter().map(|(hh, j, g)| format!("H={hh} J={j} gap={g:.3}")).collect();
    report(2, pass, &format!("worst relative covariance gap (bound 0.15): {}", detail.join(", ")));
    assert!(pass);
}

#[test]
fn criterion_03_exact_ou_stepping() {
    // Speeds of the H = 0.1, N = 960 bank (J = 26, up to ~9.2e3) plus κ = 1e4. After
    // 10^4 steps of size 1 every factor is stationary; chains are independent.
    let base = OUBankSpec::for_hurst(h(0.1), 26).unwrap();
    let mut speeds = base.speeds().to_vec();
    speeds.push(1e4);
    let spec = OUBankSpec::from_parts(h(0.1), vec![1.0; speeds.len()], speeds.clone()).unwrap();
    let prop = OuPropagator::new(&spec, 1.0);
    let chains = 4000;
    let seeds = SeedTree::new(3);
    let finals: Vec<Vec<f64>> = (0..chains)
        .map(|c| {
            let mut rng = seeds.stream(Domain::Truth, c);
            let mut z = vec![0.0; speeds.len()];
            for _ in 0..10_000 {
                prop.advance(&mut z, rng.sample(StandardNormal));
            }
            z
        })
        .collect();
    let mut worst = 0.0f64;
    for (j, &k) in speeds.iter().enumerate() {
        let target = 1.0 / (2.0 * k);
        let var = finals.iter().map(|z| z[j] * z[j]).sum::<f64>() / chains as f64;
        let se = target * (2.0 / chains as f64).sqrt();
        worst = worst.max((var - target).abs() / se);
    }
    let pass = worst < 3.0;
    report(3, pass, &format!("{} factors, κ ∈ [{:.3e}, 1e4], worst |Var - 1/(2κ)| = {worst:.2} SE (bound 3)", speeds.len(), speeds[0]));
    assert!(pass);
}

#[test]
fn criterion_04_filtering_quality() {
    let cfg = builtin("fig1_h01").unwrap();
    let res = run(&cfg);
    let runs = &res.variants[0].runs;
    let states: Vec<_> = runs.iter().map(|r| r.bootstrap_state.unwrap()).collect();
    let wins = states.iter().filter(|s| s.rmse < s.zero_rmse).count();
    let coverage = states.iter().map(|s| s.coverage).sum::<f64>() / states.len() as f64;
    let pass = runs.len() == 50 && wins >= 45 && coverage >= 0.90;
    report(
        4,
        pass,
        &format!("H=0.1 b=8000 N=960 M=600: RMSE beats zero on {wins}/50 seeds (need 45), mean [1%,99%] coverage {coverage:.3} (need 0.90)"),
    );
    assert!(pass);
}

#[test]
fn criterion_05_hurst_estimation_trend() {
    let cfg = desk("fig2_mre");
    let res = run(&cfg);
    let mut pass = true;
    let mut parts = Vec::new();
    for vr in &res.variants {
        let mre = vr.mean_relative_error();
        let n = mre.len();
        let (early, last) = (mre[n / 10 - 1], mre[n - 1]);
        pass &= last < early && last <= 0.5;
        parts.push(format!("H={}: MRE(N/10)={early:.3} MRE(N)={last:.3}", vr.variant.hurst.unwrap().value()));
    }
    report(5, pass, &format!("[desk scale K=M={DESK}] 50 seeds: {} (need decrease, final ≤ 0.5)", parts.join("; ")));
    assert!(pass);
}

#[test]
fn criterion_06_informativeness() {
    let cfg = builtin("fig3_b_sensitivity").unwrap();
    let res = run(&cfg);
    let stats: Vec<(f64, f64, f64)> = res
        .variants
        .iter()
        .map(|vr| {
            let sd: Vec<f64> = vr.runs.iter().map(|r| r.final_h_sd().unwrap()).collect();
            let width: Vec<f64> = vr.runs.iter().map(|r| r.bootstrap_state.unwrap().band_width).collect();
            (vr.variant.b, median(&sd), median(&width))
        })
        .collect();
    let (lo, hi) = (stats[0], stats[1]);
    let pass = lo.0 == 3000.0 && hi.0 == 10000.0 && hi.1 < lo.1 && hi.2 < lo.2;
    report(
        6,
        pass,
        &format!(
            "K=M=300, H=0.3, 10 seeds: median final sd(H) {:.4} (b=3000) vs {:.4} (b=10000); median band width {:.4} vs {:.4}",
            lo.1, hi.1, lo.2, hi.2
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_07_non_rough_discrimination() {
    let cfg = builtin("fig4_modulus").unwrap();
    let res = run(&cfg);
    let finals: Vec<f64> = res.variants[0].runs.iter().map(|r| r.final_h_mean().unwrap()).collect();
    let m = median(&finals);
    let pass = m > 0.35;
    report(7, pass, &format!("K=M=300, |W|² data, T=5, Δ=1/480, 10 seeds: median final H mean {m:.3} (need > 0.35)"));
    assert!(pass);
}

#[test]
fn criterion_08_grid_dependence() {
    let medians = |name: &str| -> Vec<f64> {
        let res = run(&desk(name));
        res.variants.iter().map(|vr| median(&vr.runs.iter().map(|r| r.final_h_mean().unwrap()).collect::<Vec<_>>())).collect()
    };
    let ou = medians("fig5_ouou");
    let control = medians("fig5_control");
    let (ou_shift, control_shift) = (ou[1] - ou[0], (control[1] - control[0]).abs());
    let pass = ou_shift > 0.0 && control_shift < ou_shift;
    report(
        8,
        pass,
        &format!(
            "[desk scale K=M={DESK}] 10 seeds, median final H mean at Δ=1/240 → 1/960: OU-OU {:.3} → {:.3} (shift {ou_shift:+.3}); Liouville H=0.2 control {:.3} → {:.3} (|shift| {control_shift:.3})",
            ou[0], ou[1], control[0], control[1]
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_09_diffusion_limit() {
    let probe = DiffusionProbe::default();
    let rows = probe.run().unwrap();
    let gaps = DiffusionProbe::median_gaps(&rows);
    let pass = gaps.windows(2).all(|w| w[1] < w[0]) && gaps[2] < 0.02;
    report(
        9,
        pass,
        &format!("50 seeds, σ² = 1/b: median relative QV gap {:.4} (b=1e3), {:.4} (b=1e4), {:.4} (b=1e5) (need decreasing, last < 0.02)", gaps[0], gaps[1], gaps[2]),
    );
    assert!(pass);
}

#[test]
fn criterion_10_filter_continuity() {
    let probe = ContinuityProbe::default();
    let rows = probe.run().unwrap();
    let exact_zero = rows.iter().all(|(_, r)| r[0].delta == 0.0 && r[0].d_tanh == 0.0 && r[0].d_gauss == 0.0);
    let d = ContinuityProbe::median_discrepancy(&rows);
    let trend = decreases(&d[1..]);
    let pass = exact_zero && trend >= 2;
    report(
        10,
        pass,
        &format!(
            "20 seeds, H=0.2, M=300, N=240: D(0)=0 on every seed: {exact_zero}; median D at δ=0.1,0.05,0.025,0.0125: {:.4}, {:.4}, {:.4}, {:.4} ({trend}/3 decreases, need 2)",
            d[1], d[2], d[3], d[4]
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_11_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "name = determinism\nmodel = liouville\nH = 0.2, 0.35\nb = 4000\nT = 1\ndelta = 1/240\nM = 60\nK = 12\nfilter = both\nseeds = 1..4\n";
    let cfg_path = dir.path().join("det.cfg");
    std::fs::write(&cfg_path, cfg).unwrap();
    let run_cli = |threads: &str, out: &str| {
        let status = std::process::Command::new(env!("CARGO_BIN_EXE_roughvol"))
            .args(["scenario", "--config"])
            .arg(&cfg_path)
            .args(["--threads", threads, "--out"])
            .arg(dir.path().join(out))
            .stdout(std::process::Stdio::null())
            .status()
            .unwrap();
        assert!(status.success());
        let mut files = Vec::new();
        collect(&dir.path().join(out), &dir.path().join(out), &mut files);
        files.sort();
        files
    };
    let a = run_cli("1", "a");
    let b = run_cli("4", "b");
    let c = run_cli("2", "c");
    let pass = !a.is_empty() && a == b && a == c;
    report(11, pass, &format!("{} files byte-identical across reruns with --threads 1, 4, 2: {pass}", a.len()));
    assert!(pass);
}

fn collect(root: &std::path::Path, dir: &std::path::Path, out: &mut Vec<(String, Vec<u8>)>) {
    for e in std::fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() {
            collect(root, &p, out);
        } else {
            out.push((p.strip_prefix(root).unwrap().display().to_string(), std::fs::read(&p).unwrap()));
        }
    }
}

#[test]
fn criterion_12_small_instance_oracle() {
    let delta = 0.5;
    let b = 4.0;
    let mut worst = 0.0f64;
    let mut cases = 0;
    for seed in 0..200u64 {
        let mut rng = SeedTree::new(seed).stream(Domain::Filter, 9);
        let m = 1 + (seed % 4) as usize;
        let steps = 1 + ((seed / 4) % 3) as usize;
        let spec = OUBankSpec::for_hurst(h(0.05 + 0.4 * rng.random::<f64>()), 4).unwrap();
        let init: Vec<Vec<f64>> = (0..m).map(|_| (0..4).map(|_| 0.5 * rng.sample::<f64, _>(StandardNormal)).collect()).collect();
        let ys: Vec<u64> = (0..steps).map(|_| rng.random_range(0..5)).collect();
        let normals: Vec<Vec<f64>> = (0..steps).map(|_| (0..m).map(|_| rng.sample(StandardNormal)).collect()).collect();
        let uniforms: Vec<Vec<f64>> = (0..steps).map(|_| (0..m).map(|_| rng.random()).collect()).collect();

        let ispec = IntensitySpec::new(IntensityKind::Exp, b).unwrap();
        let states = init.iter().map(|z| OUBankState::new(z.clone(), 0).unwrap()).collect();
        let mut cloud = ParticleCloud::new(spec.clone(), states).unwrap();
        let mut log_ev = 0.0;
        let mut genealogy = Vec::new();
        for n in 0..steps {
            let step = bootstrap_step_with_noise(&cloud, ys[n], delta, &ispec, &normals[n], &uniforms[n], n + 1).unwrap();
            log_ev += step.log_evidence;
            genealogy.push(step.ancestors.clone());
            cloud = step.cloud;
        }
        let oracle = genealogy_evidence(&spec, &init, &ys, delta, b, &normals, &genealogy);
        worst = worst.max((log_ev.exp() - oracle).abs() / oracle);
        cases += 1;
    }
    let pass = worst <= 1e-10;
    report(12, pass, &format!("{cases} instances with N ≤ 3, M ≤ 4: worst relative evidence error {worst:.2e} (bound 1e-10)"));
    assert!(pass);
}

/// Evidence by explicit summation over the recorded genealogy: rebuild each
/// particle's trajectory from the ancestor indices and the recorded normals,
/// and multiply the per-step averages of the Poisson weights.
fn genealogy_evidence(
    spec: &OUBankSpec,
    init: &[Vec<f64>],
    ys: &[u64],
    delta: f64,
    b: f64,
    normals: &[Vec<f64>],
    genealogy: &[Vec<usize>],
) -> f64 {
    let advance = |z: &[f64], v: f64| -> Vec<f64> {
        z.iter()
            .zip(spec.speeds())
            .map(|(&zj, &k)| zj * (-k * delta).exp() + ((1.0 - (-2.0 * k * delta).exp()) / (2.0 * k)).sqrt() * v)
            .collect()
    };
    let mut particles = init.to_vec();
    let mut evidence = 1.0;
    for (n, &y) in ys.iter().enumerate() {
        let moved: Vec<Vec<f64>> = particles.iter().zip(&normals[n]).map(|(z, &v)| advance(z, v)).collect();
        let mut sum = 0.0;
        for z in &moved {
            let x: f64 = z.iter().zip(spec.coeffs()).map(|(a, c)| a * c).sum();
            let mean = b * x.exp() * delta;
            let mut fact = 1.0;
            for i in 1..=y {
                fact *= i as f64;
            }
            sum += mean.powi(y as i32) * (-mean).exp() / fact;
        }
        evidence *= sum / moved.len() as f64;
        particles = genealogy[n].iter().map(|&a| moved[a].clone()).collect();
    }
    evidence
}
