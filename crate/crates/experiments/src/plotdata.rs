//! Plot-ready CSV files, one per figure type.

use crate::error::ExpResult;
use crate::output::write_file;
use crate::scenario::{mean_series, RunMetrics};
use roughvol::filter::PosteriorSummary;
use roughvol::io::fmt_f64;
use roughvol::ParamBox;
use std::fmt::Write as _;
use std::path::Path;

pub const HIST_BINS: usize = 20;

/// `count` samples per bin over 20 equal bins of the box.
pub fn histogram(samples: &[f64], param_box: &ParamBox) -> Vec<usize> {
    let mut counts = vec![0; HIST_BINS];
    for &x in samples {
        let pos = (x - param_box.lo()) / param_box.width() * HIST_BINS as f64;
        counts[(pos.max(0.0) as usize).min(HIST_BINS - 1)] += 1;
    }
    counts
}

fn bands(truth: &[f64], summaries: &[PosteriorSummary], with_hurst: bool) -> String {
    let mut s = String::from("step,time,truth,state_mean,state_q01,state_q99");
    if with_hurst {
        s.push_str(",h_mean,h_q01,h_q99");
    }
    s.push('\n');
    for (x, p) in truth.iter().zip(summaries) {
        write!(
            s,
            "{},{},{},{},{},{}",
            p.step,
            fmt_f64(p.time),
            fmt_f64(*x),
            fmt_f64(p.state_mean),
            fmt_f64(p.state_q01),
            fmt_f64(p.state_q99)
        )
        .unwrap();
        if let (true, Some(h)) = (with_hurst, p.hurst) {
            write!(s, ",{},{},{}", fmt_f64(h.mean), fmt_f64(h.q01), fmt_f64(h.q99)).unwrap();
        }
        s.push('\n');
    }
    s
}

/// Writes into `dir`:
/// - `bands_bootstrap.csv`, `bands_nested.csv`: truth and posterior band of
///   the first seed (state trajectory figures);
/// - `mre.csv`: mean relative error of `Ĥ_n` across seeds, with `log10_mre`;
/// - `hist.csv`: final posterior of `H` of the first seed in 20 bins over
///   the box, next to the uniform prior density.
///
/// With no runs every file holds its header only.
pub fn emit_plotdata(runs: &[RunMetrics], param_box: &ParamBox, dir: &Path) -> ExpResult<()> {
    let first = runs.first();
    let empty: &[PosteriorSummary] = &[];
    let truth = first.map_or(&[][..], |m| m.truth.as_slice());
    let boot = first.and_then(|m| m.bootstrap.as_deref()).unwrap_or(empty);
    let nested = first.and_then(|m| m.nested.as_ref()).map_or(empty, |r| r.summaries.as_slice());
    write_file(&dir.join("bands_bootstrap.csv"), bands(truth, boot, false).as_bytes())?;
    write_file(&dir.join("bands_nested.csv"), bands(truth, nested, true).as_bytes())?;

    let mre = mean_series(runs.iter().map(|r| r.rel_error.as_slice()));
    let mut s = String::from("step,time,mre,log10_mre\n");
    for (e, p) in mre.iter().zip(nested) {
        writeln!(s, "{},{},{},{}", p.step, fmt_f64(p.time), fmt_f64(*e), fmt_f64(e.log10())).unwrap();
    }
    write_file(&dir.join("mre.csv"), s.as_bytes())?;

    let mut s = String::from("bin_lo,bin_hi,count,density,prior_density\n");
    if let Some(thetas) = first.and_then(|m| m.nested.as_ref()).map(|r| &r.final_thetas) {
        let width = param_box.width() / HIST_BINS as f64;
        for (i, c) in histogram(thetas, param_box).iter().enumerate() {
            let lo = param_box.lo() + i as f64 * width;
            writeln!(
                s,
                "{},{},{c},{},{}",
                fmt_f64(lo),
                fmt_f64(lo + width),
                fmt_f64(*c as f64 / (thetas.len() as f64 * width)),
                fmt_f64(1.0 / param_box.width())
            )
            .unwrap();
        }
    }
    write_file(&dir.join("hist.csv"), s.as_bytes())
}
