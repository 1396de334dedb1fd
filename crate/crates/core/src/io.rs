//! CSV export and import of paths, observations and posterior summaries.
//!
//! Reals are written in scientific notation with 17 significant digits,
//! which round-trips every `f64` exactly.

use crate::error::{domain, Error, Result};
use crate::filter::PosteriorSummary;
use crate::observation::{IntensityKind, ObservationSeries};
use crate::paths::{OUBankState, StatePath};
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Hidden-state model that generated a data set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StateModel {
    Liouville,
    Fbm,
    AbsBm,
    OuOu,
}

impl StateModel {
    pub fn name(self) -> &'static str {
        match self {
            StateModel::Liouville => "liouville",
            StateModel::Fbm => "fbm",
            StateModel::AbsBm => "abs_bm",
            StateModel::OuOu => "ou_ou",
        }
    }

    /// Whether the model is parameterized by a Hurst index.
    pub fn is_fractional(self) -> bool {
        matches!(self, StateModel::Liouville | StateModel::Fbm)
    }
}

impl std::str::FromStr for StateModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "liouville" => Ok(StateModel::Liouville),
            "fbm" => Ok(StateModel::Fbm),
            "abs_bm" => Ok(StateModel::AbsBm),
            "ou_ou" => Ok(StateModel::OuOu),
            other => domain(format!("unknown model '{other}' (expected liouville|fbm|abs_bm|ou_ou)")),
        }
    }
}

/// `step,time,value[,z_1..z_J]`, one row per grid point.
pub fn write_path_csv<W: Write>(mut w: W, path: &StatePath, bank: Option<&[OUBankState]>) -> Result<()> {
    let grid = path.grid();
    let j = bank.and_then(|b| b.first()).map_or(0, |s| s.values().len());
    if let Some(b) = bank {
        if b.len() != path.values().len() {
            return Err(Error::DimensionMismatch { expected: path.values().len(), got: b.len() });
        }
    }
    let mut header = String::from("step,time,value");
    for i in 1..=j {
        write!(header, ",z_{i}").expect("write to string");
    }
    writeln!(w, "{header}")?;
    let mut line = String::new();
    for (n, &v) in path.values().iter().enumerate() {
        line.clear();
        write!(line, "{n},{},{}", fmt_f64(grid.time(n)), fmt_f64(v)).expect("write to string");
        if let Some(b) = bank {
            for z in b[n].values() {
                write!(line, ",{}", fmt_f64(*z)).expect("write to string");
            }
        }
        writeln!(w, "{line}")?;
    }
    Ok(())
}

/// Reads back the `value` column of a path file.
pub fn read_path_values(text: &str) -> Result<Vec<f64>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.starts_with("step,time,value") => {}
        _ => return Err(Error::Parse { line: 1, message: "expected header step,time,value".into() }),
    }
    lines
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            l.split(',')
                .nth(2)
                .and_then(|v| v.trim().parse::<f64>().ok())
                .ok_or(Error::Parse { line: i + 1, message: format!("bad path row '{l}'") })
        })
        .collect()
}

/// Metadata sidecar of an observation file.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationMeta {
    pub delta: f64,
    pub horizon: f64,
    pub b: f64,
    pub kind: IntensityKind,
    pub seed: u64,
    pub model: StateModel,
    pub hurst: Option<f64>,
}

impl ObservationMeta {
    pub fn render(&self) -> String {
        let mut s = String::new();
        writeln!(s, "delta={}", fmt_f64(self.delta)).unwrap();
        writeln!(s, "T={}", fmt_f64(self.horizon)).unwrap();
        writeln!(s, "b={}", fmt_f64(self.b)).unwrap();
        writeln!(s, "kind={}", self.kind.name()).unwrap();
        writeln!(s, "seed={}", self.seed).unwrap();
        writeln!(s, "model={}", self.model.name()).unwrap();
        if let Some(h) = self.hurst {
            writeln!(s, "H={}", fmt_f64(h)).unwrap();
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let (mut delta, mut horizon, mut b, mut kind, mut seed, mut model, mut hurst) =
            (None, None, None, None, None, None, None);
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let perr = |m: String| Error::Parse { line: i + 1, message: m };
            let (k, v) = line.split_once('=').ok_or_else(|| perr(format!("expected key=value, got '{line}'")))?;
            let (k, v) = (k.trim(), v.trim());
            let num = || v.parse::<f64>().map_err(|_| perr(format!("bad number '{v}' for {k}")));
            match k {
                "delta" => delta = Some(num()?),
                "T" => horizon = Some(num()?),
                "b" => b = Some(num()?),
                "kind" => kind = Some(v.parse::<IntensityKind>().map_err(|e| perr(e.to_string()))?),
                "seed" => seed = Some(v.parse::<u64>().map_err(|_| perr(format!("bad seed '{v}'")))?),
                "model" => model = Some(v.parse::<StateModel>().map_err(|e| perr(e.to_string()))?),
                "H" => hurst = Some(num()?),
                other => return Err(perr(format!("unknown key '{other}'"))),
            }
        }
        let missing = |k: &str| Error::Parse { line: 0, message: format!("metadata missing '{k}'") };
        Ok(Self {
            delta: delta.ok_or_else(|| missing("delta"))?,
            horizon: horizon.ok_or_else(|| missing("T"))?,
            b: b.ok_or_else(|| missing("b"))?,
            kind: kind.ok_or_else(|| missing("kind"))?,
            seed: seed.ok_or_else(|| missing("seed"))?,
            model: model.ok_or_else(|| missing("model"))?,
            hurst,
        })
    }
}

/// Sidecar path: same basename with a `.meta` suffix.
pub fn meta_path(csv: &Path) -> PathBuf {
    csv.with_extension("meta")
}

/// `step,count` with `step = 1..=N`.
pub fn write_observations_csv<W: Write>(mut w: W, obs: &ObservationSeries) -> Result<()> {
    writeln!(w, "step,count")?;
    for (i, c) in obs.counts().iter().enumerate() {
        writeln!(w, "{},{c}", i + 1)?;
    }
    Ok(())
}

pub fn parse_observations_csv(text: &str, delta: f64) -> Result<ObservationSeries> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == "step,count" => {}
        _ => return Err(Error::Parse { line: 1, message: "expected header step,count".into() }),
    }
    let mut counts = Vec::new();
    for (i, l) in lines {
        if l.trim().is_empty() {
            continue;
        }
        let perr = || Error::Parse { line: i + 1, message: format!("bad observation row '{l}'") };
        let (step, count) = l.split_once(',').ok_or_else(perr)?;
        let step: usize = step.trim().parse().map_err(|_| perr())?;
        if step != counts.len() + 1 {
            return Err(Error::Parse { line: i + 1, message: format!("expected step {}, got {step}", counts.len() + 1) });
        }
        counts.push(count.trim().parse::<u64>().map_err(|_| perr())?);
    }
    ObservationSeries::new(delta, counts)
}

/// Writes `obs` to `csv` and its metadata to the `.meta` sidecar.
pub fn save_observations(csv: &Path, obs: &ObservationSeries, meta: &ObservationMeta) -> Result<()> {
    let mut buf = Vec::new();
    write_observations_csv(&mut buf, obs)?;
    std::fs::write(csv, buf)?;
    std::fs::write(meta_path(csv), meta.render())?;
    Ok(())
}

pub fn load_observations(csv: &Path) -> Result<(ObservationSeries, ObservationMeta)> {
    let meta = ObservationMeta::parse(&std::fs::read_to_string(meta_path(csv))?)?;
    let obs = parse_observations_csv(&std::fs::read_to_string(csv)?, meta.delta)?;
    Ok((obs, meta))
}

/// `step,time,state_mean,state_q01,state_q99[,h_mean,h_q01,h_q99]`.
pub fn write_posterior_csv<W: Write>(mut w: W, summaries: &[PosteriorSummary], with_hurst: bool) -> Result<()> {
    if with_hurst {
        writeln!(w, "step,time,state_mean,state_q01,state_q99,h_mean,h_q01,h_q99")?;
    } else {
        writeln!(w, "step,time,state_mean,state_q01,state_q99")?;
    }
    for s in summaries {
        write!(
            w,
            "{},{},{},{},{}",
            s.step,
            fmt_f64(s.time),
            fmt_f64(s.state_mean),
            fmt_f64(s.state_q01),
            fmt_f64(s.state_q99)
        )?;
        if with_hurst {
            let h = s.hurst.ok_or_else(|| Error::Domain(format!("step {} has no Hurst summary", s.step)))?;
            write!(w, ",{},{},{}", fmt_f64(h.mean), fmt_f64(h.q01), fmt_f64(h.q99))?;
        }
        writeln!(w)?;
    }
    Ok(())
}

/// `k,theta` for the final parameter sample.
pub fn write_theta_csv<W: Write>(mut w: W, thetas: &[f64]) -> Result<()> {
    writeln!(w, "k,theta")?;
    for (k, t) in thetas.iter().enumerate() {
        writeln!(w, "{},{}", k + 1, fmt_f64(*t))?;
    }
    Ok(())
}
