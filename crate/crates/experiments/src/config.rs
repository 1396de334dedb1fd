//! Scenario configuration: a line-based `key = value` format and the
//! builtin registry of the reference experiments.
//!
//! `H`, `b` and `delta` accept comma-separated lists; a scenario runs every
//! combination as a separate variant.

use crate::error::{invalid, ExpError, ExpResult};
use roughvol::io::StateModel;
use roughvol::kernel::bank_size;
use roughvol::paths::OuOuParams;
use roughvol::{Grid, HurstIndex, IntensityKind, ParamBox};
use std::fmt::Write as _;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FilterMode {
    Bootstrap,
    Nested,
    Both,
}

impl FilterMode {
    pub fn name(self) -> &'static str {
        match self {
            FilterMode::Bootstrap => "bootstrap",
            FilterMode::Nested => "nested",
            FilterMode::Both => "both",
        }
    }

    pub fn bootstrap(self) -> bool {
        matches!(self, FilterMode::Bootstrap | FilterMode::Both)
    }

    pub fn nested(self) -> bool {
        matches!(self, FilterMode::Nested | FilterMode::Both)
    }
}

/// Bank size used to simulate a Liouville or fBM truth.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TruthBank {
    /// `J(N, H)`, as for the known-`H` filter.
    Hurst,
    /// `J(N)`, the size shared by the nested filter's parameter particles.
    Shared,
}

impl TruthBank {
    pub fn name(self) -> &'static str {
        match self {
            TruthBank::Hurst => "hurst",
            TruthBank::Shared => "shared",
        }
    }

    /// `Shared` when the nested filter runs, so the data come from the
    /// model class being estimated.
    pub fn default_for(filter: FilterMode) -> Self {
        if filter.nested() {
            TruthBank::Shared
        } else {
            TruthBank::Hurst
        }
    }
}

impl std::str::FromStr for TruthBank {
    type Err = ExpError;

    fn from_str(s: &str) -> ExpResult<Self> {
        match s {
            "hurst" => Ok(TruthBank::Hurst),
            "shared" => Ok(TruthBank::Shared),
            other => invalid(format!("unknown truth_bank '{other}' (expected hurst|shared)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub name: String,
    pub model: StateModel,
    /// True Hurst indices; empty for the non-fractional models.
    pub hurst: Vec<f64>,
    pub b: Vec<f64>,
    pub horizon: f64,
    pub deltas: Vec<f64>,
    /// Bootstrap particles, and inner particles of the nested filter.
    pub particles: usize,
    /// Outer particles of the nested filter.
    pub outer: Option<usize>,
    pub seeds: Vec<u64>,
    pub param_box: ParamBox,
    pub ouou: Option<OuOuParams>,
    pub intensity: IntensityKind,
    pub filter: FilterMode,
    pub prior_sd: f64,
    /// Probability that a jitter move is a fresh uniform draw from the box.
    pub jitter_refresh: f64,
    pub truth_bank: TruthBank,
    /// Also write the OU factors of the true path.
    pub export_bank: bool,
}

/// One point of the `H × b × delta` sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Variant {
    pub hurst: Option<HurstIndex>,
    pub b: f64,
    pub delta: f64,
    pub grid: Grid,
}

impl Variant {
    /// Directory name, e.g. `H0.1_b8000_N960`.
    pub fn label(&self) -> String {
        let mut s = String::new();
        if let Some(h) = self.hurst {
            write!(s, "H{}_", h.value()).unwrap();
        }
        write!(s, "b{}_N{}", self.b, self.grid.steps()).unwrap();
        s
    }

    pub fn steps(&self) -> usize {
        self.grid.steps()
    }
}

impl ScenarioConfig {
    pub fn variants(&self) -> ExpResult<Vec<Variant>> {
        let hs: Vec<Option<HurstIndex>> = if self.hurst.is_empty() {
            vec![None]
        } else {
            self.hurst.iter().map(|&h| HurstIndex::new(h).map(Some)).collect::<Result<_, _>>()?
        };
        let mut out = Vec::new();
        for &hurst in &hs {
            for &b in &self.b {
                for &delta in &self.deltas {
                    out.push(Variant { hurst, b, delta, grid: Grid::from_horizon(self.horizon, delta)? });
                }
            }
        }
        Ok(out)
    }

    /// Bank size of the known-`H` filter for a variant (depends on `N` and `H`).
    pub fn bootstrap_bank(&self, v: &Variant) -> ExpResult<usize> {
        let h = v.hurst.ok_or_else(|| ExpError::Invalid("bootstrap filter needs a known H".into()))?;
        Ok(bank_size(v.steps(), Some(h))?)
    }

    /// Bank size shared by every parameter particle (depends on `N` only).
    pub fn nested_bank(&self, v: &Variant) -> ExpResult<usize> {
        Ok(bank_size(v.steps(), None)?)
    }

    /// Bank size of a Liouville or fBM truth.
    pub fn truth_bank_size(&self, v: &Variant) -> ExpResult<usize> {
        match self.truth_bank {
            TruthBank::Hurst => self.bootstrap_bank(v),
            TruthBank::Shared => self.nested_bank(v),
        }
    }

    pub fn validate(&self) -> ExpResult<()> {
        if self.name.is_empty() || !self.name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
            return invalid(format!("name '{}' must be a nonempty identifier", self.name));
        }
        match (self.model.is_fractional(), self.hurst.is_empty()) {
            (true, true) => return invalid(format!("model={} requires H", self.model.name())),
            (false, false) => return invalid(format!("model={} forbids H", self.model.name())),
            _ => {}
        }
        if self.ouou.is_some() && self.model != StateModel::OuOu {
            return invalid("ouou_* parameters are only valid with model=ou_ou");
        }
        if self.filter.bootstrap() && !self.model.is_fractional() {
            return invalid("the bootstrap filter needs a known H; use filter=nested");
        }
        if self.filter.nested() != self.outer.is_some() {
            return invalid("K must be given exactly when the nested filter runs");
        }
        if self.b.is_empty() || self.b.iter().any(|&b| !(b.is_finite() && b > 0.0)) {
            return invalid("b must be a list of positive reals");
        }
        if self.deltas.is_empty() {
            return invalid("delta must not be empty");
        }
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return invalid("T must be positive");
        }
        if self.particles == 0 || self.outer == Some(0) {
            return invalid("M and K must be positive");
        }
        if self.seeds.is_empty() {
            return invalid("seeds must not be empty");
        }
        let mut sorted = self.seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.seeds.len() {
            return invalid("seeds must be distinct");
        }
        if !(self.prior_sd.is_finite() && self.prior_sd >= 0.0) {
            return invalid("prior_sd must be nonnegative");
        }
        if !(0.0..1.0).contains(&self.jitter_refresh) {
            return invalid("jitter_refresh must lie in [0, 1)");
        }
        for v in self.variants()? {
            if v.steps() < 2 {
                return invalid("T/delta must be at least 2");
            }
            if let Some(h) = v.hurst {
                if self.filter.nested() && !self.param_box.contains(h.value()) {
                    return invalid(format!("H={} lies outside the parameter box", h.value()));
                }
            }
        }
        Ok(())
    }

    /// Canonical text form; `parse_config(render())` returns `self`.
    pub fn render(&self) -> String {
        let list = |xs: &[f64]| xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ");
        let mut s = String::new();
        writeln!(s, "name = {}", self.name).unwrap();
        writeln!(s, "model = {}", self.model.name()).unwrap();
        if !self.hurst.is_empty() {
            writeln!(s, "H = {}", list(&self.hurst)).unwrap();
        }
        writeln!(s, "b = {}", list(&self.b)).unwrap();
        writeln!(s, "T = {}", self.horizon).unwrap();
        writeln!(s, "delta = {}", list(&self.deltas)).unwrap();
        writeln!(s, "M = {}", self.particles).unwrap();
        if let Some(k) = self.outer {
            writeln!(s, "K = {k}").unwrap();
        }
        let seeds = self.seeds.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ");
        writeln!(s, "seeds = {seeds}").unwrap();
        writeln!(s, "box = {}, {}", self.param_box.lo(), self.param_box.hi()).unwrap();
        if let Some(p) = self.ouou {
            writeln!(s, "ouou_beta = {}", p.beta).unwrap();
            writeln!(s, "ouou_sigma_r2 = {}", p.sigma_r2).unwrap();
            writeln!(s, "ouou_kappa = {}", p.kappa).unwrap();
            writeln!(s, "ouou_sigma_v2 = {}", p.sigma_v2).unwrap();
        }
        writeln!(s, "intensity_kind = {}", self.intensity.name()).unwrap();
        writeln!(s, "filter = {}", self.filter.name()).unwrap();
        writeln!(s, "prior_sd = {}", self.prior_sd).unwrap();
        writeln!(s, "jitter_refresh = {}", self.jitter_refresh).unwrap();
        writeln!(s, "truth_bank = {}", self.truth_bank.name()).unwrap();
        writeln!(s, "export_bank = {}", self.export_bank).unwrap();
        s
    }

    /// Replaces `M` and `K` by a smaller desk-scale configuration.
    pub fn scaled(mut self, particles: usize, outer: usize) -> Self {
        self.particles = particles;
        if self.outer.is_some() {
            self.outer = Some(outer);
        }
        self
    }

    pub fn with_seeds(mut self, seeds: Vec<u64>) -> Self {
        self.seeds = seeds;
        self
    }
}

/// Parses a real or a fraction `p/q`.
fn parse_real(s: &str) -> Option<f64> {
    let s = s.trim();
    let v = match s.split_once('/') {
        Some((p, q)) => p.trim().parse::<f64>().ok()? / q.trim().parse::<f64>().ok()?,
        None => s.parse().ok()?,
    };
    v.is_finite().then_some(v)
}

/// `1..50` (inclusive) or a comma-separated list.
pub fn parse_seeds(s: &str) -> Option<Vec<u64>> {
    let mut out = Vec::new();
    for part in s.split(',') {
        let part = part.trim();
        if let Some((a, b)) = part.split_once("..") {
            let (a, b): (u64, u64) = (a.trim().parse().ok()?, b.trim().parse().ok()?);
            if a > b {
                return None;
            }
            out.extend(a..=b);
        } else {
            out.push(part.parse().ok()?);
        }
    }
    Some(out)
}

pub fn parse_config(text: &str) -> ExpResult<ScenarioConfig> {
    let mut name = None;
    let mut model = None;
    let mut hurst = Vec::new();
    let mut b = None;
    let mut horizon = None;
    let mut deltas = None;
    let mut particles = None;
    let mut outer = None;
    let mut seeds = None;
    let mut param_box = ParamBox::default();
    let mut ouou: [Option<f64>; 4] = [None; 4];
    let mut intensity = None;
    let mut filter = None;
    let mut prior_sd = roughvol::filter::DEFAULT_PRIOR_SD;
    let mut jitter_refresh = 0.0;
    let mut truth_bank = None;
    let mut export_bank = false;
    let mut seen = std::collections::HashSet::new();

    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |message: String| ExpError::Config { line: i + 1, message };
        let (key, value) = line.split_once('=').ok_or_else(|| err(format!("expected 'key = value', got '{line}'")))?;
        let (key, value) = (key.trim(), value.trim());
        if !seen.insert(key.to_string()) {
            return Err(err(format!("duplicate key '{key}'")));
        }
        let real = |v: &str| parse_real(v).ok_or_else(|| err(format!("'{v}' is not a number")));
        let reals = |v: &str| v.split(',').map(real).collect::<ExpResult<Vec<f64>>>();
        let count = |v: &str| v.parse::<usize>().map_err(|_| err(format!("'{v}' is not a count")));
        match key {
            "name" => name = Some(value.to_string()),
            "model" => model = Some(value.parse::<StateModel>().map_err(|e| err(e.to_string()))?),
            "H" => hurst = reals(value)?,
            "b" => b = Some(reals(value)?),
            "T" => horizon = Some(real(value)?),
            "delta" => deltas = Some(reals(value)?),
            "M" => particles = Some(count(value)?),
            "K" => outer = Some(count(value)?),
            "seeds" => seeds = Some(parse_seeds(value).ok_or_else(|| err(format!("bad seed list '{value}'")))?),
            "box" => {
                let v = reals(value)?;
                if v.len() != 2 {
                    return Err(err("box needs two bounds 'lo, hi'".into()));
                }
                param_box = ParamBox::new(v[0], v[1]).map_err(|e| err(e.to_string()))?;
            }
            "ouou_beta" => ouou[0] = Some(real(value)?),
            "ouou_sigma_r2" => ouou[1] = Some(real(value)?),
            "ouou_kappa" => ouou[2] = Some(real(value)?),
            "ouou_sigma_v2" => ouou[3] = Some(real(value)?),
            "intensity_kind" => intensity = Some(value.parse::<IntensityKind>().map_err(|e| err(e.to_string()))?),
            "filter" => {
                filter = Some(match value {
                    "bootstrap" => FilterMode::Bootstrap,
                    "nested" => FilterMode::Nested,
                    "both" => FilterMode::Both,
                    other => return Err(err(format!("unknown filter '{other}' (expected bootstrap|nested|both)"))),
                })
            }
            "prior_sd" => prior_sd = real(value)?,
            "jitter_refresh" => jitter_refresh = real(value)?,
            "truth_bank" => truth_bank = Some(value.parse::<TruthBank>().map_err(|e| err(e.to_string()))?),
            "export_bank" => {
                export_bank = value.parse().map_err(|_| err(format!("'{value}' is not true|false")))?;
            }
            other => return Err(err(format!("unknown key '{other}'"))),
        }
    }

    let missing = |k: &str| ExpError::Invalid(format!("missing key '{k}'"));
    let model = model.ok_or_else(|| missing("model"))?;
    let ouou = match ouou {
        [None, None, None, None] => None,
        [Some(beta), Some(sr), Some(kappa), Some(sv)] => Some(OuOuParams::new(beta, sr, kappa, sv)?),
        _ => return invalid("give all four of ouou_beta, ouou_sigma_r2, ouou_kappa, ouou_sigma_v2"),
    };
    let filter = filter.unwrap_or(if outer.is_some() { FilterMode::Nested } else { FilterMode::Bootstrap });
    let cfg = ScenarioConfig {
        name: name.ok_or_else(|| missing("name"))?,
        model,
        hurst,
        b: b.ok_or_else(|| missing("b"))?,
        horizon: horizon.ok_or_else(|| missing("T"))?,
        deltas: deltas.ok_or_else(|| missing("delta"))?,
        particles: particles.ok_or_else(|| missing("M"))?,
        outer,
        seeds: seeds.unwrap_or_else(|| (1..=50).collect()),
        param_box,
        ouou,
        intensity: intensity.unwrap_or(match model {
            StateModel::Liouville | StateModel::Fbm => IntensityKind::Exp,
            StateModel::AbsBm | StateModel::OuOu => IntensityKind::Square,
        }),
        filter,
        prior_sd,
        jitter_refresh,
        truth_bank: truth_bank.unwrap_or(TruthBank::default_for(filter)),
        export_bank,
    };
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &std::path::Path) -> ExpResult<ScenarioConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| ExpError::io(path, e))?;
    parse_config(&text)
}

pub const BUILTIN_NAMES: [&str; 8] = [
    "fig1_h01",
    "fig1_h04",
    "fig2_mre",
    "fig3_b_sensitivity",
    "fig4_modulus",
    "fig5_ouou",
    "fig5_control",
    "smoke",
];

/// The reference experiments at full particle counts. `b` for the
/// non-rough models is set for about 8000 events per day, as in the rough
/// experiments.
pub fn builtin(name: &str) -> ExpResult<ScenarioConfig> {
    let text = match name {
        "fig1_h01" => "name = fig1_h01\nmodel = liouville\nH = 0.1\nb = 8000\nT = 1\ndelta = 1/960\nM = 600\nfilter = bootstrap\n",
        "fig1_h04" => "name = fig1_h04\nmodel = liouville\nH = 0.4\nb = 8000\nT = 1\ndelta = 1/960\nM = 600\nfilter = bootstrap\n",
        "fig2_mre" => "name = fig2_mre\nmodel = liouville\nH = 0.1, 0.4\nb = 8000\nT = 1\ndelta = 1/960\nM = 300\nK = 300\nfilter = nested\n",
        "fig3_b_sensitivity" => {
            "name = fig3_b_sensitivity\nmodel = liouville\nH = 0.3\nb = 3000, 10000\nT = 1\ndelta = 1/960\nM = 300\nK = 300\nfilter = both\nseeds = 1..10\n"
        }
        "fig4_modulus" => {
            "name = fig4_modulus\nmodel = abs_bm\nb = 3200\nT = 5\ndelta = 1/480\nM = 300\nK = 300\nintensity_kind = square\nfilter = nested\nseeds = 1..10\n"
        }
        "fig5_ouou" => {
            "name = fig5_ouou\nmodel = ou_ou\nb = 47000\nT = 5\ndelta = 1/240, 1/960\nM = 300\nK = 300\nintensity_kind = square\nfilter = nested\nseeds = 1..10\n\
             ouou_beta = 2.5\nouou_sigma_r2 = 0.625\nouou_kappa = 210\nouou_sigma_v2 = 20\n"
        }
        "fig5_control" => {
            "name = fig5_control\nmodel = liouville\nH = 0.2\nb = 7600\nT = 5\ndelta = 1/240, 1/960\nM = 300\nK = 300\nintensity_kind = square\nfilter = nested\nseeds = 1..10\n"
        }
        "smoke" => "name = smoke\nmodel = liouville\nH = 0.2\nb = 2000\nT = 1\ndelta = 1/96\nM = 40\nK = 8\nfilter = both\nseeds = 1..3\n",
        other => return Err(ExpError::UnknownScenario(other.to_string())),
    };
    parse_config(text)
}

/// A builtin by name, or a config file by path.
pub fn resolve(name_or_path: &str) -> ExpResult<ScenarioConfig> {
    if BUILTIN_NAMES.contains(&name_or_path) {
        return builtin(name_or_path);
    }
    let path = std::path::Path::new(name_or_path);
    if path.exists() {
        return load_config(path);
    }
    Err(ExpError::UnknownScenario(name_or_path.to_string()))
}
