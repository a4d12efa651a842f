//! Flat `key = value` configuration files.
//!
//! One entry per line, dotted keys (`params.sigma = 0.3`), `#` starts a
//! comment, lists are comma separated. Resolution order, lowest first:
//! experiment defaults, config file, `--set` overrides, dedicated CLI flags.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::continuum::CutoffUnderDeviation;
use crate::equilibrium::ResponseOrder;
use crate::error::{Error, Result};
use crate::model::{ModelParams, QualityDistribution};

/// A parsed `key = value` line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Entry {
    /// 1-based source line; 0 for command-line overrides.
    pub line: usize,
    pub key: String,
    pub value: String,
}

fn config_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Config { line, msg: msg.into() }
}

fn valid_key(key: &str) -> bool {
    !key.is_empty()
        && key.split('.').all(|part| {
            !part.is_empty()
                && part.bytes().all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'_' || b == b'-')
        })
}

fn split_entry(text: &str, line: usize) -> Result<Entry> {
    let (key, value) = text
        .split_once('=')
        .ok_or_else(|| config_err(line, format!("expected `key = value`, got `{}`", text.trim())))?;
    let (key, value) = (key.trim(), value.trim());
    if !valid_key(key) {
        return Err(config_err(line, format!("invalid key `{key}`")));
    }
    if value.is_empty() {
        return Err(config_err(line, format!("missing value for `{key}`")));
    }
    Ok(Entry { line, key: key.to_string(), value: value.to_string() })
}

/// Parses a config file body. Duplicate keys are an error.
pub fn parse_config(text: &str) -> Result<Vec<Entry>> {
    let mut entries: Vec<Entry> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let entry = split_entry(body, line)?;
        if let Some(prev) = entries.iter().find(|e| e.key == entry.key) {
            return Err(config_err(line, format!("`{}` already set on line {}", entry.key, prev.line)));
        }
        entries.push(entry);
    }
    Ok(entries)
}

/// Parses one `--set key=value` argument.
pub fn parse_override(arg: &str) -> Result<Entry> {
    if arg.contains('#') || arg.contains('\n') {
        return Err(config_err(0, format!("override `{arg}` may not contain `#` or newlines")));
    }
    split_entry(arg, 0)
}

/// Named pipelines and single-point commands.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    ScaleSweep,
    PhaseDiagram,
    OptimalProfiles,
    PlannerVsNash,
    ProsocialitySweep,
    AiScenario,
    SizeEffect,
    McValidate,
    Planner,
    Nash,
    Joint,
}

impl Experiment {
    pub const ALL: [Experiment; 11] = [
        Experiment::ScaleSweep,
        Experiment::PhaseDiagram,
        Experiment::OptimalProfiles,
        Experiment::PlannerVsNash,
        Experiment::ProsocialitySweep,
        Experiment::AiScenario,
        Experiment::SizeEffect,
        Experiment::McValidate,
        Experiment::Planner,
        Experiment::Nash,
        Experiment::Joint,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::ScaleSweep => "scale-sweep",
            Experiment::PhaseDiagram => "phase-diagram",
            Experiment::OptimalProfiles => "optimal-profiles",
            Experiment::PlannerVsNash => "planner-vs-nash",
            Experiment::ProsocialitySweep => "prosociality-sweep",
            Experiment::AiScenario => "ai-scenario",
            Experiment::SizeEffect => "size-effect",
            Experiment::McValidate => "mc-validate",
            Experiment::Planner => "planner",
            Experiment::Nash => "nash",
            Experiment::Joint => "joint",
        }
    }
}

impl std::fmt::Display for Experiment {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| Error::Usage(format!("unknown experiment `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub sigma: Vec<f64>,
    pub beta: Vec<f64>,
    pub n: Vec<usize>,
    pub r: Vec<f64>,
    pub tau: Vec<f64>,
    pub multiplier: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct McConfig {
    pub enabled: bool,
    pub m: usize,
    pub base_seed: u64,
    /// Paired replications per round of the simulated best-response iteration.
    pub eq_m: usize,
    /// Ratios at which the simulated equilibrium threshold is estimated.
    pub eq_r: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub sigma_min: f64,
    pub sigma_max: f64,
    pub order: ResponseOrder,
    pub max_iterations: usize,
    pub deviation_cutoff: CutoffUnderDeviation,
}

/// Fully resolved experiment configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub params: ModelParams,
    pub grid: usize,
    pub sweep: Sweep,
    pub mc: McConfig,
    pub solver: SolverConfig,
    /// Noise level at which threshold profiles are emitted.
    pub profile_sigma: f64,
    /// `(sigma, beta)` points for optimal participation profiles.
    pub marked: Vec<(f64, f64)>,
    /// Reference venue size of the scale sweep.
    pub n_ref: usize,
    /// Ratio the size-effect gains are compared against.
    pub r_ref: f64,
    pub output: PathBuf,
    /// Worker threads; 0 lets the pool decide.
    pub threads: usize,
}

/// Evenly spaced `start, start + step, ...` up to `end` inclusive, rounded to 12 decimals.
fn ladder(start: f64, end: f64, step: f64) -> Vec<f64> {
    let n = ((end - start) / step).round() as usize;
    (0..=n).map(|i| ((start + i as f64 * step) * 1e12).round() / 1e12).collect()
}

fn ratio_params(base: ModelParams, r: f64) -> ModelParams {
    base.with_ratio(r).expect("default ratio is valid")
}

impl ExperimentConfig {
    /// Defaults for `experiment`, before any file or override.
    pub fn defaults(experiment: Experiment) -> Self {
        use Experiment::*;
        let base = ratio_params(ModelParams::default(), 0.33);
        let params = match experiment {
            ScaleSweep => ModelParams { lottery_rate: 0.0, ..base },
            PhaseDiagram | OptimalProfiles => ModelParams { lottery_rate: 0.2, ..base },
            _ => base,
        };
        let sweep = Sweep {
            sigma: match experiment {
                McValidate => vec![0.1, 0.3, 0.5],
                _ => ladder(0.05, 0.6, 0.05),
            },
            beta: match experiment {
                ScaleSweep => vec![2.0, 4.0, 8.0],
                _ => vec![0.0, 1.0, 2.0, 4.0, 6.0, 8.0, 10.0, 12.0],
            },
            n: match experiment {
                SizeEffect => vec![100, 500],
                _ => vec![50, 100, 200, 400, 800],
            },
            r: match experiment {
                SizeEffect => vec![0.3, 0.5, 0.99],
                _ => vec![0.1, 0.2, 0.33, 0.5, 0.67, 0.9],
            },
            tau: vec![0.0, 0.4, 1.0],
            multiplier: vec![1.0, 1.5, 2.0],
        };
        let mc = McConfig {
            enabled: matches!(experiment, ScaleSweep | McValidate),
            m: if experiment == ScaleSweep { 10_000 } else { 5_000 },
            base_seed: 20_240_601,
            eq_m: 5_000,
            eq_r: vec![0.33, 0.5, 0.67],
        };
        ExperimentConfig {
            experiment,
            params,
            grid: crate::quadrature::DEFAULT_GRID,
            sweep,
            mc,
            solver: SolverConfig {
                sigma_min: 0.01,
                sigma_max: 1.0,
                order: ResponseOrder::ScientistsFirst,
                max_iterations: 100,
                deviation_cutoff: CutoffUnderDeviation::Resolve,
            },
            profile_sigma: 0.3,
            marked: vec![(0.1, 2.0), (0.3, 4.0), (0.6, 8.0)],
            n_ref: 50,
            r_ref: 0.5,
            output: PathBuf::from("out"),
            threads: 0,
        }
    }

    /// Resolves defaults, then file entries, then overrides. The experiment
    /// comes from `experiment` or, failing that, from an `experiment` entry.
    pub fn resolve(experiment: Option<Experiment>, file: &[Entry], overrides: &[Entry]) -> Result<Self> {
        let named = file.iter().chain(overrides).rfind(|e| e.key == "experiment");
        let experiment = match (experiment, named) {
            (Some(e), Some(entry)) => {
                let other: Experiment = entry.value.parse().map_err(|_| bad_value(entry, "an experiment name"))?;
                if other != e {
                    return Err(config_err(entry.line, format!("config is for `{other}`, not `{e}`")));
                }
                e
            }
            (Some(e), None) => e,
            (None, Some(entry)) => entry.value.parse().map_err(|_| bad_value(entry, "an experiment name"))?,
            (None, None) => return Err(Error::Usage("no experiment given".into())),
        };
        let mut cfg = ExperimentConfig::defaults(experiment);
        let mut ratio = None;
        let mut n_ref_set = false;
        for entry in file.iter().chain(overrides) {
            match entry.key.as_str() {
                "params.r" => ratio = Some(num::<f64>(entry)?),
                "scale.n_ref" => {
                    n_ref_set = true;
                    cfg.set(entry)?;
                }
                _ => cfg.set(entry)?,
            }
        }
        if let Some(r) = ratio {
            cfg.params = cfg.params.with_ratio(r).map_err(|e| config_err(0, e.to_string()))?;
        }
        if !n_ref_set {
            cfg.n_ref = cfg.sweep.n.iter().copied().min().unwrap_or(cfg.n_ref);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn set(&mut self, e: &Entry) -> Result<()> {
        let p = &mut self.params;
        match e.key.as_str() {
            "experiment" => {}
            "params.sigma" => p.sigma = num(e)?,
            "params.beta" => p.beta = num(e)?,
            "params.alpha" => p.alpha = num(e)?,
            "params.lottery_rate" => p.lottery_rate = num(e)?,
            "params.n_scientists" => p.n_scientists = num(e)?,
            "params.b" => p.b = num(e)?,
            "params.s" => p.s = num(e)?,
            "params.c" => p.c = num(e)?,
            "params.k" => p.k = num(e)?,
            "params.quality_dist" => p.quality_dist = quality(e)?,
            "grid" => self.grid = num(e)?,
            "sweep.sigma" => self.sweep.sigma = list(e)?,
            "sweep.beta" => self.sweep.beta = list(e)?,
            "sweep.n" => self.sweep.n = list(e)?,
            "sweep.r" => self.sweep.r = list(e)?,
            "sweep.tau" => self.sweep.tau = list(e)?,
            "sweep.multiplier" => self.sweep.multiplier = list(e)?,
            "mc.enabled" => self.mc.enabled = num(e)?,
            "mc.m" => self.mc.m = num(e)?,
            "mc.base_seed" => self.mc.base_seed = num(e)?,
            "mc.eq_m" => self.mc.eq_m = num(e)?,
            "mc.eq_r" => self.mc.eq_r = list(e)?,
            "solver.sigma_min" => self.solver.sigma_min = num(e)?,
            "solver.sigma_max" => self.solver.sigma_max = num(e)?,
            "solver.order" => {
                self.solver.order = match e.value.as_str() {
                    "scientists-first" => ResponseOrder::ScientistsFirst,
                    "journal-first" => ResponseOrder::JournalFirst,
                    _ => return Err(bad_value(e, "`scientists-first` or `journal-first`")),
                }
            }
            "solver.max_iterations" => self.solver.max_iterations = num(e)?,
            "solver.deviation_cutoff" => {
                self.solver.deviation_cutoff = match e.value.as_str() {
                    "resolve" => CutoffUnderDeviation::Resolve,
                    "hold" => CutoffUnderDeviation::Hold,
                    _ => return Err(bad_value(e, "`resolve` or `hold`")),
                }
            }
            "profile.sigma" => self.profile_sigma = num(e)?,
            "profile.marked" => self.marked = pairs(e)?,
            "scale.n_ref" => self.n_ref = num(e)?,
            "size.r_ref" => self.r_ref = num(e)?,
            "output" => self.output = PathBuf::from(&e.value),
            "threads" => self.threads = num(e)?,
            other => return Err(config_err(e.line, format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(config_err(0, msg));
        self.params.validate().map_err(|e| config_err(0, e.to_string()))?;
        if self.grid < 3 {
            return fail(format!("grid must be >= 3, got {}", self.grid));
        }
        let sw = &self.sweep;
        if sw.sigma.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
            return fail("sweep.sigma values must be positive".into());
        }
        if sw.beta.iter().any(|&b| !(b >= 0.0 && b.is_finite())) {
            return fail("sweep.beta values must be non-negative".into());
        }
        if sw.n.contains(&0) {
            return fail("sweep.n values must be positive".into());
        }
        if sw.n.windows(2).any(|w| w[0] >= w[1]) {
            return fail("sweep.n must be strictly ascending".into());
        }
        if sw.r.iter().chain(&self.mc.eq_r).chain([&self.r_ref]).any(|&r| !(r > 0.0 && r <= 1.0)) {
            return fail("ratios must lie in (0, 1]".into());
        }
        if sw.tau.iter().any(|&t| !(0.0..=1.0).contains(&t)) {
            return fail("sweep.tau values must lie in [0, 1]".into());
        }
        if sw.multiplier.iter().any(|&m| !(m > 0.0 && m.is_finite())) {
            return fail("sweep.multiplier values must be positive".into());
        }
        if self.mc.m == 0 || self.mc.eq_m == 0 {
            return fail("replication counts must be >= 1".into());
        }
        let s = &self.solver;
        if !(s.sigma_min > 0.0 && s.sigma_max > s.sigma_min && s.sigma_max.is_finite()) {
            return fail("need 0 < solver.sigma_min < solver.sigma_max".into());
        }
        if s.max_iterations == 0 {
            return fail("solver.max_iterations must be >= 1".into());
        }
        if !(self.profile_sigma > 0.0 && self.profile_sigma.is_finite()) {
            return fail("profile.sigma must be positive".into());
        }
        if self.marked.iter().any(|&(s, b)| !(s > 0.0 && s.is_finite() && b >= 0.0 && b.is_finite())) {
            return fail("profile.marked needs sigma > 0 and beta >= 0".into());
        }
        if self.n_ref == 0 {
            return fail("scale.n_ref must be positive".into());
        }
        Ok(())
    }

    /// Every setting as `(key, value)`, in a fixed order. Floats use the
    /// shortest representation that parses back to the same value.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let p = &self.params;
        let s = &self.solver;
        vec![
            ("experiment", self.experiment.to_string()),
            ("params.sigma", p.sigma.to_string()),
            ("params.beta", p.beta.to_string()),
            ("params.alpha", p.alpha.to_string()),
            ("params.lottery_rate", p.lottery_rate.to_string()),
            ("params.n_scientists", p.n_scientists.to_string()),
            ("params.b", p.b.to_string()),
            ("params.s", p.s.to_string()),
            ("params.c", p.c.to_string()),
            ("params.k", p.k.to_string()),
            ("params.quality_dist", p.quality_dist.to_string()),
            ("grid", self.grid.to_string()),
            ("sweep.sigma", join(&self.sweep.sigma)),
            ("sweep.beta", join(&self.sweep.beta)),
            ("sweep.n", join(&self.sweep.n)),
            ("sweep.r", join(&self.sweep.r)),
            ("sweep.tau", join(&self.sweep.tau)),
            ("sweep.multiplier", join(&self.sweep.multiplier)),
            ("mc.enabled", self.mc.enabled.to_string()),
            ("mc.m", self.mc.m.to_string()),
            ("mc.base_seed", self.mc.base_seed.to_string()),
            ("mc.eq_m", self.mc.eq_m.to_string()),
            ("mc.eq_r", join(&self.mc.eq_r)),
            ("solver.sigma_min", s.sigma_min.to_string()),
            ("solver.sigma_max", s.sigma_max.to_string()),
            (
                "solver.order",
                match s.order {
                    ResponseOrder::ScientistsFirst => "scientists-first",
                    ResponseOrder::JournalFirst => "journal-first",
                }
                .to_string(),
            ),
            ("solver.max_iterations", s.max_iterations.to_string()),
            (
                "solver.deviation_cutoff",
                match s.deviation_cutoff {
                    CutoffUnderDeviation::Resolve => "resolve",
                    CutoffUnderDeviation::Hold => "hold",
                }
                .to_string(),
            ),
            ("profile.sigma", self.profile_sigma.to_string()),
            ("profile.marked", self.marked.iter().map(|(s, b)| format!("{s}:{b}")).collect::<Vec<_>>().join(", ")),
            ("scale.n_ref", self.n_ref.to_string()),
            ("size.r_ref", self.r_ref.to_string()),
            ("output", self.output.display().to_string()),
            ("threads", self.threads.to_string()),
        ]
    }

    /// The resolved config in file syntax.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for (k, v) in self.entries() {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }

    /// SHA-256 of the settings that affect results (everything except
    /// `output` and `threads`), as 16 hex digits.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for (k, v) in self.entries() {
            if k != "output" && k != "threads" {
                h.update(format!("{k} = {v}\n").as_bytes());
            }
        }
        hex::encode(h.finalize())[..16].to_string()
    }
}

fn join<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(ToString::to_string).collect::<Vec<_>>().join(", ")
}

fn bad_value(e: &Entry, expected: &str) -> Error {
    config_err(e.line, format!("`{}` must be {expected}, got `{}`", e.key, e.value))
}

fn num<T: FromStr>(e: &Entry) -> Result<T> {
    e.value.parse().map_err(|_| bad_value(e, std::any::type_name::<T>()))
}

fn list<T: FromStr>(e: &Entry) -> Result<Vec<T>> {
    e.value
        .split(',')
        .map(|item| item.trim().parse().map_err(|_| bad_value(e, &format!("a list of {}", std::any::type_name::<T>()))))
        .collect()
}

fn pairs(e: &Entry) -> Result<Vec<(f64, f64)>> {
    e.value
        .split(',')
        .map(|item| {
            let (a, b) = item.trim().split_once(':').ok_or_else(|| bad_value(e, "a list of `sigma:beta` pairs"))?;
            match (a.trim().parse(), b.trim().parse()) {
                (Ok(a), Ok(b)) => Ok((a, b)),
                _ => Err(bad_value(e, "a list of `sigma:beta` pairs")),
            }
        })
        .collect()
}

fn quality(e: &Entry) -> Result<QualityDistribution> {
    let v = e.value.as_str();
    if v == "uniform" {
        return Ok(QualityDistribution::Uniform01);
    }
    let inner = v
        .strip_prefix("beta(")
        .and_then(|rest| rest.strip_suffix(')'))
        .ok_or_else(|| bad_value(e, "`uniform` or `beta(a,b)`"))?;
    let (a, b) = inner.split_once(',').ok_or_else(|| bad_value(e, "`beta(a,b)`"))?;
    match (a.trim().parse(), b.trim().parse()) {
        (Ok(a), Ok(b_shape)) => Ok(QualityDistribution::Beta { a, b_shape }),
        _ => Err(bad_value(e, "`beta(a,b)` with numeric shapes")),
    }
}
