//! Configuration, validation and reporting for the experiment harnesses.
//!
//! A config is a flat set of `key = value` pairs (TOML syntax, no tables).
//! The reserved keys are `experiment`, `seed`, `trials` and `format`; every
//! other key is an experiment parameter and must be one the chosen
//! experiment understands.
//!
//! Reports are written as JSON lines: a `config` echo, optional `record`
//! lines, an `aggregate` line, and a final `duration` line. Only the last
//! line depends on wall-clock time.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::asc::{distinguish_traces, nr_act, run_asc, AlternativeSet, NormFunction};
use crate::behavior::{classify_with, generate_sequence, EventSequence, IntervalModel, Pattern, Thresholds};
use crate::energy::{audit_measurement, energy_basis, Hamiltonian};
use crate::error::{Error, Result};
use crate::ks::{builtin_ks_table, ks_coloring_search, parity_certificate, parse_table, run_fwt, validate_table, format_table, BobChoice, FwtSetup};
use crate::policy::CollapsePolicy;
use crate::quantum::{re, ProbabilityDistribution, ProjectiveMeasurement, StateVector};
use crate::rng::{derive_seed, trial_rng};
use crate::sat::{classical_brute_force, decide_sat, OracleFunction, MAX_BITS};
use crate::signaling::{signaling_experiment, AliceSetting};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    Ks,
    Fwt,
    Signal,
    Energy,
    Sat,
    Asc,
    Behavior,
}

impl Experiment {
    pub const ALL: [Experiment; 7] = [
        Experiment::Ks,
        Experiment::Fwt,
        Experiment::Signal,
        Experiment::Energy,
        Experiment::Sat,
        Experiment::Asc,
        Experiment::Behavior,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Ks => "ks",
            Experiment::Fwt => "fwt",
            Experiment::Signal => "signal",
            Experiment::Energy => "energy",
            Experiment::Sat => "sat",
            Experiment::Asc => "asc",
            Experiment::Behavior => "behavior",
        }
    }

    /// Parameter keys the experiment accepts.
    pub fn keys(self) -> &'static [&'static str] {
        match self {
            Experiment::Ks => &["table", "export"],
            Experiment::Fwt => &["policy", "bob", "records"],
            Experiment::Signal => &["state", "basis0", "basis1", "bob_basis", "policy0", "policy1", "mode"],
            Experiment::Energy => &["energies", "hamiltonian", "state", "basis", "eigenvalues", "weights"],
            Experiment::Sat => &["cnf", "truth_table", "n", "density", "records"],
            Experiment::Asc => &["labels", "priorities", "norm", "mixing", "records"],
            Experiment::Behavior => &[
                "mode", "model", "rate", "alpha", "xmin", "length", "input", "levy_below", "noise_above",
            ],
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown experiment `{s}`")))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub enum OutputFormat {
    #[default]
    #[serde(rename = "json-lines")]
    JsonLines,
    #[serde(rename = "csv")]
    Csv,
}

impl fmt::Display for OutputFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OutputFormat::JsonLines => "json-lines",
            OutputFormat::Csv => "csv",
        })
    }
}

impl FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json-lines" | "jsonl" => Ok(OutputFormat::JsonLines),
            "csv" => Ok(OutputFormat::Csv),
            other => Err(Error::Config(format!("unknown format `{other}`"))),
        }
    }
}

/// A runnable experiment description. `experiment` is kept as text so that
/// an unknown name can be reported by [`validate`] rather than rejected on
/// construction.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub experiment: String,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trials: Option<u64>,
    pub format: OutputFormat,
    pub params: BTreeMap<String, String>,
}

impl ExperimentConfig {
    pub fn new(experiment: impl Into<String>) -> Self {
        Self {
            experiment: experiment.into(),
            seed: 0,
            trials: None,
            format: OutputFormat::default(),
            params: BTreeMap::new(),
        }
    }

    pub fn with_param(mut self, key: &str, value: impl ToString) -> Self {
        self.params.insert(key.to_string(), value.to_string());
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_trials(mut self, trials: u64) -> Self {
        self.trials = Some(trials);
        self
    }

    /// Sets one key, reserved or not.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "experiment" => self.experiment = value.to_string(),
            "seed" => {
                self.seed = value
                    .parse()
                    .map_err(|_| Error::Config(format!("seed `{value}` is not a 64-bit unsigned integer")))?
            }
            "trials" => {
                self.trials = Some(
                    value
                        .parse()
                        .map_err(|_| Error::Config(format!("trials `{value}` is not a count")))?,
                )
            }
            "format" => self.format = value.parse()?,
            _ => {
                self.params.insert(key.to_string(), value.to_string());
            }
        }
        Ok(())
    }

    /// Parses a flat TOML document. Nested tables are rejected.
    pub fn from_toml(text: &str) -> Result<Self> {
        let table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::Config(e.message().to_string()))?;
        let mut config = ExperimentConfig::new("");
        for (key, value) in table {
            let text = match value {
                toml::Value::String(s) => s,
                toml::Value::Integer(i) => i.to_string(),
                toml::Value::Float(x) => x.to_string(),
                toml::Value::Boolean(b) => b.to_string(),
                toml::Value::Array(items) => items
                    .iter()
                    .map(|v| match v {
                        toml::Value::String(s) => Ok(s.clone()),
                        toml::Value::Integer(i) => Ok(i.to_string()),
                        toml::Value::Float(x) => Ok(x.to_string()),
                        _ => Err(Error::Config(format!("`{key}`: unsupported array element"))),
                    })
                    .collect::<Result<Vec<_>>>()?
                    .join(","),
                _ => return Err(Error::Config(format!("`{key}` must be a plain value"))),
            };
            config.set(&key, &text)?;
        }
        if config.experiment.is_empty() {
            return Err(Error::Config("missing `experiment`".into()));
        }
        Ok(config)
    }

    /// Rebuilds a config from the `config` line of a report.
    pub fn from_echo(echo: &Value) -> Result<Self> {
        let obj = echo
            .as_object()
            .ok_or_else(|| Error::Config("config echo is not an object".into()))?;
        let experiment = obj
            .get("experiment")
            .and_then(Value::as_str)
            .ok_or_else(|| Error::Config("config echo lacks `experiment`".into()))?;
        let mut config = ExperimentConfig::new(experiment);
        config.seed = obj
            .get("seed")
            .and_then(Value::as_u64)
            .ok_or_else(|| Error::Config("config echo lacks `seed`".into()))?;
        config.trials = obj.get("trials").and_then(Value::as_u64);
        if let Some(f) = obj.get("format").and_then(Value::as_str) {
            config.format = f.parse()?;
        }
        if let Some(params) = obj.get("params").and_then(Value::as_object) {
            for (k, v) in params {
                let v = v
                    .as_str()
                    .ok_or_else(|| Error::Config(format!("param `{k}` is not a string")))?;
                config.params.insert(k.clone(), v.to_string());
            }
        }
        Ok(config)
    }
}

/// A problem with one config key.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ConfigViolation {
    pub key: String,
    pub message: String,
}

impl fmt::Display for ConfigViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "`{}`: {}", self.key, self.message)
    }
}

/// Typed accessor over the parameter map that collects every parse failure.
struct Params<'a> {
    map: &'a BTreeMap<String, String>,
    violations: Vec<ConfigViolation>,
}

impl<'a> Params<'a> {
    fn new(map: &'a BTreeMap<String, String>) -> Self {
        Self {
            map,
            violations: Vec::new(),
        }
    }

    fn raw(&self, key: &str) -> Option<&'a str> {
        self.map.get(key).map(String::as_str)
    }

    fn flag(&mut self, key: &str, message: impl Into<String>) {
        self.violations.push(ConfigViolation {
            key: key.to_string(),
            message: message.into(),
        });
    }

    fn parse<T: FromStr>(&mut self, key: &str, default: T) -> T
    where
        T::Err: fmt::Display,
    {
        match self.raw(key) {
            None => default,
            Some(v) => match v.trim().parse() {
                Ok(x) => x,
                Err(e) => {
                    self.flag(key, format!("cannot parse `{v}`: {e}"));
                    default
                }
            },
        }
    }

    fn list(&mut self, key: &str, default: &[f64]) -> Vec<f64> {
        match self.raw(key) {
            None => default.to_vec(),
            Some(v) => match parse_f64_list(v) {
                Ok(x) => x,
                Err(e) => {
                    self.flag(key, e.to_string());
                    default.to_vec()
                }
            },
        }
    }

    fn text(&self, key: &str, default: &str) -> String {
        self.raw(key).unwrap_or(default).to_string()
    }

    fn file(&mut self, key: &str) -> Option<String> {
        let path = self.raw(key)?;
        match std::fs::read_to_string(path) {
            Ok(text) => Some(text),
            Err(e) => {
                self.flag(key, format!("cannot read `{path}`: {e}"));
                None
            }
        }
    }

    fn finish<T>(self, value: T) -> std::result::Result<T, Vec<ConfigViolation>> {
        if self.violations.is_empty() {
            Ok(value)
        } else {
            Err(self.violations)
        }
    }
}

fn parse_f64_list(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|t| {
            let t = t.trim();
            match t.split_once('/') {
                Some((a, b)) => match (a.trim().parse::<f64>(), b.trim().parse::<f64>()) {
                    (Ok(a), Ok(b)) if b != 0.0 => Ok(a / b),
                    _ => Err(Error::Parse(format!("bad number `{t}`"))),
                },
                None => t.parse().map_err(|_| Error::Parse(format!("bad number `{t}`"))),
            }
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Typed plans, one per experiment

struct KsPlan {
    table: crate::ks::KsTable,
    export: bool,
}

struct FwtPlan {
    policy: CollapsePolicy,
    bob: BobChoice,
    trials: u64,
    records: bool,
}

struct SignalPlan {
    shared: StateVector,
    settings: Vec<AliceSetting>,
    bob: ProjectiveMeasurement,
    trials: Option<u64>,
}

struct EnergyPlan {
    rho: crate::quantum::DensityOperator,
    h: Hamiltonian,
    measurement: ProjectiveMeasurement,
    eigenvalues: Vec<f64>,
    weights: Option<ProbabilityDistribution>,
}

enum SatSource {
    Fixed(OracleFunction),
    Random { n: usize, density: f64 },
}

struct SatPlan {
    source: SatSource,
    trials: u64,
    records: bool,
}

struct AscPlan {
    alts: AlternativeSet,
    norm: NormFunction,
    mixing: f64,
    trials: u64,
    records: bool,
}

enum BehaviorPlan {
    Generate { model: IntervalModel, length: usize, thresholds: Thresholds },
    ClassifyFile { seq: EventSequence, thresholds: Thresholds },
    ClassifyGenerated { model: IntervalModel, length: usize, thresholds: Thresholds, trials: u64 },
}

enum Plan {
    Ks(KsPlan),
    Fwt(FwtPlan),
    Signal(SignalPlan),
    Energy(EnergyPlan),
    Sat(SatPlan),
    Asc(AscPlan),
    Behavior(BehaviorPlan),
}

fn qubit_basis(name: &str) -> Option<ProjectiveMeasurement> {
    match name {
        "z" => Some(ProjectiveMeasurement::computational(2)),
        "x" => ProjectiveMeasurement::from_basis(&[
            StateVector::from_real(&[1.0, 1.0]).ok()?,
            StateVector::from_real(&[1.0, -1.0]).ok()?,
        ])
        .ok(),
        "y" => ProjectiveMeasurement::from_basis(&[
            StateVector::new(&[re(1.0), crate::quantum::C64::new(0.0, 1.0)]).ok()?,
            StateVector::new(&[re(1.0), crate::quantum::C64::new(0.0, -1.0)]).ok()?,
        ])
        .ok(),
        _ => None,
    }
}

fn plan(config: &ExperimentConfig) -> std::result::Result<Plan, Vec<ConfigViolation>> {
    let experiment: Experiment = config.experiment.parse().map_err(|_| {
        vec![ConfigViolation {
            key: "experiment".into(),
            message: format!(
                "unknown experiment `{}`; expected one of ks, fwt, signal, energy, sat, asc, behavior",
                config.experiment
            ),
        }]
    })?;
    let mut p = Params::new(&config.params);
    for key in config.params.keys() {
        if !experiment.keys().contains(&key.as_str()) {
            p.flag(key, format!("unknown key for experiment `{experiment}`"));
        }
    }
    if config.trials == Some(0) {
        p.flag("trials", "must be positive");
    }
    let trials = |default: u64| config.trials.unwrap_or(default);

    let plan = match experiment {
        Experiment::Ks => {
            let table = match p.file("table") {
                Some(text) => match parse_table(&text) {
                    Ok(t) => t,
                    Err(e) => {
                        p.flag("table", e.to_string());
                        builtin_ks_table()
                    }
                },
                None => builtin_ks_table(),
            };
            let export = p.parse("export", false);
            Plan::Ks(KsPlan { table, export })
        }
        Experiment::Fwt => {
            let policy = p.parse("policy", CollapsePolicy::Born);
            let bob = match p.text("bob", "in_context").as_str() {
                "in_context" => BobChoice::InContext,
                "any" => BobChoice::AnyRay,
                other => {
                    p.flag("bob", format!("`{other}` is not `in_context` or `any`"));
                    BobChoice::InContext
                }
            };
            let records = p.parse("records", false);
            Plan::Fwt(FwtPlan {
                policy,
                bob,
                trials: trials(10_000),
                records,
            })
        }
        Experiment::Signal => {
            let shared = match p.text("state", "bell").as_str() {
                "bell" => StateVector::from_real(&[1.0, 0.0, 0.0, 1.0]).expect("bell"),
                "product" => StateVector::from_real(&[1.0, 1.0, 1.0, 1.0]).expect("product"),
                other => {
                    p.flag("state", format!("`{other}` is not `bell` or `product`"));
                    StateVector::basis(4, 0)
                }
            };
            let basis = |key: &str, p: &mut Params| {
                let name = p.text(key, "z");
                qubit_basis(&name).unwrap_or_else(|| {
                    p.flag(key, format!("`{name}` is not one of z, x, y"));
                    ProjectiveMeasurement::computational(2)
                })
            };
            let b0 = basis("basis0", &mut p);
            let b1 = basis("basis1", &mut p);
            let bob = basis("bob_basis", &mut p);
            let policy0 = p.parse("policy0", CollapsePolicy::Born);
            let policy1 = p.parse("policy1", CollapsePolicy::Born);
            let trials = match p.text("mode", "analytic").as_str() {
                "analytic" => None,
                "empirical" => Some(trials(100_000)),
                other => {
                    p.flag("mode", format!("`{other}` is not `analytic` or `empirical`"));
                    None
                }
            };
            let settings = vec![
                AliceSetting {
                    label: format!("0:{}", p.text("basis0", "z")),
                    measurement: b0,
                    policy: policy0,
                },
                AliceSetting {
                    label: format!("1:{}", p.text("basis1", "z")),
                    measurement: b1,
                    policy: policy1,
                },
            ];
            Plan::Signal(SignalPlan {
                shared,
                settings,
                bob,
                trials,
            })
        }
        Experiment::Energy => {
            if p.raw("energies").is_some() && p.raw("hamiltonian").is_some() {
                p.flag("hamiltonian", "give either `energies` or `hamiltonian`, not both");
            }
            let dense = p.raw("hamiltonian").map(|text| {
                let rows: Vec<Vec<f64>> = text
                    .split(';')
                    .map(parse_f64_list)
                    .collect::<Result<_>>()
                    .unwrap_or_default();
                rows
            });
            let (h, diagonal) = match dense {
                Some(rows) => {
                    let d = rows.len();
                    if d == 0 || rows.iter().any(|r| r.len() != d) {
                        p.flag("hamiltonian", "expected a square matrix, rows separated by `;`");
                        (Hamiltonian::diagonal(&[1.0, -1.0]), true)
                    } else {
                        let m = DMatrix::from_fn(d, d, |i, j| re(rows[i][j]));
                        match Hamiltonian::new(m) {
                            Ok(h) => (h, false),
                            Err(e) => {
                                p.flag("hamiltonian", e.to_string());
                                (Hamiltonian::diagonal(&[1.0, -1.0]), true)
                            }
                        }
                    }
                }
                None => (Hamiltonian::diagonal(&p.list("energies", &[1.0, -1.0])), true),
            };
            let dim = h.dim();
            let amps = p.list("state", &{
                let mut v = vec![0.0; dim];
                v.iter_mut().take(2).for_each(|x| *x = 1.0);
                v
            });
            let rho = match StateVector::from_real(&amps) {
                Ok(s) if s.dim() == dim => s.density(),
                Ok(_) => {
                    p.flag("state", format!("state must have {dim} amplitudes"));
                    StateVector::basis(dim, 0).density()
                }
                Err(e) => {
                    p.flag("state", e.to_string());
                    StateVector::basis(dim, 0).density()
                }
            };
            let (measurement, default_eigs) = match p.text("basis", "energy").as_str() {
                "energy" if diagonal => (
                    ProjectiveMeasurement::computational(dim),
                    (0..dim).map(|i| h.matrix()[(i, i)].re).collect(),
                ),
                "energy" => energy_basis(&h).unwrap_or_else(|_| (ProjectiveMeasurement::computational(dim), vec![0.0; dim])),
                "computational" => (
                    ProjectiveMeasurement::computational(dim),
                    (0..dim).map(|i| h.matrix()[(i, i)].re).collect(),
                ),
                other => {
                    p.flag("basis", format!("`{other}` is not `energy` or `computational`"));
                    (ProjectiveMeasurement::computational(dim), vec![0.0; dim])
                }
            };
            let eigenvalues = p.list("eigenvalues", &default_eigs);
            if eigenvalues.len() != measurement.outcomes() {
                p.flag("eigenvalues", format!("expected {} values", measurement.outcomes()));
            }
            let weights = match p.raw("weights") {
                None | Some("born") => None,
                Some(text) => match parse_f64_list(text).and_then(ProbabilityDistribution::new) {
                    Ok(w) if w.len() == measurement.outcomes() => Some(w),
                    Ok(_) => {
                        p.flag("weights", format!("expected {} weights", measurement.outcomes()));
                        None
                    }
                    Err(e) => {
                        p.flag("weights", e.to_string());
                        None
                    }
                },
            };
            Plan::Energy(EnergyPlan {
                rho,
                h,
                measurement,
                eigenvalues,
                weights,
            })
        }
        Experiment::Sat => {
            let sources = ["cnf", "truth_table", "n"]
                .iter()
                .filter(|k| p.raw(k).is_some())
                .count();
            if sources > 1 {
                p.flag("cnf", "give exactly one of `cnf`, `truth_table`, `n`");
            }
            let fixed = if let Some(text) = p.file("cnf") {
                OracleFunction::parse_cnf(&text)
                    .map_err(|e| p.flag("cnf", e.to_string()))
                    .ok()
            } else if let Some(text) = p.file("truth_table") {
                OracleFunction::parse_truth_table(&text)
                    .map_err(|e| p.flag("truth_table", e.to_string()))
                    .ok()
            } else {
                None
            };
            let n: usize = p.parse("n", 8);
            if n == 0 || n > MAX_BITS {
                p.flag("n", format!("n = {n} violates the cap 1 ≤ n ≤ {MAX_BITS}"));
            }
            let density: f64 = p.parse("density", 1.0 / (1u64 << n.min(62)) as f64);
            if !(0.0..=1.0).contains(&density) {
                p.flag("density", "must lie in [0, 1]");
            }
            let records = p.parse("records", false);
            let (source, default_trials) = match fixed {
                Some(f) => (SatSource::Fixed(f), 1),
                None => (SatSource::Random { n, density }, 100),
            };
            Plan::Sat(SatPlan {
                source,
                trials: trials(default_trials),
                records,
            })
        }
        Experiment::Asc => {
            let labels: Vec<String> = p
                .text("labels", "tap,dont_tap")
                .split(',')
                .map(|s| s.trim().to_string())
                .collect();
            let priorities = p.list("priorities", &[0.36, 0.64]);
            let norm_values = p.list("norm", &[0.0, 1.0]);
            let alts = AlternativeSet::new(labels.clone(), priorities).unwrap_or_else(|e| {
                p.flag("priorities", e.to_string());
                AlternativeSet::new(vec!["a"], vec![1.0]).expect("valid")
            });
            if norm_values.len() != labels.len() {
                p.flag("norm", format!("expected {} values, one per label", labels.len()));
            }
            let norm = NormFunction::new(labels.into_iter().zip(norm_values));
            let mixing: f64 = p.parse("mixing", 1.0);
            if !(0.0..=1.0).contains(&mixing) {
                p.flag("mixing", "must lie in [0, 1]");
            }
            let records = p.parse("records", false);
            Plan::Asc(AscPlan {
                alts,
                norm,
                mixing,
                trials: trials(10_000),
                records,
            })
        }
        Experiment::Behavior => {
            let model = match p.text("model", "pareto").as_str() {
                "exponential" => IntervalModel::Exponential {
                    rate: p.parse("rate", 1.0),
                },
                "pareto" => IntervalModel::Pareto {
                    alpha: p.parse("alpha", 1.5),
                    xmin: p.parse("xmin", 1.0),
                },
                other => {
                    p.flag("model", format!("`{other}` is not `exponential` or `pareto`"));
                    IntervalModel::Exponential { rate: 1.0 }
                }
            };
            let length: usize = p.parse("length", 10_000);
            let defaults = Thresholds::default();
            let thresholds = Thresholds {
                levy_below: p.parse("levy_below", defaults.levy_below),
                noise_above: p.parse("noise_above", defaults.noise_above),
            };
            if thresholds.levy_below > thresholds.noise_above {
                p.flag("levy_below", "must not exceed `noise_above`");
            }
            match p.text("mode", "classify").as_str() {
                "generate" => {
                    if length < crate::behavior::MIN_ANALYSIS_LEN {
                        p.flag("length", format!("must be at least {}", crate::behavior::MIN_ANALYSIS_LEN));
                    }
                    Plan::Behavior(BehaviorPlan::Generate { model, length, thresholds })
                }
                "classify" => {
                    if let Some(text) = p.file("input") {
                        match EventSequence::parse(&text) {
                            Ok(seq) => Plan::Behavior(BehaviorPlan::ClassifyFile { seq, thresholds }),
                            Err(e) => {
                                p.flag("input", e.to_string());
                                Plan::Behavior(BehaviorPlan::ClassifyGenerated { model, length, thresholds, trials: 1 })
                            }
                        }
                    } else {
                        if length < crate::behavior::MIN_CLASSIFY_LEN {
                            p.flag("length", format!("classification needs at least {}", crate::behavior::MIN_CLASSIFY_LEN));
                        }
                        Plan::Behavior(BehaviorPlan::ClassifyGenerated { model, length, thresholds, trials: trials(1) })
                    }
                }
                other => {
                    p.flag("mode", format!("`{other}` is not `generate` or `classify`"));
                    Plan::Behavior(BehaviorPlan::Generate { model, length, thresholds })
                }
            }
        }
    };
    p.finish(plan)
}

/// Every problem that would stop `config` from running; empty when runnable.
pub fn validate(config: &ExperimentConfig) -> Vec<ConfigViolation> {
    match plan(config) {
        Ok(_) => Vec::new(),
        Err(v) => v,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub records: Vec<Value>,
    pub aggregate: Value,
    pub duration_seconds: f64,
    /// Raw text output (an exported table or a generated sequence).
    #[serde(skip)]
    pub artifact: Option<String>,
}

impl ExperimentReport {
    /// JSON lines; every line but the last is independent of wall-clock time.
    pub fn to_json_lines(&self) -> String {
        let mut out = String::new();
        let mut push = |v: Value| {
            out.push_str(&serde_json::to_string(&v).expect("serializable"));
            out.push('\n');
        };
        push(json!({ "type": "config", "config": self.config }));
        for r in &self.records {
            push(json!({ "type": "record", "record": r }));
        }
        push(json!({ "type": "aggregate", "aggregate": self.aggregate }));
        push(json!({ "type": "duration", "seconds": self.duration_seconds }));
        out
    }

    /// Flattened aggregate as `key,value` rows.
    pub fn to_csv(&self) -> String {
        let mut rows = Vec::new();
        flatten("", &self.aggregate, &mut rows);
        let mut out = String::from("key,value\n");
        for (k, v) in rows {
            out.push_str(&csv_field(&k));
            out.push(',');
            out.push_str(&csv_field(&v));
            out.push('\n');
        }
        out
    }

    pub fn render(&self) -> String {
        match self.config.format {
            OutputFormat::JsonLines => self.to_json_lines(),
            OutputFormat::Csv => self.to_csv(),
        }
    }
}

fn flatten(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
    match v {
        Value::Object(map) => {
            for (k, v) in map {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&key, v, out);
            }
        }
        Value::String(s) => out.push((prefix.to_string(), s.clone())),
        other => out.push((prefix.to_string(), other.to_string())),
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("serializable")
}

/// Validates `config` and runs the named harness.
pub fn run(config: &ExperimentConfig) -> Result<ExperimentReport> {
    let start = Instant::now();
    let plan = plan(config).map_err(|v| {
        Error::Config(
            v.iter()
                .map(ToString::to_string)
                .collect::<Vec<_>>()
                .join("; "),
        )
    })?;
    let experiment: Experiment = config.experiment.parse()?;
    let context = |e: Error| Error::Config(format!("{experiment}: {e}"));
    let (aggregate, records, artifact) = match plan {
        Plan::Ks(plan) => run_ks(plan).map_err(context)?,
        Plan::Fwt(plan) => run_fwt_plan(plan, config.seed).map_err(context)?,
        Plan::Signal(plan) => run_signal(plan, config.seed).map_err(context)?,
        Plan::Energy(plan) => run_energy(plan).map_err(context)?,
        Plan::Sat(plan) => run_sat(plan, config.seed).map_err(context)?,
        Plan::Asc(plan) => run_asc_plan(plan, config.seed).map_err(context)?,
        Plan::Behavior(plan) => run_behavior(plan, config.seed).map_err(context)?,
    };
    Ok(ExperimentReport {
        config: config.clone(),
        records,
        aggregate,
        duration_seconds: start.elapsed().as_secs_f64(),
        artifact,
    })
}

type Outcome = (Value, Vec<Value>, Option<String>);

fn run_ks(plan: KsPlan) -> Result<Outcome> {
    let violations = validate_table(&plan.table);
    let coloring = ks_coloring_search(&plan.table)?;
    let parity = parity_certificate(&plan.table)?;
    let aggregate = json!({
        "contexts": plan.table.contexts().len(),
        "distinct_rays": plan.table.rays().len(),
        "violations": violations.iter().map(ToString::to_string).collect::<Vec<_>>(),
        "colorable": coloring.colorable,
        "assignments_found": coloring.assignments_found,
        "search_space_size": coloring.search_space_size,
        "parity_certificate": parity,
    });
    let artifact = plan.export.then(|| format_table(&plan.table));
    Ok((aggregate, Vec::new(), artifact))
}

fn run_fwt_plan(plan: FwtPlan, seed: u64) -> Result<Outcome> {
    let setup = FwtSetup::new(builtin_ks_table())?;
    let summary = run_fwt(&setup, &plan.policy, plan.bob, plan.trials, seed)?;
    let aggregate = json!({
        "policy": plan.policy.to_string(),
        "bob": plan.bob,
        "trials": summary.trials,
        "in_context_trials": summary.in_context_trials,
        "agreements": summary.agreements,
        "agreement_rate": if summary.in_context_trials > 0 {
            summary.agreements as f64 / summary.in_context_trials as f64
        } else { 0.0 },
        "bob_detections": summary.bob_detections,
    });
    let records = if plan.records {
        summary.records.iter().map(to_value).collect()
    } else {
        Vec::new()
    };
    Ok((aggregate, records, None))
}

fn run_signal(plan: SignalPlan, seed: u64) -> Result<Outcome> {
    let report = signaling_experiment(&plan.shared, (2, 2), &plan.bob, &plan.settings, plan.trials, seed)?;
    Ok((to_value(&report), Vec::new(), None))
}

fn run_energy(plan: EnergyPlan) -> Result<Outcome> {
    let born = audit_measurement(&plan.rho, &plan.measurement, &plan.eigenvalues, &plan.h, None)?;
    let mut aggregate = Map::new();
    aggregate.insert("born".into(), to_value(&born));
    if let Some(w) = &plan.weights {
        let audit = audit_measurement(&plan.rho, &plan.measurement, &plan.eigenvalues, &plan.h, Some(w))?;
        aggregate.insert("weighted".into(), to_value(&audit));
        aggregate.insert("weights".into(), to_value(w));
    }
    Ok((Value::Object(aggregate), Vec::new(), None))
}

#[derive(Serialize)]
struct SatRecord {
    instance: u64,
    n: usize,
    solutions: usize,
    quantum: crate::sat::SatResult,
    classical: crate::sat::SatResult,
    agree: bool,
}

fn run_sat(plan: SatPlan, seed: u64) -> Result<Outcome> {
    let records = (0..plan.trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = trial_rng(seed, i);
            let f = match &plan.source {
                SatSource::Fixed(f) => f.clone(),
                SatSource::Random { n, density } => {
                    let mut gen = trial_rng(derive_seed(seed, u64::MAX), i);
                    let table = (0..1usize << n).map(|_| gen.random::<f64>() < *density).collect();
                    OracleFunction::from_truth_table(table)?
                }
            };
            let quantum = decide_sat(&f, &mut rng)?;
            let classical = classical_brute_force(&f);
            Ok(SatRecord {
                instance: i,
                n: f.n(),
                solutions: f.satisfying_inputs().len(),
                agree: quantum.satisfiable == classical.satisfiable,
                quantum,
                classical,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let satisfiable = records.iter().filter(|r| r.quantum.satisfiable).count();
    let agreements = records.iter().filter(|r| r.agree).count();
    let mut aggregate = json!({
        "instances": records.len(),
        "satisfiable": satisfiable,
        "agreements": agreements,
        "queries_quantum": records.iter().map(|r| r.quantum.queries_quantum).sum::<u64>(),
    });
    if let [single] = records.as_slice() {
        aggregate["satisfiable"] = json!(single.quantum.satisfiable);
        aggregate["witness"] = json!(single.quantum.witness);
        aggregate["classical"] = to_value(&single.classical);
        aggregate["queries_classical_oracle"] = json!(single.quantum.queries_classical_oracle);
    }
    let records = if plan.records {
        records.iter().map(to_value).collect()
    } else {
        Vec::new()
    };
    Ok((aggregate, records, None))
}

fn run_asc_plan(plan: AscPlan, seed: u64) -> Result<Outcome> {
    let summary = run_asc(&plan.alts, &plan.norm, plan.mixing, plan.trials, seed, plan.records)?;
    let robot = nr_act(&plan.alts, &plan.norm)?;
    let first = crate::asc::act_mixed(&plan.alts, &plan.norm, plan.mixing, &mut trial_rng(seed, 0))?;
    let distinction = distinguish_traces(&first, &robot);
    let mut aggregate = to_value(&summary);
    if let Value::Object(map) = &mut aggregate {
        map.remove("traces");
        map.insert("labels".into(), to_value(&plan.alts.labels()));
        map.insert("mixing".into(), json!(plan.mixing));
        map.insert("robot".into(), to_value(&robot));
        map.insert("distinction".into(), to_value(&distinction));
    }
    let records = summary.traces.iter().map(to_value).collect();
    Ok((aggregate, records, None))
}

fn run_behavior(plan: BehaviorPlan, seed: u64) -> Result<Outcome> {
    match plan {
        BehaviorPlan::Generate { model, length, thresholds } => {
            let seq = generate_sequence(model, length, &mut trial_rng(seed, 0))?;
            let mean = seq.intervals().iter().sum::<f64>() / seq.len() as f64;
            let mut aggregate = json!({
                "model": model,
                "length": length,
                "mean": mean,
            });
            if length >= crate::behavior::MIN_CLASSIFY_LEN {
                aggregate["pattern"] = to_value(&classify_with(&seq, thresholds)?);
            }
            Ok((aggregate, Vec::new(), Some(seq.to_text())))
        }
        BehaviorPlan::ClassifyFile { seq, thresholds } => {
            let report = classify_with(&seq, thresholds)?;
            Ok((to_value(&report), Vec::new(), None))
        }
        BehaviorPlan::ClassifyGenerated { model, length, thresholds, trials } => {
            let reports = (0..trials)
                .into_par_iter()
                .map(|i| {
                    let seq = generate_sequence(model, length, &mut trial_rng(seed, i))?;
                    classify_with(&seq, thresholds)
                })
                .collect::<Result<Vec<_>>>()?;
            let count = |p: Pattern| reports.iter().filter(|r| r.classification == p).count();
            let aggregate = json!({
                "model": model,
                "length": length,
                "sequences": trials,
                "levy_like": count(Pattern::LevyLike),
                "noise_like": count(Pattern::NoiseLike),
                "indeterminate": count(Pattern::Indeterminate),
                "mean_tail_exponent": reports.iter().map(|r| r.tail_exponent).sum::<f64>() / reports.len() as f64,
            });
            let records = if trials <= 1000 {
                reports.iter().map(to_value).collect()
            } else {
                Vec::new()
            };
            Ok((aggregate, records, None))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validate_examples() {
        assert!(validate(&ExperimentConfig::new("ks")).is_empty());
        let v = validate(&ExperimentConfig::new("xyz"));
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].key, "experiment");
        let v = validate(&ExperimentConfig::new("sat").with_param("n", 20));
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].key, "n");
        assert!(v[0].message.contains("≤ 12"));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let v = validate(&ExperimentConfig::new("ks").with_param("polcy", "born"));
        assert_eq!(v[0].key, "polcy");
        let v = validate(&ExperimentConfig::new("fwt").with_param("policy", "forced"));
        assert_eq!(v[0].key, "policy");
        let v = validate(&ExperimentConfig::new("asc").with_trials(0));
        assert_eq!(v[0].key, "trials");
    }

    #[test]
    fn toml_parsing() {
        let c = ExperimentConfig::from_toml("experiment = \"signal\"\nseed = 7\npolicy0 = \"forced:0\"\ntrials = 10\n").unwrap();
        assert_eq!(c.experiment, "signal");
        assert_eq!(c.seed, 7);
        assert_eq!(c.trials, Some(10));
        assert_eq!(c.params["policy0"], "forced:0");
        let c = ExperimentConfig::from_toml("experiment = \"asc\"\npriorities = [0.75, 0.25, 0]\n").unwrap();
        assert_eq!(c.params["priorities"], "0.75,0.25,0");
        assert!(ExperimentConfig::from_toml("seed = 1").is_err());
        assert!(ExperimentConfig::from_toml("experiment = \"ks\"\n[nested]\nx = 1").is_err());
        assert!(ExperimentConfig::from_toml("experiment = \"ks\"\nseed = -1").is_err());
    }

    #[test]
    fn ks_report() {
        let r = run(&ExperimentConfig::new("ks")).unwrap();
        assert_eq!(r.aggregate["colorable"], json!(false));
        assert_eq!(r.aggregate["search_space_size"], json!(262_144));
        assert_eq!(r.aggregate["parity_certificate"], json!(true));
    }

    #[test]
    fn signal_report() {
        let c = ExperimentConfig::new("signal")
            .with_param("policy0", "forced:0")
            .with_param("policy1", "forced:1");
        let r = run(&c).unwrap();
        let bits = r.aggregate["channel_bits"].as_f64().unwrap();
        assert!((bits - 1.0).abs() < 1e-6);
    }

    #[test]
    fn energy_report() {
        let c = ExperimentConfig::new("energy").with_param("weights", "1,0");
        let r = run(&c).unwrap();
        assert!(r.aggregate["born"]["delta"].as_f64().unwrap().abs() < 1e-12);
        assert!((r.aggregate["weighted"]["delta"].as_f64().unwrap() - 1.0).abs() < 1e-12);
        let c = ExperimentConfig::new("energy").with_param("hamiltonian", "0,1;1,0").with_param("state", "1,0");
        let r = run(&c).unwrap();
        assert_eq!(r.aggregate["born"]["commutes"], json!(true));
        let c = ExperimentConfig::new("energy").with_param("hamiltonian", "0,1;2,0");
        assert_eq!(validate(&c)[0].key, "hamiltonian");
    }

    #[test]
    fn random_sat_agrees() {
        let c = ExperimentConfig::new("sat").with_param("n", 6).with_trials(50);
        let r = run(&c).unwrap();
        assert_eq!(r.aggregate["agreements"], json!(50));
    }

    #[test]
    fn csv_output() {
        let mut c = ExperimentConfig::new("ks");
        c.format = OutputFormat::Csv;
        let text = run(&c).unwrap().render();
        assert!(text.starts_with("key,value\n"));
        assert!(text.contains("colorable,false\n"));
    }

    #[test]
    fn echo_revalidates() {
        let c = ExperimentConfig::new("asc")
            .with_param("labels", "a,b,c")
            .with_param("priorities", "3/4,1/4,0")
            .with_param("norm", "0,1,0")
            .with_seed(99)
            .with_trials(100);
        let r = run(&c).unwrap();
        let first = r.to_json_lines().lines().next().unwrap().to_string();
        let v: Value = serde_json::from_str(&first).unwrap();
        let back = ExperimentConfig::from_echo(&v["config"]).unwrap();
        assert_eq!(back, c);
        assert!(validate(&back).is_empty());
    }
}
