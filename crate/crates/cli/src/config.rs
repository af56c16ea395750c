//! Flat `key = value` experiment configuration.
//!
//! ```text
//! # comments start with '#'
//! preset = sparse-vs-dense-least-squares
//! problem.n = 5000
//! opt.algorithms = sparse-spiderboost, spiderboost
//! run.seeds = 1, 2, 3
//! ```
//!
//! A `preset` line loads a named configuration first; every other line
//! overrides it. Keys may appear once each.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use sparse_vr::optimize::{default_sparsity, Algorithm, InnerMode, OutputMode, Schedule};
use sparse_vr::problems::dataset::DatasetKind;
use sparse_vr::problems::synth::GenParams;
use thiserror::Error;

use crate::presets;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: duplicate key `{key}` (first set on line {first})")]
    DuplicateKey { line: usize, key: String, first: usize },
    #[error("unknown preset `{0}`")]
    UnknownPreset(String),
    #[error("missing required key `{0}`")]
    Missing(&'static str),
    #[error("`{key}`: {message}")]
    Invalid { key: String, message: String },
}

fn bad(key: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        key: key.to_string(),
        message: message.into(),
    }
}

/// Every accepted key.
pub const KEYS: &[&str] = &[
    "preset",
    "problem.kind",
    "problem.path",
    "problem.model",
    "problem.data_seed",
    "problem.n",
    "problem.d",
    "problem.active",
    "problem.noise",
    "problem.signal",
    "problem.feature_scale",
    "problem.background",
    "problem.separation",
    "problem.users",
    "problem.items",
    "problem.rank",
    "problem.observed",
    "problem.ridge",
    "problem.hidden",
    "problem.model_rank",
    "opt.algorithms",
    "opt.eta",
    "opt.m",
    "opt.outer_loops",
    "opt.big_batch",
    "opt.small_batch",
    "opt.alpha",
    "opt.k1",
    "opt.k2",
    "opt.per_block",
    "opt.schedule",
    "opt.schedule_start",
    "opt.schedule_end",
    "opt.capture_every",
    "opt.stop_grad_norm",
    "opt.hyper",
    "opt.epsilon",
    "opt.sgd_eta",
    "opt.sgd_batch",
    "opt.sgd_steps",
    "opt.sgd_decay",
    "run.name",
    "run.seeds",
    "run.mode",
    "run.out",
    "run.jobs",
    "run.bin_width",
    "run.record_wall_time",
    "run.exact_grad_norm",
];

/// Objective built on top of the data.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Model {
    LeastSquares,
    Logistic,
    Mlp,
    Factorization,
}

impl Model {
    pub fn as_str(&self) -> &'static str {
        match self {
            Model::LeastSquares => "least-squares",
            Model::Logistic => "logistic",
            Model::Mlp => "mlp",
            Model::Factorization => "factorization",
        }
    }

    fn default_for(kind: DatasetKind) -> Self {
        match kind {
            DatasetKind::GaussianLs | DatasetKind::PlantedSparseLs => Model::LeastSquares,
            DatasetKind::LogisticBlobs => Model::Logistic,
            DatasetKind::LowRankRatings => Model::Factorization,
        }
    }
}

impl FromStr for Model {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "least-squares" => Ok(Model::LeastSquares),
            "logistic" => Ok(Model::Logistic),
            "mlp" => Ok(Model::Mlp),
            "factorization" => Ok(Model::Factorization),
            _ => Err(format!("unknown model `{s}`")),
        }
    }
}

/// Where the data comes from.
#[derive(Clone, Debug, PartialEq)]
pub enum DataSource {
    Generated {
        kind: DatasetKind,
        params: GenParams,
        data_seed: u64,
    },
    File(PathBuf),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProblemSpec {
    pub source: DataSource,
    pub model: Model,
    pub ridge: f64,
    /// Hidden layer widths for the MLP.
    pub hidden: Vec<usize>,
    /// Factor rank for matrix factorization.
    pub model_rank: usize,
}

/// Calculator used to set `B`, `m`, `eta` and `T`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HyperMode {
    Manual,
    WorstCase,
    DataAdaptive,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Theory,
    Implementation,
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "theory" => Ok(Mode::Theory),
            "impl" | "implementation" => Ok(Mode::Implementation),
            _ => Err(format!("expected `theory` or `impl`, got `{s}`")),
        }
    }
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Theory => "theory",
            Mode::Implementation => "impl",
        }
    }

    pub fn inner_mode(&self) -> InnerMode {
        match self {
            Mode::Theory => InnerMode::Geometric,
            Mode::Implementation => InnerMode::Fixed,
        }
    }

    pub fn output_mode(&self) -> OutputMode {
        match self {
            Mode::Theory => OutputMode::Uniform,
            Mode::Implementation => OutputMode::Last,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OptSpec {
    pub algorithms: Vec<Algorithm>,
    pub eta: f64,
    pub m: usize,
    pub outer_loops: usize,
    pub big_batch: usize,
    pub small_batch: usize,
    pub alpha: f64,
    /// `None` means the default share of the problem dimension.
    pub k1: Option<usize>,
    pub k2: Option<usize>,
    pub per_block: bool,
    pub schedule: Schedule,
    pub capture_every: usize,
    pub stop_grad_norm: Option<f64>,
    pub hyper: HyperMode,
    pub epsilon: Option<f64>,
    pub sgd_eta: Option<f64>,
    pub sgd_batch: Option<usize>,
    /// `None` matches the dense SpiderBoost query budget.
    pub sgd_steps: Option<u64>,
    pub sgd_decay: Option<f64>,
}

impl OptSpec {
    /// `(k1, k2)` for a problem of dimension `d`.
    pub fn sparsity(&self, d: usize) -> (usize, usize) {
        let (k1, k2) = default_sparsity(d);
        (self.k1.unwrap_or(k1), self.k2.unwrap_or(k2))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunSpec {
    /// Prefix of every output file.
    pub name: String,
    pub seeds: Vec<u64>,
    pub mode: Mode,
    pub out: PathBuf,
    pub jobs: usize,
    /// Width of the `queries_over_n` bins in the aggregate.
    pub bin_width: f64,
    pub record_wall_time: bool,
    pub exact_grad_norm: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentSpec {
    pub problem: ProblemSpec,
    pub opt: OptSpec,
    pub run: RunSpec,
    /// Resolved `key = value` lines, echoed into output headers.
    pub echo: Vec<(String, String)>,
}

#[derive(Clone, Debug)]
struct Entry {
    line: usize,
    value: String,
}

/// Splits text into entries, rejecting bad syntax, unknown and duplicate keys.
fn entries(text: &str) -> Result<BTreeMap<String, Entry>, ConfigError> {
    let mut out: BTreeMap<String, Entry> = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.trim();
        if content.is_empty() || content.starts_with('#') {
            continue;
        }
        let (key, value) = content.split_once('=').ok_or(ConfigError::Syntax { line })?;
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() {
            return Err(ConfigError::Syntax { line });
        }
        if !KEYS.contains(&key) {
            return Err(ConfigError::UnknownKey {
                line,
                key: key.to_string(),
            });
        }
        if let Some(prev) = out.get(key) {
            return Err(ConfigError::DuplicateKey {
                line,
                key: key.to_string(),
                first: prev.line,
            });
        }
        out.insert(
            key.to_string(),
            Entry {
                line,
                value: value.to_string(),
            },
        );
    }
    Ok(out)
}

struct Values {
    map: BTreeMap<String, String>,
}

impl Values {
    fn raw(&self, key: &str) -> Option<&str> {
        self.map.get(key).map(String::as_str)
    }

    fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>, ConfigError>
    where
        T::Err: std::fmt::Display,
    {
        self.raw(key)
            .map(|v| v.parse::<T>().map_err(|e| bad(key, format!("cannot parse `{v}`: {e}"))))
            .transpose()
    }

    fn or<T: FromStr>(&self, key: &str, default: T) -> Result<T, ConfigError>
    where
        T::Err: std::fmt::Display,
    {
        Ok(self.get(key)?.unwrap_or(default))
    }

    fn list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>, ConfigError>
    where
        T::Err: std::fmt::Display,
    {
        let Some(v) = self.raw(key) else { return Ok(None) };
        v.split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| s.parse::<T>().map_err(|e| bad(key, format!("cannot parse `{s}`: {e}"))))
            .collect::<Result<Vec<T>, _>>()
            .map(Some)
    }
}

/// Parses and validates a configuration.
pub fn parse_config(text: &str) -> Result<ExperimentSpec, ConfigError> {
    let user = entries(text)?;
    let mut merged: BTreeMap<String, String> = BTreeMap::new();
    if let Some(name) = user.get("preset") {
        let preset = presets::text(&name.value).ok_or_else(|| ConfigError::UnknownPreset(name.value.clone()))?;
        for (k, e) in entries(preset).expect("presets are valid") {
            merged.insert(k, e.value);
        }
    }
    for (k, e) in user {
        merged.insert(k, e.value);
    }
    build(Values { map: merged })
}

fn positive(key: &str, v: f64) -> Result<f64, ConfigError> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(bad(key, "must be positive and finite"))
    }
}

fn at_least_one(key: &str, v: usize) -> Result<usize, ConfigError> {
    if v >= 1 {
        Ok(v)
    } else {
        Err(bad(key, "must be at least 1"))
    }
}

fn build(v: Values) -> Result<ExperimentSpec, ConfigError> {
    let problem = problem_spec(&v)?;
    let opt = opt_spec(&v)?;
    let run = run_spec(&v)?;

    // static dimension checks; model-dependent ones happen once the problem is built
    if let (DataSource::Generated { params, .. }, Model::LeastSquares | Model::Logistic) = (&problem.source, problem.model)
    {
        check_sparsity(&opt, params.d)?;
    }
    if opt.hyper != HyperMode::Manual && opt.epsilon.is_none() {
        return Err(ConfigError::Missing("opt.epsilon"));
    }
    if opt.stop_grad_norm.is_some() && !run.exact_grad_norm {
        return Err(bad("opt.stop_grad_norm", "needs run.exact_grad_norm = true"));
    }

    let mut echo: Vec<(String, String)> = v.map.into_iter().collect();
    echo.retain(|(k, _)| k != "run.out" && k != "run.jobs");
    Ok(ExperimentSpec {
        problem,
        opt,
        run,
        echo,
    })
}

/// Checks `k1 + k2 <= d` and `k2 >= 1` unless `k1 = d`.
pub fn check_sparsity(opt: &OptSpec, d: usize) -> Result<(), ConfigError> {
    let (k1, k2) = opt.sparsity(d);
    if k1 + k2 > d {
        return Err(bad("opt.k2", format!("k1 + k2 = {} exceeds d = {d}", k1 + k2)));
    }
    if k1 + k2 == 0 || (k2 == 0 && k1 < d) {
        return Err(bad("opt.k2", "k2 must be positive unless k1 = d"));
    }
    Ok(())
}

fn problem_spec(v: &Values) -> Result<ProblemSpec, ConfigError> {
    let kind: Option<DatasetKind> = v.get("problem.kind")?;
    let path: Option<PathBuf> = v.get("problem.path")?;
    let base = GenParams::default();
    let params = GenParams {
        n: at_least_one("problem.n", v.or("problem.n", base.n)?)?,
        d: at_least_one("problem.d", v.or("problem.d", base.d)?)?,
        active: v.or("problem.active", base.active)?,
        noise: v.or("problem.noise", base.noise)?,
        signal: v.or("problem.signal", base.signal)?,
        feature_scale: v.or("problem.feature_scale", base.feature_scale)?,
        background: v.or("problem.background", base.background)?,
        separation: v.or("problem.separation", base.separation)?,
        users: at_least_one("problem.users", v.or("problem.users", base.users)?)?,
        items: at_least_one("problem.items", v.or("problem.items", base.items)?)?,
        rank: at_least_one("problem.rank", v.or("problem.rank", base.rank)?)?,
        observed: at_least_one("problem.observed", v.or("problem.observed", base.observed)?)?,
    };
    let (source, default_model) = match (kind, path) {
        (Some(_), Some(_)) => return Err(bad("problem.path", "give either problem.kind or problem.path")),
        (None, None) => return Err(ConfigError::Missing("problem.kind")),
        (Some(kind), None) => {
            if kind == DatasetKind::PlantedSparseLs && params.active > params.d {
                return Err(bad("problem.active", "exceeds problem.d"));
            }
            let data_seed = v.or("problem.data_seed", 0u64)?;
            (
                DataSource::Generated {
                    kind,
                    params: params.clone(),
                    data_seed,
                },
                Some(Model::default_for(kind)),
            )
        }
        (None, Some(path)) => (DataSource::File(path), None),
    };
    let model = match (v.get::<Model>("problem.model")?, default_model) {
        (Some(m), _) | (None, Some(m)) => m,
        (None, None) => return Err(ConfigError::Missing("problem.model")),
    };
    let ridge: f64 = v.or("problem.ridge", 0.0)?;
    if !(ridge >= 0.0 && ridge.is_finite()) {
        return Err(bad("problem.ridge", "must be nonnegative"));
    }
    let hidden = v.list::<usize>("problem.hidden")?.unwrap_or_else(|| vec![16]);
    if hidden.contains(&0) {
        return Err(bad("problem.hidden", "layer widths must be positive"));
    }
    let model_rank = at_least_one("problem.model_rank", v.or("problem.model_rank", params.rank)?)?;
    Ok(ProblemSpec {
        source,
        model,
        ridge,
        hidden,
        model_rank,
    })
}

fn opt_spec(v: &Values) -> Result<OptSpec, ConfigError> {
    let algorithms = v
        .list::<Algorithm>("opt.algorithms")?
        .unwrap_or_else(|| vec![Algorithm::SparseSpiderBoost, Algorithm::SpiderBoost]);
    if algorithms.is_empty() {
        return Err(bad("opt.algorithms", "list is empty"));
    }
    for (i, a) in algorithms.iter().enumerate() {
        if algorithms[..i].contains(a) {
            return Err(bad("opt.algorithms", format!("`{a}` listed twice")));
        }
    }
    let schedule = match v.raw("opt.schedule").unwrap_or("constant") {
        "constant" => Schedule::Constant,
        "inner-linear" => Schedule::InnerLinear {
            start: positive("opt.schedule_start", v.get("opt.schedule_start")?.ok_or(ConfigError::Missing("opt.schedule_start"))?)?,
            end: positive("opt.schedule_end", v.get("opt.schedule_end")?.ok_or(ConfigError::Missing("opt.schedule_end"))?)?,
        },
        other => return Err(bad("opt.schedule", format!("expected `constant` or `inner-linear`, got `{other}`"))),
    };
    let hyper = match v.raw("opt.hyper").unwrap_or("manual") {
        "manual" => HyperMode::Manual,
        "worst-case" => HyperMode::WorstCase,
        "data-adaptive" => HyperMode::DataAdaptive,
        other => return Err(bad("opt.hyper", format!("expected manual, worst-case or data-adaptive, got `{other}`"))),
    };
    let alpha: f64 = v.or("opt.alpha", 0.5)?;
    if !(0.0..=1.0).contains(&alpha) {
        return Err(bad("opt.alpha", "must lie in [0, 1]"));
    }
    let big_batch = at_least_one("opt.big_batch", v.or("opt.big_batch", 1000)?)?;
    let small_batch = at_least_one("opt.small_batch", v.or("opt.small_batch", 100)?)?;
    let opt = OptSpec {
        algorithms,
        eta: positive("opt.eta", v.or("opt.eta", 0.1)?)?,
        m: at_least_one("opt.m", v.or("opt.m", 10)?)?,
        outer_loops: at_least_one("opt.outer_loops", v.or("opt.outer_loops", 10)?)?,
        big_batch,
        small_batch,
        alpha,
        k1: v.get("opt.k1")?,
        k2: v.get("opt.k2")?,
        per_block: v.or("opt.per_block", true)?,
        schedule,
        capture_every: v.or("opt.capture_every", 0)?,
        stop_grad_norm: v.get::<f64>("opt.stop_grad_norm")?.map(|e| positive("opt.stop_grad_norm", e)).transpose()?,
        hyper,
        epsilon: v.get::<f64>("opt.epsilon")?.map(|e| positive("opt.epsilon", e)).transpose()?,
        sgd_eta: v.get::<f64>("opt.sgd_eta")?.map(|e| positive("opt.sgd_eta", e)).transpose()?,
        sgd_batch: v.get::<usize>("opt.sgd_batch")?.map(|b| at_least_one("opt.sgd_batch", b)).transpose()?,
        sgd_steps: v.get("opt.sgd_steps")?,
        sgd_decay: v.get("opt.sgd_decay")?,
    };
    if opt.sgd_decay.is_some_and(|r| !(r >= 0.0 && r.is_finite())) {
        return Err(bad("opt.sgd_decay", "must be nonnegative"));
    }
    Ok(opt)
}

fn run_spec(v: &Values) -> Result<RunSpec, ConfigError> {
    let seeds = v.list::<u64>("run.seeds")?.unwrap_or_else(|| vec![0]);
    if seeds.is_empty() {
        return Err(bad("run.seeds", "list is empty"));
    }
    for (i, s) in seeds.iter().enumerate() {
        if seeds[..i].contains(s) {
            return Err(bad("run.seeds", format!("seed {s} listed twice")));
        }
    }
    let name = v.raw("run.name").or(v.raw("preset")).unwrap_or("experiment").to_string();
    if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_') {
        return Err(bad("run.name", "use letters, digits, '-' and '_' only"));
    }
    Ok(RunSpec {
        name,
        seeds,
        mode: v.or("run.mode", Mode::Implementation)?,
        out: v.or("run.out", PathBuf::from("results"))?,
        jobs: at_least_one("run.jobs", v.or("run.jobs", 1)?)?,
        bin_width: positive("run.bin_width", v.or("run.bin_width", 1.0)?)?,
        record_wall_time: v.or("run.record_wall_time", false)?,
        exact_grad_norm: v.or("run.exact_grad_norm", true)?,
    })
}

impl ExperimentSpec {
    /// The resolved configuration as `# key = value` comment lines.
    pub fn echo_lines(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.echo {
            let _ = writeln!(out, "# {k} = {v}");
        }
        let _ = writeln!(out, "# run.mode = {}", self.run.mode.as_str());
        out
    }

    /// Replaces the seed list, as `--seed` does.
    pub fn set_seed(&mut self, seed: u64) {
        self.run.seeds = vec![seed];
        set_echo(&mut self.echo, "run.seeds", seed.to_string());
    }

    pub fn set_mode(&mut self, mode: Mode) {
        self.run.mode = mode;
        self.echo.retain(|(k, _)| k != "run.mode");
    }
}

fn set_echo(echo: &mut Vec<(String, String)>, key: &str, value: String) {
    match echo.iter_mut().find(|(k, _)| k == key) {
        Some(e) => e.1 = value,
        None => {
            echo.push((key.to_string(), value));
            echo.sort();
        }
    }
}
