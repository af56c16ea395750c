//! Experiment orchestration and CSV output.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use sparse_vr::optimize::{
    data_adaptive_hyperparams, run_sgd, run_sparse_spiderboost, run_spiderboost_dense, worst_case_hyperparams,
    Algorithm, HyperparamInputs, Hyperparams, RunConfig, RunOutput, RunStatus, SgdConfig,
};
use sparse_vr::problems::dataset::Dataset;
use sparse_vr::problems::synth::generate;
use sparse_vr::problems::{estimate_constants, FiniteSumProblem};
use sparse_vr::sampling::{streams, RngStream};

use crate::config::{check_sparsity, DataSource, ExperimentSpec, HyperMode, Model, ProblemSpec};

pub const CSV_COLUMNS: &str = "j,N_j,queries_over_n,loss,grad_norm,entropy_bits,wall_ms";
pub const AGGREGATE_COLUMNS: &str = "algorithm,queries_over_n,runs,mean_loss,min_loss,max_loss,mean_grad_norm";

pub fn load_dataset(problem: &ProblemSpec) -> Result<Dataset> {
    match &problem.source {
        DataSource::Generated { kind, params, data_seed } => Ok(generate(*kind, params, *data_seed)?),
        DataSource::File(path) => Dataset::read_file(path).with_context(|| format!("reading {}", path.display())),
    }
}

pub fn build_problem(problem: &ProblemSpec) -> Result<Box<dyn FiniteSumProblem<f64>>> {
    let ds = load_dataset(problem)?;
    Ok(match problem.model {
        Model::LeastSquares => Box::new(ds.least_squares(problem.ridge)?),
        Model::Logistic => Box::new(ds.logistic(problem.ridge)?),
        Model::Mlp => Box::new(ds.mlp(&problem.hidden, problem.ridge)?),
        Model::Factorization => Box::new(ds.factorization(problem.model_rank, problem.ridge)?),
    })
}

/// Fully resolved settings of one (algorithm, seed) run.
#[derive(Clone, Debug)]
pub enum Plan {
    Spider { config: RunConfig, hyper: Option<Hyperparams> },
    Sgd(SgdConfig),
}

#[derive(Clone, Debug)]
pub struct Task {
    pub algorithm: Algorithm,
    pub seed: u64,
    pub plan: Plan,
}

impl Task {
    pub fn file_name(&self, experiment: &str) -> String {
        format!("{experiment}-{}-seed{}.csv", self.algorithm, self.seed)
    }
}

fn spider_config(spec: &ExperimentSpec, d: usize, seed: u64) -> RunConfig {
    let o = &spec.opt;
    let (k1, k2) = o.sparsity(d);
    let mut cfg = RunConfig::with_defaults(d);
    cfg.eta = o.eta;
    cfg.m = o.m;
    cfg.outer_loops = o.outer_loops;
    cfg.big_batch = o.big_batch;
    cfg.small_batch = o.small_batch;
    cfg.alpha = o.alpha;
    cfg.k1 = k1;
    cfg.k2 = k2;
    cfg.per_block = o.per_block;
    cfg.schedule = o.schedule;
    cfg.capture_every = o.capture_every;
    cfg.stop_grad_norm = o.stop_grad_norm;
    cfg.inner_mode = spec.run.mode.inner_mode();
    cfg.output_mode = spec.run.mode.output_mode();
    cfg.exact_grad_norm = spec.run.exact_grad_norm;
    cfg.seed = seed;
    cfg
}

/// Constants at the seed's starting point (and the exact minimizer when known).
fn calculator_output(
    spec: &ExperimentSpec,
    problem: &dyn FiniteSumProblem<f64>,
    cfg: &RunConfig,
    seed: u64,
) -> Result<Option<Hyperparams>> {
    let calc = match spec.opt.hyper {
        HyperMode::Manual => return Ok(None),
        HyperMode::WorstCase => worst_case_hyperparams,
        HyperMode::DataAdaptive => data_adaptive_hyperparams,
    };
    let mut probes = vec![problem.initial_point(&mut RngStream::new(seed, streams::INIT))];
    if let Some((x_star, _)) = problem.known_minimum() {
        probes.push(x_star);
    }
    let constants = estimate_constants(problem, &probes, &mut RngStream::new(seed, 0))?;
    let input = HyperparamInputs {
        epsilon: spec.opt.epsilon.expect("validated"),
        constants,
        b: cfg.small_batch,
        k1: cfg.k1,
        k2: cfg.k2,
        d: problem.dim(),
        n: problem.n(),
    };
    Ok(Some(calc(&input)?))
}

/// Resolves and validates every run before anything is executed.
pub fn plan(spec: &ExperimentSpec, problem: &dyn FiniteSumProblem<f64>) -> Result<Vec<Task>> {
    let (n, d) = (problem.n(), problem.dim());
    check_sparsity(&spec.opt, d)?;
    let mut tasks = Vec::new();
    for &algorithm in &spec.opt.algorithms {
        for &seed in &spec.run.seeds {
            let mut cfg = spider_config(spec, d, seed);
            let hyper = calculator_output(spec, problem, &cfg, seed)?;
            if let Some(h) = &hyper {
                h.apply(&mut cfg);
            }
            cfg.validate(n, d).with_context(|| format!("{algorithm}, seed {seed}"))?;
            let plan = match algorithm {
                Algorithm::SparseSpiderBoost | Algorithm::SpiderBoost => Plan::Spider { config: cfg, hyper },
                Algorithm::Sgd => {
                    let o = &spec.opt;
                    let batch = o.sgd_batch.unwrap_or(cfg.small_batch);
                    if batch > n {
                        bail!("`opt.sgd_batch`: {batch} exceeds n = {n}");
                    }
                    // same query budget as dense SpiderBoost with fixed inner loops
                    let budget = cfg.outer_loops as u64 * (cfg.big_batch.min(n) + 2 * cfg.small_batch * cfg.m) as u64;
                    let steps = o.sgd_steps.unwrap_or(budget.div_ceil(batch as u64));
                    let mut sgd = SgdConfig::new(o.sgd_eta.unwrap_or(cfg.eta), batch, steps, seed);
                    sgd.decay = o.sgd_decay;
                    sgd.stop_grad_norm = o.stop_grad_norm;
                    sgd.exact_grad_norm = spec.run.exact_grad_norm;
                    sgd.row_every = (cfg.big_batch.min(n) + 2 * cfg.small_batch * cfg.m).div_ceil(batch) as u64;
                    Plan::Sgd(sgd)
                }
            };
            tasks.push(Task { algorithm, seed, plan });
        }
    }
    Ok(tasks)
}

fn execute(task: &Task, problem: &dyn FiniteSumProblem<f64>) -> Result<RunOutput<f64>> {
    Ok(match (&task.plan, task.algorithm) {
        (Plan::Spider { config, .. }, Algorithm::SparseSpiderBoost) => run_sparse_spiderboost(problem, config)?,
        (Plan::Spider { config, .. }, _) => run_spiderboost_dense(problem, config)?,
        (Plan::Sgd(sgd), _) => run_sgd(problem, sgd)?,
    })
}

fn opt_cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Per-run CSV: `#` header with the run identity and resolved settings, then rows.
pub fn render_run(spec: &ExperimentSpec, task: &Task, out: &RunOutput<f64>) -> String {
    let rec = &out.record;
    let mut s = String::new();
    let _ = writeln!(s, "# experiment = {}", spec.run.name);
    let _ = writeln!(s, "# algorithm = {}", task.algorithm);
    let _ = writeln!(s, "# seed = {}", task.seed);
    let _ = writeln!(
        s,
        "# streams = batch:{} operator:{} inner_length:{} output:{} init:{}",
        streams::BATCH,
        streams::OPERATOR,
        streams::INNER_LENGTH,
        streams::OUTPUT,
        streams::INIT
    );
    let status = match &rec.status {
        RunStatus::Completed => "completed".to_string(),
        RunStatus::ReachedTarget { units, loop_index } => {
            format!("reached-target units={units} loop={loop_index}")
        }
        RunStatus::Diverged { reason } => format!("diverged: {reason}"),
    };
    let _ = writeln!(s, "# status = {status}");
    let _ = writeln!(s, "# n = {}", rec.n);
    let _ = writeln!(s, "# d = {}", rec.d);
    let _ = writeln!(s, "# units = {}", rec.meter.units());
    match &task.plan {
        Plan::Spider { config: c, hyper } => {
            let _ = writeln!(
                s,
                "# resolved = eta:{} m:{} T:{} B:{} b:{} alpha:{} k1:{} k2:{}",
                c.eta, c.m, c.outer_loops, c.big_batch, c.small_batch, c.alpha, c.k1, c.k2
            );
            if hyper.is_some() {
                let _ = writeln!(s, "# calculator = B, m, eta, T set from estimated constants");
            }
            if let Some(r) = rec.mean_capture_r() {
                let _ = writeln!(s, "# mean_capture_r = {r}");
            }
            let _ = writeln!(s, "# output_loop = {}", out.output_loop);
        }
        Plan::Sgd(c) => {
            let _ = writeln!(
                s,
                "# resolved = eta:{} batch:{} steps:{} decay:{}",
                c.eta,
                c.batch,
                c.steps,
                opt_cell(c.decay)
            );
        }
    }
    let _ = writeln!(s, "# bin_width = {}", spec.run.bin_width);
    s.push_str(&spec.echo_lines());
    s.push_str(CSV_COLUMNS);
    s.push('\n');
    for r in &rec.rows {
        let wall = if spec.run.record_wall_time {
            format!("{:.3}", r.wall_ms)
        } else {
            String::new()
        };
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            r.j,
            r.n_j,
            r.queries_over_n,
            r.loss,
            opt_cell(r.grad_norm),
            opt_cell(r.entropy_bits),
            wall
        );
    }
    s
}

/// Writes through a temporary file in the same directory and renames it.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let file_name = path.file_name().context("output path has no file name")?.to_string_lossy();
    let tmp = path.with_file_name(format!(".{file_name}.tmp{}", std::process::id()));
    fs::write(&tmp, contents).with_context(|| format!("writing {}", tmp.display()))?;
    fs::rename(&tmp, path).with_context(|| format!("renaming to {}", path.display()))?;
    Ok(())
}

struct ParsedRun {
    algorithm: String,
    bin_width: f64,
    /// `(queries_over_n, loss, grad_norm)` per row.
    rows: Vec<(f64, f64, Option<f64>)>,
}

fn parse_run(text: &str) -> Result<ParsedRun> {
    let mut algorithm = None;
    let mut bin_width = None;
    let mut rows = Vec::new();
    let mut seen_columns = false;
    for (i, line) in text.lines().enumerate() {
        if let Some(comment) = line.strip_prefix('#') {
            if let Some((k, v)) = comment.split_once('=') {
                match k.trim() {
                    "algorithm" => algorithm = Some(v.trim().to_string()),
                    "bin_width" => bin_width = Some(v.trim().parse::<f64>()?),
                    _ => {}
                }
            }
            continue;
        }
        if !seen_columns {
            if line != CSV_COLUMNS {
                bail!("line {}: expected the column header", i + 1);
            }
            seen_columns = true;
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != 7 {
            bail!("line {}: expected 7 cells", i + 1);
        }
        let grad = if cells[4].is_empty() { None } else { Some(cells[4].parse()?) };
        rows.push((cells[2].parse()?, cells[3].parse()?, grad));
    }
    Ok(ParsedRun {
        algorithm: algorithm.context("missing `# algorithm` header")?,
        bin_width: bin_width.context("missing `# bin_width` header")?,
        rows,
    })
}

fn bin_index(q: f64, width: f64) -> i64 {
    // the small slack keeps exact multiples of the width in their own bin
    ((q / width) - 1e-9).ceil().max(0.0) as i64
}

/// Aggregate CSV computed from per-run CSV contents alone.
///
/// Each run contributes its last row in every `queries_over_n` bin; bins are
/// labelled by their upper edge. Input order does not matter.
pub fn aggregate(run_csvs: &[String]) -> Result<String> {
    let runs = run_csvs.iter().map(|t| parse_run(t)).collect::<Result<Vec<_>>>()?;
    let width = runs.first().context("no runs to aggregate")?.bin_width;
    if runs.iter().any(|r| r.bin_width != width) {
        bail!("runs disagree on bin_width");
    }
    type Point = (f64, Option<f64>);
    let mut bins: BTreeMap<(String, i64), Vec<Point>> = BTreeMap::new();
    for run in &runs {
        let mut last: BTreeMap<i64, Point> = BTreeMap::new();
        for &(q, loss, grad) in &run.rows {
            last.insert(bin_index(q, width), (loss, grad));
        }
        for (k, v) in last {
            bins.entry((run.algorithm.clone(), k)).or_default().push(v);
        }
    }
    let mut s = String::new();
    let _ = writeln!(s, "# runs = {}", runs.len());
    let _ = writeln!(s, "# bin_width = {width}");
    s.push_str(AGGREGATE_COLUMNS);
    s.push('\n');
    for ((algorithm, k), mut vals) in bins {
        // summation order independent of input order
        vals.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.unwrap_or(f64::NAN).total_cmp(&b.1.unwrap_or(f64::NAN))));
        let count = vals.len() as f64;
        let mean = vals.iter().map(|v| v.0).sum::<f64>() / count;
        let min = vals.iter().map(|v| v.0).fold(f64::INFINITY, f64::min);
        let max = vals.iter().map(|v| v.0).fold(f64::NEG_INFINITY, f64::max);
        let grads: Option<Vec<f64>> = vals.iter().map(|v| v.1).collect();
        let mean_grad = grads.map(|g| g.iter().sum::<f64>() / count);
        let _ = writeln!(
            s,
            "{algorithm},{},{},{mean},{min},{max},{}",
            k as f64 * width,
            vals.len(),
            opt_cell(mean_grad)
        );
    }
    Ok(s)
}

#[derive(Debug)]
pub struct Outcome {
    pub run_files: Vec<PathBuf>,
    pub aggregate: PathBuf,
    /// `(algorithm, seed, reason)` of diverged runs.
    pub diverged: Vec<(Algorithm, u64, String)>,
}

/// Runs every (algorithm, seed) pair and writes the CSV files.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<Outcome> {
    let problem = build_problem(&spec.problem)?;
    let tasks = plan(spec, problem.as_ref())?;
    fs::create_dir_all(&spec.run.out).with_context(|| format!("creating {}", spec.run.out.display()))?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(spec.run.jobs).build()?;
    let results: Vec<Result<(PathBuf, String, Option<String>)>> = pool.install(|| {
        tasks
            .par_iter()
            .map(|task| {
                log::info!("running {} seed {}", task.algorithm, task.seed);
                let out = execute(task, problem.as_ref())
                    .with_context(|| format!("{} seed {}", task.algorithm, task.seed))?;
                let text = render_run(spec, task, &out);
                let path = spec.run.out.join(task.file_name(&spec.run.name));
                write_atomic(&path, &text)?;
                let diverged = match out.record.status {
                    RunStatus::Diverged { reason } => Some(reason),
                    _ => None,
                };
                Ok((path, text, diverged))
            })
            .collect()
    });
    let mut run_files = Vec::new();
    let mut texts = Vec::new();
    let mut diverged = Vec::new();
    for (task, result) in tasks.iter().zip(results) {
        let (path, text, div) = result?;
        if let Some(reason) = div {
            diverged.push((task.algorithm, task.seed, reason));
        }
        run_files.push(path);
        texts.push(text);
    }
    let aggregate_path = spec.run.out.join(format!("{}-aggregate.csv", spec.run.name));
    write_atomic(&aggregate_path, &aggregate(&texts)?)?;
    Ok(Outcome {
        run_files,
        aggregate: aggregate_path,
        diverged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_text(algorithm: &str, rows: &[(f64, f64)]) -> String {
        let mut s = format!("# algorithm = {algorithm}\n# bin_width = 1\n{CSV_COLUMNS}\n");
        for (j, (q, loss)) in rows.iter().enumerate() {
            s.push_str(&format!("{j},1,{q},{loss},,,\n"));
        }
        s
    }

    #[test]
    fn bins_keep_the_last_row_of_each_run() {
        let a = run_text("sgd", &[(0.0, 9.0), (0.4, 5.0), (0.9, 3.0), (1.5, 2.0)]);
        let b = run_text("sgd", &[(0.0, 7.0), (1.0, 4.0)]);
        let agg = aggregate(&[a.clone(), b.clone()]).unwrap();
        let rows: Vec<&str> = agg.lines().skip(3).collect();
        assert_eq!(rows, ["sgd,0,2,8,7,9,", "sgd,1,2,3.5,3,4,", "sgd,2,1,2,2,2,"]);
        assert_eq!(aggregate(&[b, a]).unwrap(), agg);
    }

    #[test]
    fn rejects_malformed_runs() {
        assert!(aggregate(&[]).is_err());
        assert!(aggregate(&["# algorithm = sgd\n# bin_width = 1\nwrong\n".into()]).is_err());
        assert!(aggregate(&[format!("# bin_width = 1\n{CSV_COLUMNS}\n")]).is_err());
    }

    #[test]
    fn bin_edges() {
        assert_eq!(bin_index(0.0, 0.5), 0);
        assert_eq!(bin_index(0.5, 0.5), 1);
        assert_eq!(bin_index(0.5000001, 0.5), 2);
        assert_eq!(bin_index(1.0 - 1e-15, 0.5), 2);
    }
}
