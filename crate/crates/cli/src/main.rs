use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use sparse_vr::optimize::{data_adaptive_hyperparams, worst_case_hyperparams, HyperparamInputs};
use sparse_vr::problems::dataset::DatasetKind;
use sparse_vr::problems::synth::generate;
use sparse_vr::problems::{estimate_constants, ProblemConstants};
use sparse_vr::sampling::{streams, RngStream};
use sparse_vr_cli::config::{DataSource, Mode};
use sparse_vr_cli::{check, parse_config, presets, run_experiment, runner, ExperimentSpec};

#[derive(Parser)]
#[command(name = "sparse-vr", version, about = "Sparse SpiderBoost experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Theory,
    Impl,
}

#[derive(Clone, Copy, ValueEnum)]
enum Calculator {
    WorstCase,
    DataAdaptive,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset file.
    Gen {
        /// gaussian-ls, planted-sparse-ls, logistic-blobs or low-rank-ratings.
        #[arg(long)]
        kind: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Generator parameter such as `n=500` or `active=5` (repeatable).
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
    /// Run an experiment and write per-run and aggregate CSV files.
    Run {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        preset: Option<String>,
        /// Run this single seed instead of the configured list.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        jobs: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
    },
    /// Run the invariant and oracle suite.
    Check,
    /// Print calculator output for given constants, or for a configured problem.
    Hyper {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        preset: Option<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        epsilon: f64,
        #[arg(long, value_enum, default_value = "worst-case")]
        calculator: Calculator,
        #[arg(long)]
        l: Option<f64>,
        #[arg(long)]
        sigma2: Option<f64>,
        #[arg(long)]
        delta_f: Option<f64>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        d: Option<usize>,
        #[arg(long)]
        b: Option<usize>,
        #[arg(long)]
        k1: Option<usize>,
        #[arg(long)]
        k2: Option<usize>,
    },
}

fn load_spec(config: Option<PathBuf>, preset: Option<String>) -> Result<ExperimentSpec> {
    let text = match (config, preset) {
        (Some(path), None) => std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?,
        (None, Some(name)) => {
            if presets::text(&name).is_none() {
                bail!("unknown preset `{name}`; available: {}", presets::NAMES.join(", "));
            }
            format!("preset = {name}\n")
        }
        (Some(_), Some(_)) => bail!("give either --config or --preset"),
        (None, None) => bail!("need --config or --preset"),
    };
    Ok(parse_config(&text)?)
}

fn gen(kind: &str, out: PathBuf, seed: u64, set: &[String]) -> Result<()> {
    let kind: DatasetKind = kind.parse()?;
    let mut text = format!("problem.kind = {kind}\n");
    for kv in set {
        let (k, v) = kv.split_once('=').with_context(|| format!("expected KEY=VALUE, got `{kv}`"))?;
        text.push_str(&format!("problem.{} = {}\n", k.trim(), v.trim()));
    }
    let spec = parse_config(&text)?;
    let DataSource::Generated { params, .. } = spec.problem.source else {
        unreachable!("problem.kind was given");
    };
    let ds = generate(kind, &params, seed)?;
    runner::write_atomic(&out, &ds.to_text())?;
    println!("wrote {} ({} samples)", out.display(), ds.n());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn hyper(
    spec: Option<ExperimentSpec>,
    seed: u64,
    epsilon: f64,
    calculator: Calculator,
    given: (Option<f64>, Option<f64>, Option<f64>),
    shape: (Option<usize>, Option<usize>),
    sparsity: (Option<usize>, Option<usize>, Option<usize>),
) -> Result<()> {
    let (constants, n, d, b, k1, k2) = match spec {
        Some(spec) => {
            let problem = runner::build_problem(&spec.problem)?;
            let mut probes = vec![problem.initial_point(&mut RngStream::new(seed, streams::INIT))];
            if let Some((x_star, _)) = problem.known_minimum() {
                probes.push(x_star);
            }
            let c = estimate_constants(problem.as_ref(), &probes, &mut RngStream::new(seed, 0))?;
            let (dk1, dk2) = spec.opt.sparsity(problem.dim());
            let b = sparsity.0.unwrap_or(spec.opt.small_batch);
            (c, problem.n(), problem.dim(), b, sparsity.1.unwrap_or(dk1), sparsity.2.unwrap_or(dk2))
        }
        None => {
            let (Some(l), Some(s2), Some(df)) = given else {
                bail!("without --config or --preset, give --l, --sigma2 and --delta-f");
            };
            let (Some(n), Some(d)) = shape else { bail!("without --config or --preset, give --n and --d") };
            let (Some(b), Some(k1), Some(k2)) = sparsity else { bail!("give --b, --k1 and --k2") };
            (ProblemConstants::new(l, s2, df)?, n, d, b, k1, k2)
        }
    };
    let input = HyperparamInputs {
        epsilon,
        constants,
        b,
        k1,
        k2,
        d,
        n,
    };
    let h = match calculator {
        Calculator::WorstCase => worst_case_hyperparams(&input)?,
        Calculator::DataAdaptive => data_adaptive_hyperparams(&input)?,
    };
    println!("L = {}{}", constants.l, if constants.l_estimated { " (estimated)" } else { "" });
    println!("sigma2 = {}", constants.sigma2);
    println!("delta_f = {}{}", constants.delta_f, if constants.delta_f_estimated { " (estimated)" } else { "" });
    println!("B = {}", h.big_batch);
    println!("m = {}", h.m);
    println!("eta = {}", h.eta);
    println!("T = {}", h.outer_loops);
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("SPARSE_VR_LOG", "warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Gen { kind, out, seed, set } => gen(&kind, out, seed, &set).map(|_| true),
        Command::Run {
            config,
            preset,
            seed,
            jobs,
            out,
            mode,
        } => load_spec(config, preset).and_then(|mut spec| {
            if let Some(s) = seed {
                spec.set_seed(s);
            }
            if let Some(j) = jobs {
                spec.run.jobs = j.max(1);
            }
            if let Some(o) = out {
                spec.run.out = o;
            }
            match mode {
                Some(ModeArg::Theory) => spec.set_mode(Mode::Theory),
                Some(ModeArg::Impl) => spec.set_mode(Mode::Implementation),
                None => {}
            }
            let outcome = run_experiment(&spec)?;
            for f in &outcome.run_files {
                println!("{}", f.display());
            }
            println!("{}", outcome.aggregate.display());
            for (alg, seed, reason) in &outcome.diverged {
                eprintln!("{alg} seed {seed} diverged: {reason}");
            }
            Ok(outcome.diverged.is_empty())
        }),
        Command::Check => {
            let results = check::run_checks();
            for r in &results {
                let verdict = if r.passed { "PASS" } else { "FAIL" };
                println!("{verdict} {} ({} ms): {}", r.name, r.millis, r.detail);
            }
            Ok(results.iter().all(|r| r.passed))
        }
        Command::Hyper {
            config,
            preset,
            seed,
            epsilon,
            calculator,
            l,
            sigma2,
            delta_f,
            n,
            d,
            b,
            k1,
            k2,
        } => {
            let spec = if config.is_some() || preset.is_some() {
                load_spec(config, preset).map(Some)
            } else {
                Ok(None)
            };
            spec.and_then(|spec| hyper(spec, seed, epsilon, calculator, (l, sigma2, delta_f), (n, d), (b, k1, k2)))
                .map(|_| true)
        }
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
