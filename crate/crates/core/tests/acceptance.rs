//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any fails.

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use num_rational::Ratio;
use num_traits::ToPrimitive;
use rand::Rng;
use sparse_vr::diagnostics::entropy_bits;
use sparse_vr::optimize::{
    run_sparse_spiderboost, run_spiderboost_dense, worst_case_hyperparams, HyperparamInputs, InnerMode, OutputMode,
    RunConfig,
};
use sparse_vr::problems::{estimate_constants, FiniteSumProblem};
use sparse_vr::sampling::{check_geom_lemma, RngStream};
use sparse_vr::sparsity::{rtop_enumerate, top_neg_k1, RtopSupport, SparsityParams};
use sparse_vr::vecops::{densify, norm2_sq, DenseVec};

type Check = Result<String, String>;

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.total_cmp(b));
    let h = v.len() / 2;
    if v.len().is_multiple_of(2) {
        (v[h - 1] + v[h]) / 2.0
    } else {
        v[h]
    }
}

fn ratio_f64(r: Ratio<i128>) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

fn operator_exactness() -> Check {
    let mut r = RngStream::new(101, 0);
    let mut worst_mean = 0.0f64;
    let mut worst_var = 0.0f64;
    for case in 0..200 {
        let d = r.gen_range(1..=12);
        let k1 = r.gen_range(0..=d);
        let k2 = if k1 == d { 0 } else { r.gen_range(1..=d - k1) };
        let params = SparsityParams::new(k1, k2, d).map_err(err)?;
        let x = common::random_vec(&mut r, d, 10.0);
        let y = common::random_vec(&mut r, d, 10.0);
        let (mean, var) = rtop_enumerate(&x, &y, params).map_err(err)?;
        let mean_gap = mean.as_slice().iter().zip(&y).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let tail = norm2_sq(top_neg_k1(&x, &y, k1).map_err(err)?.as_slice());
        let expected = if k2 == 0 { 0.0 } else { (d - k1 - k2) as f64 / k2 as f64 * tail };
        let var_gap = (var - expected).abs() / expected.abs().max(f64::MIN_POSITIVE);
        let var_gap = if expected == 0.0 { var.abs() } else { var_gap };
        ensure(mean_gap <= 1e-12, format!("case {case}: mean off by {mean_gap:e}"))?;
        ensure(var_gap <= 1e-9, format!("case {case}: variance off by {var_gap:e}"))?;
        worst_mean = worst_mean.max(mean_gap);
        worst_var = worst_var.max(var_gap);
    }
    Ok(format!("200 instances, max mean gap {worst_mean:.1e}, max variance rel gap {worst_var:.1e}"))
}

fn worked_example() -> Check {
    let x = [11.0, 12.0, 13.0, -14.0, -15.0];
    let y = [-25.0, -24.0, 13.0, 12.0, 11.0];
    let params = SparsityParams::new(1, 1, 5).map_err(err)?;
    let support = RtopSupport::with_random_subset(&x, params, vec![1]).map_err(err)?;
    let out = densify(&support.apply(&y).map_err(err)?).into_vec();
    ensure(out == [0.0, -96.0, 0.0, 0.0, 11.0], format!("got {out:?}"))?;
    let (_, var) = rtop_enumerate(&x, &y, params).map_err(err)?;
    ensure(var == 4542.0, format!("float variance {var}"))?;

    let q = |v: &[f64]| v.iter().map(|&a| Ratio::from_integer(a as i128)).collect::<Vec<Ratio<i128>>>();
    let (mean, exact) = rtop_enumerate(&q(&x), &q(&y), params).map_err(err)?;
    ensure(exact == Ratio::from_integer(4542), format!("exact variance {exact}"))?;
    ensure(mean.as_slice() == q(&y).as_slice(), "exact mean differs from y")?;
    Ok("(0,-96,0,0,11), variance 4542 in f64 and rationals".into())
}

fn entropy_pin() -> Check {
    let h = entropy_bits(&vec![1.0f64; 308_310]).map_err(err)?;
    ensure((h - 18.234).abs() <= 1e-3, format!("entropy {h}"))?;
    Ok(format!("entropy {h:.4} bits"))
}

fn meter_identity() -> Check {
    let mut r = RngStream::new(404, 0);
    for run in 0..50u64 {
        let (problem, label): (Box<dyn FiniteSumProblem<f64>>, &str) = match run % 4 {
            0 => (Box::new(common::random_least_squares(&mut r, 40, 8, 0.01)), "least squares"),
            1 => (Box::new(common::random_logistic(&mut r, 40, 8, 0.01)), "logistic"),
            2 => (Box::new(common::small_mlp(run)), "mlp"),
            _ => (Box::new(common::small_factorization(run)), "factorization"),
        };
        let (n, d) = (problem.n(), problem.dim());
        let mut cfg = RunConfig::with_defaults(d);
        cfg.seed = run;
        cfg.eta = 0.01;
        cfg.outer_loops = r.gen_range(1..=4);
        cfg.m = r.gen_range(1..=6);
        cfg.big_batch = r.gen_range(1..=n + 10);
        cfg.small_batch = r.gen_range(1..=cfg.big_batch.min(n));
        cfg.k1 = r.gen_range(0..d);
        cfg.k2 = r.gen_range(1..=d - cfg.k1);
        cfg.per_block = r.gen_bool(0.5);
        if r.gen_bool(0.5) {
            cfg = cfg.theory_mode();
        }
        cfg.exact_grad_norm = false;
        let out = run_sparse_spiderboost(problem.as_ref(), &cfg).map_err(err)?;
        let rec = &out.record;
        ensure(!rec.diverged(), format!("run {run} ({label}) diverged"))?;
        let closed = rec.closed_form_units(cfg.big_batch, cfg.small_batch, cfg.k1 + cfg.k2);
        let units = rec.meter.units();
        ensure(
            units == closed && units == rec.meter.recomputed_units(),
            format!("run {run} ({label}): meter {units} vs closed form {closed}"),
        )?;
    }
    Ok("50 runs, exact rational equality".into())
}

fn dense_equivalence() -> Check {
    for seed in 0..10u64 {
        let problem = common::blobs(200, 10, 500 + seed).logistic(1e-3f64).map_err(err)?;
        let mut cfg = RunConfig::with_defaults(10);
        cfg.seed = seed;
        cfg.k1 = 4;
        cfg.k2 = 6;
        cfg.big_batch = 100;
        cfg.small_batch = 10;
        cfg.outer_loops = 5;
        cfg.record_iterates = true;
        let sparse = run_sparse_spiderboost(&problem, &cfg).map_err(err)?;
        let dense = run_spiderboost_dense(&problem, &cfg).map_err(err)?;
        ensure(
            sparse.iterates.len() == dense.iterates.len() && sparse.iterates.len() > 1,
            format!("seed {seed}: iterate counts differ"),
        )?;
        for (t, (a, b)) in sparse.iterates.iter().zip(&dense.iterates).enumerate() {
            let same = a.as_slice().iter().zip(b.as_slice()).all(|(p, q)| p.to_bits() == q.to_bits());
            ensure(same, format!("seed {seed}: iterate {t} differs"))?;
        }
    }
    Ok("10 seeds, every iterate bit-identical".into())
}

const C6_SEEDS: u64 = 20;

fn worst_case_desk_check() -> Check {
    let params = sparse_vr::problems::synth::GenParams {
        n: 10_000,
        d: 100,
        active: 5,
        ..Default::default()
    };
    let norms = std::thread::scope(|s| {
        let handles: Vec<_> = (0..C6_SEEDS)
            .map(|seed| {
                let params = params.clone();
                s.spawn(move || -> Result<f64, String> {
                    let ds = sparse_vr::problems::synth::generate(
                        sparse_vr::problems::dataset::DatasetKind::PlantedSparseLs,
                        &params,
                        1000 + seed,
                    )
                    .map_err(err)?;
                    let p = ds.least_squares(0.0f64).map_err(err)?;
                    let (x_star, _) = p.known_minimum().ok_or("no certified minimum")?;
                    let x0 = DenseVec::zeros(100);
                    let constants = estimate_constants(&p, &[x0, x_star], &mut RngStream::new(seed, 0)).map_err(err)?;
                    ensure(!constants.delta_f_estimated, "f* was not certified")?;
                    let h = worst_case_hyperparams(&HyperparamInputs {
                        epsilon: 0.1,
                        constants,
                        b: 10,
                        k1: 5,
                        k2: 5,
                        d: 100,
                        n: 10_000,
                    })
                    .map_err(err)?;
                    let mut cfg = RunConfig::with_defaults(100).theory_mode();
                    cfg.small_batch = 10;
                    cfg.k1 = 5;
                    cfg.k2 = 5;
                    cfg.seed = seed;
                    cfg.exact_grad_norm = false;
                    h.apply(&mut cfg);
                    let out = run_sparse_spiderboost(&p, &cfg).map_err(err)?;
                    ensure(!out.record.diverged(), format!("seed {seed} diverged"))?;
                    Ok(norm2_sq(p.full_grad(out.x_out.as_slice()).map_err(err)?.as_slice()).sqrt())
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("worker panicked")).collect::<Result<Vec<f64>, String>>()
    })?;
    let mean = norms.iter().sum::<f64>() / norms.len() as f64;
    ensure(mean <= 0.1, format!("mean gradient norm {mean:.4} > 0.1"))?;
    Ok(format!("mean ||grad f(x_out)|| = {mean:.4} over {C6_SEEDS} seeds (eps 0.1)"))
}

const C7_SEEDS: u64 = 20;
const C7_EPS: f64 = 0.05;
const C7_RBAR_SEEDS: u64 = 5;

fn sparsity_advantage() -> Check {
    let ratios = std::thread::scope(|s| {
        let handles: Vec<_> = (0..C7_SEEDS)
            .map(|seed| {
                s.spawn(move || -> Result<f64, String> {
                    let p = common::planted_sparse(10_000, 100, 5, 2000 + seed);
                    let mut cfg = RunConfig::with_defaults(100);
                    cfg.seed = seed;
                    cfg.outer_loops = 1000;
                    cfg.stop_grad_norm = Some(C7_EPS);
                    cfg.exact_grad_norm = false;
                    let sparse = run_sparse_spiderboost(&p, &cfg).map_err(err)?;
                    let dense = run_spiderboost_dense(&p, &cfg).map_err(err)?;
                    let a = sparse.record.target_units().ok_or(format!("seed {seed}: sparse missed the target"))?;
                    let b = dense.record.target_units().ok_or(format!("seed {seed}: dense missed the target"))?;
                    Ok(ratio_f64(a) / ratio_f64(b))
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("worker panicked")).collect::<Result<Vec<f64>, String>>()
    })?;
    let query_ratio = median(ratios);

    let rbar_ratios = std::thread::scope(|s| {
        let handles: Vec<_> = (0..C7_RBAR_SEEDS)
            .map(|seed| {
                s.spawn(move || -> Result<f64, String> {
                    let mut cfg = RunConfig::with_defaults(100);
                    cfg.seed = seed;
                    cfg.capture_every = 5;
                    cfg.exact_grad_norm = false;
                    let sparse = common::planted_sparse(10_000, 100, 5, 3000 + seed);
                    let control = common::isotropic_control(10_000, 100, 5, 3000 + seed);
                    let a = run_sparse_spiderboost(&sparse, &cfg).map_err(err)?.record.mean_capture_r();
                    let b = run_sparse_spiderboost(&control, &cfg).map_err(err)?.record.mean_capture_r();
                    match (a, b) {
                        (Some(a), Some(b)) if b > 0.0 => Ok(a / b),
                        _ => Err(format!("seed {seed}: no R-bar measurement")),
                    }
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("worker panicked")).collect::<Result<Vec<f64>, String>>()
    })?;
    let rbar_ratio = median(rbar_ratios);
    let summary = format!("median query ratio {query_ratio:.3}, median R-bar ratio {rbar_ratio:.4}");
    ensure(query_ratio <= 0.5, format!("{summary}; query ratio above 0.5"))?;
    ensure(rbar_ratio <= 0.1, format!("{summary}; R-bar ratio above 0.1"))?;
    Ok(summary)
}

fn geometrization() -> Check {
    let mut parts = Vec::new();
    for (i, m) in [3.0f64, 10.0].into_iter().enumerate() {
        let mut r = RngStream::new(808 + i as u64, 0);
        let (lhs, rhs) = check_geom_lemma(m, |t| (t * t) as f64, 1_000_000, &mut r).map_err(err)?;
        // with D_t = t^2 both sides equal -(2m + 1), i.e. (D_0 - E N^2) / m with E N^2 = 2m^2 + m
        let oracle = -(2.0 * m + 1.0);
        for (side, v) in [("lhs", lhs), ("rhs", rhs)] {
            let gap = ((v - oracle) / oracle).abs();
            ensure(gap <= 0.05, format!("m = {m}: {side} {v:.4} vs {oracle} ({gap:.3})"))?;
        }
        parts.push(format!("m={m}: {lhs:.3} / {rhs:.3} vs {oracle}"));
    }
    Ok(parts.join(", "))
}

fn restricted_fidelity() -> Check {
    let mut r = RngStream::new(909, 0);
    let problems: Vec<(&str, Box<dyn FiniteSumProblem<f64>>)> = vec![
        ("least squares", Box::new(common::random_least_squares(&mut r, 80, 12, 0.01))),
        ("planted least squares", Box::new(common::planted_sparse(200, 30, 5, 9))),
        ("logistic", Box::new(common::blobs(120, 8, 9).logistic(1e-3).map_err(err)?)),
        ("mlp", Box::new(common::small_mlp(9))),
        ("factorization", Box::new(common::small_factorization(9))),
    ];
    for (label, p) in &problems {
        for mode in [InnerMode::Fixed, InnerMode::Geometric] {
            let d = p.dim();
            let mut cfg = RunConfig::with_defaults(d);
            cfg.eta = 0.05;
            cfg.big_batch = p.n() / 2;
            cfg.small_batch = 8;
            cfg.k1 = d / 5;
            cfg.k2 = (d / 5).max(1);
            cfg.outer_loops = 5;
            cfg.inner_mode = mode;
            cfg.output_mode = OutputMode::Last;
            cfg.verify_restricted = true;
            let out = run_sparse_spiderboost(p.as_ref(), &cfg).map_err(|e| format!("{label}: {e}"))?;
            ensure(!out.record.diverged(), format!("{label} diverged"))?;
        }
    }
    Ok("restricted updates equal dense-masked updates on 5 problems".into())
}

fn gradient_correctness() -> Check {
    let mut r = RngStream::new(1010, 0);
    let rel = |g: &DenseVec<f64>, fd: &[f64]| {
        let diff: f64 = g.as_slice().iter().zip(fd).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        diff / norm2_sq(fd).sqrt().max(1.0)
    };
    let mut worst = Vec::new();
    let cases: Vec<(&str, Box<dyn FiniteSumProblem<f64>>, f64)> = vec![
        ("least squares", Box::new(common::random_least_squares(&mut r, 30, 6, 0.1)), 1e-6),
        ("logistic", Box::new(common::random_logistic(&mut r, 30, 6, 0.1)), 1e-6),
        ("mlp", Box::new(common::small_mlp(10)), 1e-4),
        ("factorization", Box::new(common::small_factorization(10)), 1e-6),
    ];
    for (label, p, tol) in &cases {
        let mut max_err = 0.0f64;
        for _ in 0..5 {
            let x = common::random_vec(&mut r, p.dim(), 1.0);
            let g = p.full_grad(&x).map_err(err)?;
            let fd = common::fd_grad(p.as_ref(), &x, 1e-5);
            max_err = max_err.max(rel(&g, &fd));
        }
        ensure(max_err <= *tol, format!("{label}: relative error {max_err:e} > {tol:e}"))?;
        worst.push(format!("{label} {max_err:.1e}"));
    }
    Ok(worst.join(", "))
}

fn main() -> ExitCode {
    type Criterion = (&'static str, fn() -> Check, Duration);
    let criteria: [Criterion; 10] = [
        ("operator exactness", operator_exactness, Duration::from_secs(10)),
        ("worked example", worked_example, Duration::from_secs(10)),
        ("entropy pin", entropy_pin, Duration::from_secs(1)),
        ("meter identity", meter_identity, Duration::from_secs(60)),
        ("dense equivalence", dense_equivalence, Duration::from_secs(60)),
        ("worst-case desk check", worst_case_desk_check, Duration::from_secs(300)),
        ("sparsity advantage", sparsity_advantage, Duration::from_secs(600)),
        ("geometrization", geometrization, Duration::from_secs(30)),
        ("restricted fidelity", restricted_fidelity, Duration::from_secs(120)),
        ("gradient correctness", gradient_correctness, Duration::from_secs(60)),
    ];
    let mut failed = 0;
    for (i, (name, check, budget)) in criteria.into_iter().enumerate() {
        let start = Instant::now();
        let result = check();
        let elapsed = start.elapsed();
        let result = match result {
            Ok(msg) if elapsed > budget => Err(format!("{msg}; took {elapsed:.1?}, budget {budget:?}")),
            other => other,
        };
        match result {
            Ok(msg) => println!("criterion {:>2}: PASS {name} ({elapsed:.1?}): {msg}", i + 1),
            Err(msg) => {
                failed += 1;
                println!("criterion {:>2}: FAIL {name} ({elapsed:.1?}): {msg}", i + 1);
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
