//! Quick invariant and oracle suite behind the `check` verb.

use std::time::Instant;

use num_rational::Ratio;
use rand::Rng;
use sparse_vr::diagnostics::entropy_bits;
use sparse_vr::optimize::{run_sparse_spiderboost, run_spiderboost_dense, RunConfig};
use sparse_vr::problems::dataset::DatasetKind;
use sparse_vr::problems::synth::{generate, GenParams};
use sparse_vr::problems::FiniteSumProblem;
use sparse_vr::sampling::{check_geom_lemma, RngStream};
use sparse_vr::sparsity::{rtop_enumerate, top_neg_k1, RtopSupport, SparsityParams};
use sparse_vr::vecops::{densify, norm2_sq};

pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub millis: u128,
}

type Outcome = Result<String, String>;
type Check = (&'static str, fn() -> Outcome);
type Labeled = (&'static str, Box<dyn FiniteSumProblem<f64>>);

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn random_vec(r: &mut RngStream, d: usize) -> Vec<f64> {
    (0..d).map(|_| r.gen_range(-5.0..5.0)).collect()
}

/// Small instance of every problem kind.
fn desk_problems(seed: u64) -> Result<Vec<Labeled>, String> {
    let table = GenParams {
        n: 80,
        d: 8,
        active: 3,
        ..GenParams::default()
    };
    let ratings = GenParams {
        users: 10,
        items: 8,
        rank: 2,
        observed: 60,
        ..GenParams::default()
    };
    let g = |kind, p: &GenParams| generate(kind, p, seed).map_err(err);
    Ok(vec![
        ("least squares", Box::new(g(DatasetKind::GaussianLs, &table)?.least_squares(0.01).map_err(err)?)),
        ("planted least squares", Box::new(g(DatasetKind::PlantedSparseLs, &table)?.least_squares(0.0).map_err(err)?)),
        ("logistic", Box::new(g(DatasetKind::LogisticBlobs, &table)?.logistic(0.01).map_err(err)?)),
        ("mlp", Box::new(g(DatasetKind::LogisticBlobs, &table)?.mlp(&[5], 1e-3).map_err(err)?)),
        ("factorization", Box::new(g(DatasetKind::LowRankRatings, &ratings)?.factorization(2, 0.01).map_err(err)?)),
    ])
}

fn operator_moments() -> Outcome {
    let mut r = RngStream::new(1, 0);
    for case in 0..200 {
        let d = r.gen_range(1..=10);
        let k1 = r.gen_range(0..=d);
        let k2 = if k1 == d { 0 } else { r.gen_range(1..=d - k1) };
        let p = SparsityParams::new(k1, k2, d).map_err(err)?;
        let (x, y) = (random_vec(&mut r, d), random_vec(&mut r, d));
        let (mean, var) = rtop_enumerate(&x, &y, p).map_err(err)?;
        let gap = mean.as_slice().iter().zip(&y).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let tail = norm2_sq(top_neg_k1(&x, &y, k1).map_err(err)?.as_slice());
        let expected = if k2 == 0 { 0.0 } else { (d - k1 - k2) as f64 / k2 as f64 * tail };
        ensure(gap <= 1e-12, || format!("case {case}: biased by {gap:e}"))?;
        ensure((var - expected).abs() <= 1e-9 * expected.max(1.0), || {
            format!("case {case}: variance {var} vs {expected}")
        })?;
    }
    Ok("200 enumerated instances unbiased with closed-form variance".into())
}

fn worked_example() -> Outcome {
    let x = [11.0, 12.0, 13.0, -14.0, -15.0];
    let y = [-25.0, -24.0, 13.0, 12.0, 11.0];
    let p = SparsityParams::new(1, 1, 5).map_err(err)?;
    let s = RtopSupport::with_random_subset(&x, p, vec![1]).map_err(err)?;
    let out = densify(&s.apply(&y).map_err(err)?).into_vec();
    ensure(out == [0.0, -96.0, 0.0, 0.0, 11.0], || format!("got {out:?}"))?;
    let q: Vec<Ratio<i128>> = x.iter().map(|&v| Ratio::from_integer(v as i128)).collect();
    let qy: Vec<Ratio<i128>> = y.iter().map(|&v| Ratio::from_integer(v as i128)).collect();
    let (_, var) = rtop_enumerate(&q, &qy, p).map_err(err)?;
    ensure(var == Ratio::from_integer(4542), || format!("variance {var}"))?;
    Ok("(0,-96,0,0,11) with variance 4542".into())
}

fn entropy_pin() -> Outcome {
    let h = entropy_bits(&vec![1.0f64; 308_310]).map_err(err)?;
    ensure((h - 18.234).abs() <= 1e-3, || format!("entropy {h}"))?;
    Ok(format!("uniform entropy {h:.4} bits"))
}

fn meter_and_equivalence() -> Outcome {
    let problems = desk_problems(3)?;
    let mut r = RngStream::new(2, 0);
    let mut runs = 0;
    for (label, p) in &problems {
        let (n, d) = (p.n(), p.dim());
        for seed in 0..4 {
            let mut cfg = RunConfig::with_defaults(d);
            cfg.seed = seed;
            cfg.eta = 0.02;
            cfg.outer_loops = 3;
            cfg.m = r.gen_range(1..6);
            cfg.big_batch = r.gen_range(1..=n + 5);
            cfg.small_batch = r.gen_range(1..=cfg.big_batch.min(n));
            cfg.k1 = r.gen_range(0..d);
            cfg.k2 = r.gen_range(1..=d - cfg.k1);
            if seed % 2 == 1 {
                cfg = cfg.theory_mode();
            }
            let rec = run_sparse_spiderboost(p.as_ref(), &cfg).map_err(err)?.record;
            let closed = rec.closed_form_units(cfg.big_batch, cfg.small_batch, cfg.k1 + cfg.k2);
            ensure(rec.meter.units() == closed, || format!("{label}: meter {} vs {closed}", rec.meter.units()))?;

            cfg.k1 = d / 2;
            cfg.k2 = d - d / 2;
            cfg.record_iterates = true;
            let a = run_sparse_spiderboost(p.as_ref(), &cfg).map_err(err)?;
            let b = run_spiderboost_dense(p.as_ref(), &cfg).map_err(err)?;
            ensure(a.iterates == b.iterates, || format!("{label}: k1 + k2 = d differs from dense"))?;
            runs += 1;
        }
    }
    Ok(format!("{runs} runs: exact meter identity and dense equivalence"))
}

fn geometrization() -> Outcome {
    let mut r = RngStream::new(4, 0);
    for m in [3.0, 10.0] {
        let (lhs, rhs) = check_geom_lemma(m, |t| (t * t) as f64, 200_000, &mut r).map_err(err)?;
        let oracle = -(2.0 * m + 1.0);
        for v in [lhs, rhs] {
            ensure(((v - oracle) / oracle).abs() <= 0.05, || format!("m = {m}: {v} vs {oracle}"))?;
        }
    }
    Ok("both sides within 5% of -(2m+1) for m = 3, 10".into())
}

fn restricted_fidelity() -> Outcome {
    for (label, p) in desk_problems(5)? {
        let d = p.dim();
        let mut cfg = RunConfig::with_defaults(d);
        cfg.eta = 0.05;
        cfg.big_batch = p.n() / 2;
        cfg.small_batch = 8;
        cfg.k1 = d / 4;
        cfg.k2 = (d / 4).max(1);
        cfg.outer_loops = 4;
        cfg.verify_restricted = true;
        run_sparse_spiderboost(p.as_ref(), &cfg).map_err(|e| format!("{label}: {e}"))?;
    }
    Ok("restricted updates equal masked dense updates on every problem kind".into())
}

fn gradients() -> Outcome {
    let mut r = RngStream::new(6, 0);
    let mut worst = 0.0f64;
    for (label, p) in desk_problems(7)? {
        let tol = if label == "mlp" { 1e-4 } else { 1e-6 };
        let x: Vec<f64> = (0..p.dim()).map(|_| r.gen_range(-1.0..1.0)).collect();
        let g = p.full_grad(&x).map_err(err)?;
        let h = 1e-5;
        let mut xp = x.clone();
        let mut diff = 0.0;
        let mut scale = 0.0;
        for j in 0..x.len() {
            xp[j] = x[j] + h;
            let up = p.full_loss(&xp).map_err(err)?;
            xp[j] = x[j] - h;
            let down = p.full_loss(&xp).map_err(err)?;
            xp[j] = x[j];
            let fd = (up - down) / (2.0 * h);
            diff += (g[j] - fd).powi(2);
            scale += fd * fd;
        }
        let rel = diff.sqrt() / scale.sqrt().max(1.0);
        ensure(rel <= tol, || format!("{label}: relative error {rel:e}"))?;
        worst = worst.max(rel);
    }
    Ok(format!("finite differences agree (worst relative error {worst:.1e})"))
}

/// Runs the suite in a fixed order.
pub fn run_checks() -> Vec<CheckResult> {
    let checks: [Check; 7] = [
        ("operator moments", operator_moments),
        ("worked example", worked_example),
        ("entropy", entropy_pin),
        ("meter and dense equivalence", meter_and_equivalence),
        ("geometrization", geometrization),
        ("restricted fidelity", restricted_fidelity),
        ("gradients", gradients),
    ];
    checks
        .into_iter()
        .map(|(name, f)| {
            let start = Instant::now();
            let result = f();
            let millis = start.elapsed().as_millis();
            let (passed, detail) = match result {
                Ok(d) => (true, d),
                Err(d) => (false, d),
            };
            CheckResult {
                name,
                passed,
                detail,
                millis,
            }
        })
        .collect()
}
