use std::time::Instant;

use num_traits::{ToPrimitive, Zero};
use rand::Rng;

use super::blocks::Sparsifier;
use super::record::{Algorithm, RecordRow, RunRecord, RunStatus};
use super::{InnerMode, MemoryVector, OutputMode, RunConfig};
use crate::diagnostics::{entropy_bits, measure_g_G, MeterEvent, QueryMeter};
use crate::error::{Error, Result};
use crate::problems::FiniteSumProblem;
use crate::sampling::{draw_geometric, sample_batch, streams, GeomParams, RngStream};
use crate::scalar::Real;
use crate::vecops::{norm2_sq, DenseVec};

/// Loss growth factor over `f(x_0)` treated as divergence.
pub const DIVERGENCE_FACTOR: f64 = 1e6;

/// Result of an optimizer run.
#[derive(Clone, Debug)]
pub struct RunOutput<T> {
    /// The returned iterate (per the output mode).
    pub x_out: DenseVec<T>,
    pub x_last: DenseVec<T>,
    /// Outer loop whose end iterate is `x_out`; 0 is the starting point.
    pub output_loop: usize,
    pub record: RunRecord,
    /// Every iterate including `x_0`, when requested.
    pub iterates: Vec<DenseVec<T>>,
    pub memory: Option<MemoryVector<T>>,
}

/// Sparse SpiderBoost from the problem's seeded initial point.
pub fn run_sparse_spiderboost<T: Real>(problem: &dyn FiniteSumProblem<T>, cfg: &RunConfig) -> Result<RunOutput<T>> {
    let x0 = initial_point(problem, cfg.seed);
    run_sparse_spiderboost_from(problem, cfg, x0)
}

pub fn run_sparse_spiderboost_from<T: Real>(
    problem: &dyn FiniteSumProblem<T>,
    cfg: &RunConfig,
    x0: DenseVec<T>,
) -> Result<RunOutput<T>> {
    let d = problem.dim();
    let blocks = problem.blocks();
    let sparsifier = if cfg.per_block && blocks.len() > 1 {
        Sparsifier::blockwise(&blocks, cfg.k1, cfg.k2)?
    } else {
        Sparsifier::whole(cfg.k1, cfg.k2, d)?
    };
    SpiderRun::new(problem, cfg, x0, Some(sparsifier))?.run()
}

/// SpiderBoost with dense gradient differences.
pub fn run_spiderboost_dense<T: Real>(problem: &dyn FiniteSumProblem<T>, cfg: &RunConfig) -> Result<RunOutput<T>> {
    let x0 = initial_point(problem, cfg.seed);
    run_spiderboost_dense_from(problem, cfg, x0)
}

pub fn run_spiderboost_dense_from<T: Real>(
    problem: &dyn FiniteSumProblem<T>,
    cfg: &RunConfig,
    x0: DenseVec<T>,
) -> Result<RunOutput<T>> {
    SpiderRun::new(problem, cfg, x0, None)?.run()
}

pub(crate) fn initial_point<T: Real>(problem: &dyn FiniteSumProblem<T>, seed: u64) -> DenseVec<T> {
    problem.initial_point(&mut RngStream::new(seed, streams::INIT))
}

/// Per-row bookkeeping shared by all optimizers.
pub(crate) struct Tracker<'a, T: Real> {
    pub problem: &'a dyn FiniteSumProblem<T>,
    pub record: RunRecord,
    start: Instant,
    f0: f64,
    exact_grad_norm: bool,
    stop_grad_norm: Option<f64>,
}

impl<'a, T: Real> Tracker<'a, T> {
    pub fn new(
        problem: &'a dyn FiniteSumProblem<T>,
        algorithm: Algorithm,
        seed: u64,
        x0: &[T],
        exact_grad_norm: bool,
        stop_grad_norm: Option<f64>,
    ) -> Result<Self> {
        let f0 = problem.full_loss(x0)?.to_f64_lossy();
        Ok(Self {
            problem,
            record: RunRecord {
                algorithm,
                seed,
                n: problem.n(),
                d: problem.dim(),
                rows: Vec::new(),
                status: RunStatus::Completed,
                inner_lengths: Vec::new(),
                captures: Vec::new(),
                meter: QueryMeter::new(),
            },
            start: Instant::now(),
            f0,
            exact_grad_norm,
            stop_grad_norm,
        })
    }

    pub fn grad_norm(&self, x: &[T]) -> Result<f64> {
        let g = match self.problem.cheap_full_grad(x) {
            Some(g) => g,
            None => self.problem.full_grad(x)?,
        };
        Ok(norm2_sq(&g).to_f64_lossy().sqrt())
    }

    /// Appends a row; returns a divergence reason if the loss blew up.
    pub fn row(&mut self, j: usize, n_j: u64, x: &[T], memory: Option<&MemoryVector<T>>) -> Result<Option<String>> {
        let loss = self.problem.full_loss(x)?.to_f64_lossy();
        let grad_norm = if self.exact_grad_norm && loss.is_finite() {
            self.grad_norm(x).ok()
        } else {
            None
        };
        let units = self.record.meter.units();
        self.record.rows.push(RecordRow {
            j,
            n_j,
            units,
            queries_over_n: units.to_f64().unwrap_or(f64::INFINITY) / self.record.n as f64,
            loss,
            grad_norm,
            entropy_bits: memory.and_then(|m| entropy_bits(m.values()).ok()),
            wall_ms: self.start.elapsed().as_secs_f64() * 1e3,
        });
        if !loss.is_finite() {
            return Ok(Some(format!("non-finite loss after loop {j}")));
        }
        if self.f0 > 0.0 && loss > DIVERGENCE_FACTOR * self.f0 {
            return Ok(Some(format!("loss {loss:e} exceeds {DIVERGENCE_FACTOR:e} f(x0) after loop {j}")));
        }
        Ok(None)
    }

    /// Records the diagnostic row of an aborted run.
    pub fn abort_row(&mut self, j: usize, n_j: u64, x: &[T]) {
        let loss = self.problem.full_loss(x).map(|v| v.to_f64_lossy()).unwrap_or(f64::NAN);
        let units = self.record.meter.units();
        self.record.rows.push(RecordRow {
            j,
            n_j,
            units,
            queries_over_n: units.to_f64().unwrap_or(f64::INFINITY) / self.record.n as f64,
            loss,
            grad_norm: None,
            entropy_bits: None,
            wall_ms: self.start.elapsed().as_secs_f64() * 1e3,
        });
    }

    /// True (and the status set) when the gradient-norm target is met at `x`.
    pub fn target_met(&mut self, x: &[T], loop_index: usize) -> Result<bool> {
        let Some(eps) = self.stop_grad_norm else {
            return Ok(false);
        };
        if self.grad_norm(x)? <= eps {
            self.record.status = RunStatus::ReachedTarget {
                units: self.record.meter.units(),
                loop_index,
            };
            return Ok(true);
        }
        Ok(false)
    }
}

enum Outcome {
    Finished,
    Diverged(String),
}

struct SpiderRun<'a, T: Real> {
    cfg: &'a RunConfig,
    tracker: Tracker<'a, T>,
    sparsifier: Option<Sparsifier>,
    big_batch: usize,
    k: usize,
    x: DenseVec<T>,
    memory: Option<MemoryVector<T>>,
    x_out: Option<(usize, DenseVec<T>)>,
    iterates: Vec<DenseVec<T>>,
    loop_index: usize,
    steps_in_loop: u64,
}

impl<'a, T: Real> SpiderRun<'a, T> {
    fn new(
        problem: &'a dyn FiniteSumProblem<T>,
        cfg: &'a RunConfig,
        x0: DenseVec<T>,
        sparsifier: Option<Sparsifier>,
    ) -> Result<Self> {
        let (n, d) = (problem.n(), problem.dim());
        let big_batch = cfg.validate(n, d)?;
        if x0.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: x0.dim(),
            });
        }
        x0.ensure_finite()?;
        let algorithm = if sparsifier.is_some() {
            Algorithm::SparseSpiderBoost
        } else {
            Algorithm::SpiderBoost
        };
        let tracker = Tracker::new(problem, algorithm, cfg.seed, &x0, cfg.exact_grad_norm, cfg.stop_grad_norm)?;
        let k = sparsifier.as_ref().map_or(d, |s| s.k());
        Ok(Self {
            cfg,
            tracker,
            sparsifier,
            big_batch,
            k,
            iterates: if cfg.record_iterates { vec![x0.clone()] } else { Vec::new() },
            x: x0,
            memory: None,
            x_out: None,
            loop_index: 0,
            steps_in_loop: 0,
        })
    }

    fn run(mut self) -> Result<RunOutput<T>> {
        let outcome = match self.execute() {
            Ok(o) => o,
            Err(Error::NonFinite { index }) => Outcome::Diverged(format!(
                "non-finite value at coordinate {index} in loop {}",
                self.loop_index
            )),
            Err(e) => return Err(e),
        };
        if let Outcome::Diverged(reason) = outcome {
            log::warn!("{} seed {} diverged: {reason}", self.tracker.record.algorithm, self.cfg.seed);
            if self.tracker.record.rows.last().map(|r| r.j) != Some(self.loop_index) {
                self.tracker.abort_row(self.loop_index, self.steps_in_loop, &self.x);
            }
            self.tracker.record.status = RunStatus::Diverged { reason };
        }
        let (output_loop, x_out) = self.x_out.unwrap_or((self.loop_index, self.x.clone()));
        Ok(RunOutput {
            x_out,
            x_last: self.x,
            output_loop,
            record: self.tracker.record,
            iterates: self.iterates,
            memory: self.memory,
        })
    }

    fn execute(&mut self) -> Result<Outcome> {
        let cfg = self.cfg;
        let problem = self.tracker.problem;
        let (n, d) = (problem.n(), problem.dim());
        let mut batch_rng = RngStream::new(cfg.seed, streams::BATCH);
        let mut op_rng = RngStream::new(cfg.seed, streams::OPERATOR);
        let mut len_rng = RngStream::new(cfg.seed, streams::INNER_LENGTH);
        let mut out_rng = RngStream::new(cfg.seed, streams::OUTPUT);
        let geom = match cfg.inner_mode {
            InnerMode::Geometric => Some(GeomParams::new(cfg.m as f64)?),
            InnerMode::Fixed => None,
        };
        let output_loop = match cfg.output_mode {
            OutputMode::Last => cfg.outer_loops,
            OutputMode::Uniform => out_rng.gen_range(1..=cfg.outer_loops),
        };
        let alpha = T::cast_f64(cfg.alpha);
        let everything: Vec<usize> = (0..n).collect();
        let mut total_steps: u64 = 0;

        if let Some(reason) = self.tracker.row(0, 0, &self.x, None)? {
            return Ok(Outcome::Diverged(reason));
        }
        if self.tracker.target_met(&self.x, 0)? {
            return Ok(Outcome::Finished);
        }

        for j in 1..=cfg.outer_loops {
            self.loop_index = j;
            self.steps_in_loop = 0;
            let snapshot = if self.big_batch >= n {
                everything.clone()
            } else {
                sample_batch(n, self.big_batch, &mut batch_rng)?
            };
            let mut nu = problem.grad_batch(&snapshot, &self.x)?;
            self.tracker.record.meter.charge(MeterEvent::Snapshot {
                batch: cfg.big_batch,
                n,
            })?;
            self.tracker.record.inner_lengths.push(0);
            if self.sparsifier.is_some() && self.memory.is_none() {
                self.memory = Some(MemoryVector::from_abs(&nu)?);
            }
            let n_j = match &geom {
                Some(g) => draw_geometric(g, &mut len_rng),
                None => cfg.m as u64,
            };

            for t in 0..n_j {
                let eta = T::cast_f64(cfg.schedule.eta_at(cfg.eta, t, cfg.m));
                let mut x_next = self.x.clone();
                x_next.axpy_dense_mut(-eta, &nu)?;
                let small = sample_batch(n, cfg.small_batch, &mut batch_rng)?;
                match (&self.sparsifier, &mut self.memory) {
                    (Some(sparsifier), Some(memory)) => {
                        let support = sparsifier.draw(memory.values(), &mut op_rng)?;
                        let idx = support.indices();
                        let at_next = problem.grad_batch_restricted(&small, &x_next, idx)?;
                        let at_prev = problem.grad_batch_restricted(&small, &self.x, idx)?;
                        let diff: Vec<T> = at_next.iter().zip(&at_prev).map(|(&a, &b)| a - b).collect();
                        let update = support.apply_restricted(&diff)?;
                        if cfg.verify_restricted {
                            let dense = problem
                                .grad_batch(&small, &x_next)?
                                .sub(&problem.grad_batch(&small, &self.x)?)?;
                            let expected = support.apply(&dense)?;
                            for (&(i, got), &(_, want)) in update.entries().iter().zip(expected.entries()) {
                                if got != want {
                                    return Err(Error::RestrictedMismatch {
                                        index: i,
                                        restricted: got.to_f64_lossy(),
                                        dense: want.to_f64_lossy(),
                                    });
                                }
                            }
                        }
                        if cfg.capture_every > 0 && total_steps.is_multiple_of(cfg.capture_every as u64) {
                            let c = measure_g_G(problem, memory.values(), &x_next, &self.x, cfg.k1, cfg.small_batch)?;
                            self.tracker.record.captures.push(c);
                        }
                        nu.axpy_mut(T::one(), &update)?;
                        memory.update(&nu, alpha)?;
                    }
                    _ => {
                        let diff = problem
                            .grad_batch(&small, &x_next)?
                            .sub(&problem.grad_batch(&small, &self.x)?)?;
                        nu.axpy_dense_mut(T::one(), &diff)?;
                    }
                }
                self.tracker.record.meter.charge(MeterEvent::Inner {
                    batch: cfg.small_batch,
                    k: self.k,
                    d,
                })?;
                self.x = x_next;
                self.steps_in_loop += 1;
                total_steps += 1;
                *self.tracker.record.inner_lengths.last_mut().unwrap() += 1;
                if cfg.record_iterates {
                    self.iterates.push(self.x.clone());
                }
                if self.tracker.target_met(&self.x, j)? {
                    self.tracker.row(j, self.steps_in_loop, &self.x, self.memory.as_ref())?;
                    return Ok(Outcome::Finished);
                }
            }

            if let Some(reason) = self.tracker.row(j, n_j, &self.x, self.memory.as_ref())? {
                return Ok(Outcome::Diverged(reason));
            }
            if let Some(r) = self.tracker.record.rows.last() {
                log::debug!("loop {j}: N_j={n_j} units/n={:.4} loss={:.6e}", r.queries_over_n, r.loss);
            }
            if j == output_loop {
                self.x_out = Some((j, self.x.clone()));
            }
        }
        debug_assert!(self.tracker.record.meter.units() > num_rational::Ratio::zero());
        Ok(Outcome::Finished)
    }
}
