use super::record::{Algorithm, RunStatus};
use super::spider::{initial_point, RunOutput, Tracker};
use crate::diagnostics::MeterEvent;
use crate::error::{invalid, Error, Result};
use crate::problems::FiniteSumProblem;
use crate::sampling::{sample_batch, streams, RngStream};
use crate::scalar::Real;
use crate::vecops::DenseVec;

/// Mini-batch SGD settings.
#[derive(Clone, Debug, PartialEq)]
pub struct SgdConfig {
    pub eta: f64,
    pub batch: usize,
    pub steps: u64,
    pub seed: u64,
    /// Exponential decay: step `s` uses `eta * exp(-decay * s)`.
    pub decay: Option<f64>,
    /// Steps between record rows; 0 means one epoch (`ceil(n / batch)`).
    pub row_every: u64,
    pub stop_grad_norm: Option<f64>,
    pub exact_grad_norm: bool,
}

impl SgdConfig {
    pub fn new(eta: f64, batch: usize, steps: u64, seed: u64) -> Self {
        Self {
            eta,
            batch,
            steps,
            seed,
            decay: None,
            row_every: 0,
            stop_grad_norm: None,
            exact_grad_norm: true,
        }
    }

    fn eta_at(&self, s: u64) -> f64 {
        match self.decay {
            Some(rate) => self.eta * (-rate * s as f64).exp(),
            None => self.eta,
        }
    }
}

pub fn run_sgd<T: Real>(problem: &dyn FiniteSumProblem<T>, cfg: &SgdConfig) -> Result<RunOutput<T>> {
    let x0 = initial_point(problem, cfg.seed);
    run_sgd_from(problem, cfg, x0)
}

/// `x <- x - eta grad f_I(x)` with a fresh batch `I` of size `b` each step.
pub fn run_sgd_from<T: Real>(problem: &dyn FiniteSumProblem<T>, cfg: &SgdConfig, x0: DenseVec<T>) -> Result<RunOutput<T>> {
    let n = problem.n();
    if !(cfg.eta > 0.0 && cfg.eta.is_finite()) {
        return Err(invalid("eta must be positive and finite"));
    }
    if cfg.batch == 0 || cfg.batch > n {
        return Err(invalid(format!("batch must be in 1..={n}")));
    }
    if cfg.decay.is_some_and(|r| !(r >= 0.0 && r.is_finite())) {
        return Err(invalid("decay rate must be nonnegative"));
    }
    if x0.dim() != problem.dim() {
        return Err(Error::DimensionMismatch {
            expected: problem.dim(),
            found: x0.dim(),
        });
    }
    x0.ensure_finite()?;
    let row_every = if cfg.row_every == 0 {
        n.div_ceil(cfg.batch) as u64
    } else {
        cfg.row_every
    };
    let mut tracker = Tracker::new(problem, Algorithm::Sgd, cfg.seed, &x0, cfg.exact_grad_norm, cfg.stop_grad_norm)?;
    let mut rng = RngStream::new(cfg.seed, streams::BATCH);
    let mut x = x0;
    let mut since_row = 0u64;
    let mut row_index = 0usize;

    let mut diverged = tracker.row(0, 0, &x, None)?;
    let mut done = diverged.is_some() || tracker.target_met(&x, 0)?;
    let mut s = 0;
    while !done && s < cfg.steps {
        let batch = sample_batch(n, cfg.batch, &mut rng)?;
        let step = problem.grad_batch(&batch, &x).and_then(|g| {
            let mut next = x.clone();
            next.axpy_dense_mut(T::cast_f64(-cfg.eta_at(s)), &g)?;
            Ok(next)
        });
        match step {
            Ok(next) => x = next,
            Err(Error::NonFinite { index }) => {
                diverged = Some(format!("non-finite value at coordinate {index} at step {s}"));
                tracker.abort_row(row_index + 1, since_row, &x);
                break;
            }
            Err(e) => return Err(e),
        }
        tracker.record.meter.charge(MeterEvent::Sgd { batch: cfg.batch })?;
        s += 1;
        since_row += 1;
        if tracker.target_met(&x, row_index + 1)? {
            done = true;
        }
        if done || since_row == row_every || s == cfg.steps {
            row_index += 1;
            tracker.record.inner_lengths.push(since_row);
            diverged = tracker.row(row_index, since_row, &x, None)?;
            done |= diverged.is_some();
            since_row = 0;
        }
    }
    if let Some(reason) = diverged {
        tracker.record.status = RunStatus::Diverged { reason };
    }
    Ok(RunOutput {
        x_out: x.clone(),
        x_last: x,
        output_loop: row_index,
        record: tracker.record,
        iterates: Vec::new(),
        memory: None,
    })
}
