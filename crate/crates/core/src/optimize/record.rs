use std::fmt;

use num_rational::Ratio;
use num_traits::Zero;

use crate::diagnostics::{QueryMeter, SparsityCapture};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Algorithm {
    SparseSpiderBoost,
    SpiderBoost,
    Sgd,
}

impl Algorithm {
    pub fn as_str(&self) -> &'static str {
        match self {
            Algorithm::SparseSpiderBoost => "sparse-spiderboost",
            Algorithm::SpiderBoost => "spiderboost",
            Algorithm::Sgd => "sgd",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "sparse-spiderboost" => Ok(Algorithm::SparseSpiderBoost),
            "spiderboost" => Ok(Algorithm::SpiderBoost),
            "sgd" => Ok(Algorithm::Sgd),
            _ => Err(format!("unknown algorithm `{s}`")),
        }
    }
}

/// State after outer loop `j` (row 0 is the starting point).
#[derive(Clone, Debug, PartialEq)]
pub struct RecordRow {
    pub j: usize,
    /// Inner steps taken in this loop (SGD: steps since the previous row).
    pub n_j: u64,
    pub units: Ratio<i128>,
    pub queries_over_n: f64,
    pub loss: f64,
    pub grad_norm: Option<f64>,
    pub entropy_bits: Option<f64>,
    pub wall_ms: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum RunStatus {
    Completed,
    /// The gradient-norm target was met; `units` is the cost at that iterate.
    ReachedTarget { units: Ratio<i128>, loop_index: usize },
    /// Non-finite values or loss blow-up; the record is truncated.
    Diverged { reason: String },
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunRecord {
    pub algorithm: Algorithm,
    pub seed: u64,
    pub n: usize,
    pub d: usize,
    pub rows: Vec<RecordRow>,
    pub status: RunStatus,
    /// `N_j` for every started outer loop, including a truncated last one.
    pub inner_lengths: Vec<u64>,
    pub captures: Vec<SparsityCapture>,
    pub meter: QueryMeter,
}

impl RunRecord {
    pub fn diverged(&self) -> bool {
        matches!(self.status, RunStatus::Diverged { .. })
    }

    /// Cost of reaching the gradient-norm target, if it was reached.
    pub fn target_units(&self) -> Option<Ratio<i128>> {
        match self.status {
            RunStatus::ReachedTarget { units, .. } => Some(units),
            _ => None,
        }
    }

    /// `sum_j (min(B, n) + 2 b N_j k / d)` over the recorded loop lengths.
    pub fn closed_form_units(&self, big_batch: usize, small_batch: usize, k: usize) -> Ratio<i128> {
        let snapshot = Ratio::from_integer(big_batch.min(self.n) as i128);
        self.inner_lengths.iter().fold(Ratio::zero(), |acc, &n_j| {
            acc + snapshot + Ratio::new(2 * small_batch as i128 * n_j as i128 * k as i128, self.d as i128)
        })
    }

    /// `R-bar` over the recorded capture measurements.
    pub fn mean_capture_r(&self) -> Option<f64> {
        crate::diagnostics::mean_r(&self.captures)
    }
}
