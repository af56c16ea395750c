use crate::error::{invalid, Result};
use crate::sparsity::SparsityParams;

/// How many inner steps each outer loop takes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InnerMode {
    /// Exactly `m` steps.
    Fixed,
    /// `N_j ~ Geom(m)`, support starting at 0.
    Geometric,
}

/// Which iterate a run returns.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OutputMode {
    /// The final iterate.
    Last,
    /// The end-of-loop iterate of a loop drawn uniformly from `1..=T`.
    Uniform,
}

/// Step-size schedule within an outer loop.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Schedule {
    Constant,
    /// `eta_t = end + (start - end)(m - t)/m`, held at `end` once `t >= m`.
    InnerLinear { start: f64, end: f64 },
}

impl Schedule {
    pub fn eta_at(&self, eta: f64, t: u64, m: usize) -> f64 {
        match *self {
            Schedule::Constant => eta,
            Schedule::InnerLinear { start, end } => {
                let frac = (m as f64 - t as f64).max(0.0) / m as f64;
                end + (start - end) * frac
            }
        }
    }
}

/// Configuration of one sparse or dense SpiderBoost run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub eta: f64,
    /// Inner loop length (or its mean in geometric mode).
    pub m: usize,
    /// Number of outer loops `T`.
    pub outer_loops: usize,
    /// Large batch `B`; values above `n` mean the full gradient.
    pub big_batch: usize,
    /// Small batch `b`.
    pub small_batch: usize,
    /// Memory decay factor.
    pub alpha: f64,
    pub k1: usize,
    pub k2: usize,
    pub inner_mode: InnerMode,
    pub output_mode: OutputMode,
    pub seed: u64,
    pub schedule: Schedule,
    /// Split `k1` and `k2` across the problem's parameter blocks.
    pub per_block: bool,
    /// Recompute every sparse update from dense gradients and require equality.
    pub verify_restricted: bool,
    /// Stop at the first iterate whose full gradient norm is at most this value.
    pub stop_grad_norm: Option<f64>,
    /// Measure `g`, `G`, `R` every this many inner steps (0 disables).
    pub capture_every: usize,
    /// Keep every iterate in the output.
    pub record_iterates: bool,
    /// Report the full gradient norm in each record row.
    pub exact_grad_norm: bool,
}

impl RunConfig {
    /// Defaults: `eta = 0.1`, `B = 1000`, `b = 100`, `m = 10`, `alpha = 0.5`,
    /// `k1` and `k2` each 5% of `d` (with `k2 >= 1`), ten outer loops,
    /// fixed inner length and last-iterate output.
    pub fn with_defaults(d: usize) -> Self {
        let (k1, k2) = default_sparsity(d);
        Self {
            eta: 0.1,
            m: 10,
            outer_loops: 10,
            big_batch: 1000,
            small_batch: 100,
            alpha: 0.5,
            k1,
            k2,
            inner_mode: InnerMode::Fixed,
            output_mode: OutputMode::Last,
            seed: 0,
            schedule: Schedule::Constant,
            per_block: true,
            verify_restricted: false,
            stop_grad_norm: None,
            capture_every: 0,
            record_iterates: false,
            exact_grad_norm: true,
        }
    }

    /// Geometric inner lengths and uniform output.
    pub fn theory_mode(mut self) -> Self {
        self.inner_mode = InnerMode::Geometric;
        self.output_mode = OutputMode::Uniform;
        self
    }

    /// Fixed inner lengths and last-iterate output.
    pub fn implementation_mode(mut self) -> Self {
        self.inner_mode = InnerMode::Fixed;
        self.output_mode = OutputMode::Last;
        self
    }

    /// Checks the configuration against a problem and returns `min(B, n)`.
    pub fn validate(&self, n: usize, d: usize) -> Result<usize> {
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(invalid("eta must be positive and finite"));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(invalid("alpha must lie in [0, 1]"));
        }
        if self.m == 0 || self.outer_loops == 0 {
            return Err(invalid("m and the number of outer loops must be at least 1"));
        }
        if self.small_batch == 0 || self.small_batch > n {
            return Err(invalid(format!("small batch must be in 1..={n}")));
        }
        let big = self.big_batch.min(n);
        if self.small_batch > big {
            return Err(invalid("small batch exceeds the large batch"));
        }
        if let Schedule::InnerLinear { start, end } = self.schedule {
            if !(start > 0.0 && end > 0.0 && start.is_finite() && end.is_finite()) {
                return Err(invalid("schedule step sizes must be positive and finite"));
            }
        }
        if let Some(eps) = self.stop_grad_norm {
            if !(eps > 0.0) {
                return Err(invalid("stop_grad_norm must be positive"));
            }
        }
        SparsityParams::new(self.k1, self.k2, d)?;
        Ok(big)
    }
}

/// `k1 = floor(0.05 d)` and `k2 = max(1, floor(0.05 d))`, clamped to `d`.
pub fn default_sparsity(d: usize) -> (usize, usize) {
    let k1 = d / 20;
    let k2 = (d / 20).max(1).min(d - k1);
    (k1, k2)
}
