use crate::error::{invalid, Result};
use crate::problems::ProblemConstants;
use crate::sparsity::SparsityParams;

use super::RunConfig;

/// Inputs to the step-size and batch-size calculators.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HyperparamInputs {
    /// Target gradient norm.
    pub epsilon: f64,
    pub constants: ProblemConstants<f64>,
    /// Small batch size.
    pub b: usize,
    pub k1: usize,
    pub k2: usize,
    pub d: usize,
    pub n: usize,
}

/// Calculator output, in the order it is computed.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Hyperparams {
    pub big_batch: usize,
    pub m: usize,
    pub eta: f64,
    pub outer_loops: usize,
}

impl Hyperparams {
    /// Copies `B`, `m`, `eta` and `T` into `cfg`.
    pub fn apply(&self, cfg: &mut RunConfig) {
        cfg.big_batch = self.big_batch;
        cfg.m = self.m;
        cfg.eta = self.eta;
        cfg.outer_loops = self.outer_loops;
    }
}

/// `B = ceil(2 sigma^2 / eps^2 ∧ n)`, `m = ceil(B d / (b k))`,
/// `eta L = sqrt(k2 / (6 d m))`, `T = ceil(4 Delta_f / (eta m eps^2))`.
pub fn worst_case_hyperparams(input: &HyperparamInputs) -> Result<Hyperparams> {
    check(input)?;
    if input.k2 == 0 {
        return Err(invalid("the worst-case step size vanishes when k2 = 0; use k1 = 0, k2 = d for a dense run"));
    }
    calculate(input, 2.0, 4.0, |m| (input.k2 as f64 / (6.0 * input.d as f64 * m)).sqrt())
}

/// `B = ceil(3 sigma^2 / eps^2 ∧ n)`, `m = ceil(B d / (b k))`,
/// `eta L = sqrt((b ∧ m) / (3 m))`, `T = ceil(6 Delta_f / (eta m eps^2))`.
pub fn data_adaptive_hyperparams(input: &HyperparamInputs) -> Result<Hyperparams> {
    check(input)?;
    calculate(input, 3.0, 6.0, |m| ((input.b as f64).min(m) / (3.0 * m)).sqrt())
}

fn check(input: &HyperparamInputs) -> Result<()> {
    if !(input.epsilon > 0.0 && input.epsilon.is_finite()) {
        return Err(invalid("epsilon must be positive and finite"));
    }
    if input.b == 0 || input.n == 0 {
        return Err(invalid("b and n must be positive"));
    }
    let c = &input.constants;
    if !(c.l > 0.0 && c.sigma2 >= 0.0 && c.delta_f >= 0.0) || !(c.l.is_finite() && c.sigma2.is_finite() && c.delta_f.is_finite()) {
        return Err(invalid("constants need finite L > 0, sigma2 >= 0, delta_f >= 0"));
    }
    SparsityParams::new(input.k1, input.k2, input.d)?;
    Ok(())
}

fn calculate(
    input: &HyperparamInputs,
    batch_factor: f64,
    loop_factor: f64,
    eta_l: impl Fn(f64) -> f64,
) -> Result<Hyperparams> {
    let c = &input.constants;
    let eps2 = input.epsilon * input.epsilon;
    // the small batch is drawn from the large one's population, so B >= b
    let big_batch = ceil_count((batch_factor * c.sigma2 / eps2).min(input.n as f64)).max(input.b);
    let k = (input.k1 + input.k2) as f64;
    let m = ceil_count(big_batch as f64 * input.d as f64 / (input.b as f64 * k)).max(1);
    let eta = eta_l(m as f64) / c.l;
    let outer_loops = ceil_count(loop_factor * c.delta_f / (eta * m as f64 * eps2)).max(1);
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(invalid("calculated step size is not positive and finite"));
    }
    Ok(Hyperparams {
        big_batch,
        m,
        eta,
        outer_loops,
    })
}

/// Ceiling that treats values within a relative `1e-9` of an integer as that
/// integer, so `2 / 0.1^2` gives 200 rather than 201.
fn ceil_count(v: f64) -> usize {
    let r = v.round();
    let c = if (v - r).abs() <= 1e-9 * r.abs().max(1.0) { r } else { v.ceil() };
    c.max(0.0) as usize
}
