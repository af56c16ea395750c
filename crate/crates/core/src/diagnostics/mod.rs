//! Query metering, memory-vector entropy, estimator variance probes and the
//! sparsity-capture quantities `g`, `G`, `R`.

mod capture;
mod entropy;
mod meter;
mod variance;

pub use capture::{mean_r, measure_g_G, SparsityCapture, CAPTURE_SWEEP_LIMIT};
pub use entropy::entropy_bits;
pub use meter::{meter_charge, MeterEvent, QueryMeter};
pub use variance::{batch_mean_variance_bound, batch_mean_variance_exact, estimate_estimator_variance};
