//! Sparse SpiderBoost, its dense counterpart, SGD, and the step-size calculators.

mod blocks;
mod config;
mod hyper;
mod memory;
mod record;
mod sgd;
mod spider;

pub use blocks::{allocate_block_budget, DrawnSupport, Sparsifier};
pub use config::{default_sparsity, InnerMode, OutputMode, RunConfig, Schedule};
pub use hyper::{data_adaptive_hyperparams, worst_case_hyperparams, HyperparamInputs, Hyperparams};
pub use memory::{ema_update, MemoryVector};
pub use record::{Algorithm, RecordRow, RunRecord, RunStatus};
pub use sgd::{run_sgd, run_sgd_from, SgdConfig};
pub use spider::{
    run_sparse_spiderboost, run_sparse_spiderboost_from, run_spiderboost_dense, run_spiderboost_dense_from, RunOutput,
    DIVERGENCE_FACTOR,
};
