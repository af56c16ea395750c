//! Named desk-scale configurations, one per experiment family.

pub const NAMES: [&str; 4] = ["sparse-vs-dense-least-squares", "logistic", "mlp-blobs", "matrix-factorization"];

/// Planted-sparse least squares, 5 of 100 coordinates active. Expected: the
/// sparse variant reaches any fixed loss level at fewer query units than
/// dense SpiderBoost.
const SPARSE_VS_DENSE_LEAST_SQUARES: &str = "\
problem.kind = planted-sparse-ls
problem.n = 10000
problem.d = 100
problem.active = 5
problem.data_seed = 1
opt.algorithms = sparse-spiderboost, spiderboost
opt.outer_loops = 20
run.seeds = 1, 2, 3
run.bin_width = 0.5
";

/// Two Gaussian blobs with a logistic loss. Expected: the sparse variant
/// reaches each loss level at fewer query units than dense SpiderBoost.
/// Plain SGD is competitive on a problem this well conditioned.
const LOGISTIC: &str = "\
problem.kind = logistic-blobs
problem.n = 5000
problem.d = 40
problem.separation = 1.5
problem.ridge = 0.001
problem.data_seed = 1
opt.algorithms = sparse-spiderboost, spiderboost, sgd
opt.eta = 0.5
opt.outer_loops = 20
run.seeds = 1, 2, 3
";

/// One-hidden-layer MLP on blobs with per-layer sparsity budgets. Expected:
/// the loss falls for all variants, the sparse one ahead of dense
/// SpiderBoost per query unit.
const MLP_BLOBS: &str = "\
problem.kind = logistic-blobs
problem.model = mlp
problem.n = 2000
problem.d = 10
problem.hidden = 16
problem.ridge = 0.0001
problem.data_seed = 1
opt.algorithms = sparse-spiderboost, spiderboost, sgd
opt.eta = 0.2
opt.outer_loops = 20
run.seeds = 1, 2, 3
";

/// Rank-3 matrix completion from a small random start. Expected: after a
/// slow start near the origin the loss falls to the noise floor; the sparse
/// variant leaves the plateau at fewer query units than dense SpiderBoost.
const MATRIX_FACTORIZATION: &str = "\
problem.kind = low-rank-ratings
problem.users = 100
problem.items = 80
problem.rank = 3
problem.observed = 4000
problem.ridge = 0.001
problem.data_seed = 1
opt.algorithms = sparse-spiderboost, spiderboost, sgd
opt.eta = 3
opt.outer_loops = 40
run.seeds = 1, 2, 3
";

/// Configuration text of a preset.
pub fn text(name: &str) -> Option<&'static str> {
    match name {
        "sparse-vs-dense-least-squares" => Some(SPARSE_VS_DENSE_LEAST_SQUARES),
        "logistic" => Some(LOGISTIC),
        "mlp-blobs" => Some(MLP_BLOBS),
        "matrix-factorization" => Some(MATRIX_FACTORIZATION),
        _ => None,
    }
}
