mod common;

use rand::Rng;
use sparse_vr::problems::dataset::{Dataset, DatasetKind};
use sparse_vr::problems::synth::{generate, GenParams};
use sparse_vr::problems::FiniteSumProblem;
use sparse_vr::sampling::{sample_batch, RngStream};
use sparse_vr::vecops::norm2_sq;

fn all_problems(r: &mut RngStream) -> Vec<(&'static str, Box<dyn FiniteSumProblem<f64>>)> {
    vec![
        ("least squares", Box::new(common::random_least_squares(r, 50, 9, 0.05))),
        ("logistic", Box::new(common::random_logistic(r, 50, 9, 0.05))),
        ("mlp", Box::new(common::small_mlp(3))),
        ("factorization", Box::new(common::small_factorization(3))),
    ]
}

#[test]
fn batch_gradient_is_mean_of_component_gradients() {
    let mut r = RngStream::new(31, 0);
    for (label, p) in all_problems(&mut r) {
        let (n, d) = (p.n(), p.dim());
        for _ in 0..10 {
            let x = common::random_vec(&mut r, d, 1.0);
            let size = r.gen_range(1..=n);
            let batch = sample_batch(n, size, &mut r).unwrap();
            let g = p.grad_batch(&batch, &x).unwrap();
            let mut avg = vec![0.0; d];
            for &i in &batch {
                let gi = p.component_grad(i, &x).unwrap();
                for c in 0..d {
                    avg[c] += gi[c] / size as f64;
                }
            }
            for c in 0..d {
                assert!((g[c] - avg[c]).abs() <= 1e-10 * (1.0 + avg[c].abs()), "{label} coord {c}");
            }
        }
    }
}

#[test]
fn restricted_gradient_equals_masked_dense_gradient() {
    let mut r = RngStream::new(32, 0);
    for (label, p) in all_problems(&mut r) {
        let (n, d) = (p.n(), p.dim());
        for _ in 0..100 {
            let x = common::random_vec(&mut r, d, 1.0);
            let batch = sample_batch(n, r.gen_range(1..=n.min(12)), &mut r).unwrap();
            let coords = sample_batch(d, r.gen_range(1..=d), &mut r).unwrap();
            let dense = p.grad_batch(&batch, &x).unwrap();
            let restricted = p.grad_batch_restricted(&batch, &x, &coords).unwrap();
            for (slot, &c) in coords.iter().enumerate() {
                assert_eq!(restricted[slot].to_bits(), dense[c].to_bits(), "{label} coord {c}");
            }
        }
    }
}

#[test]
fn blocks_partition_the_parameters() {
    let mut r = RngStream::new(33, 0);
    for (label, p) in all_problems(&mut r) {
        let blocks = p.blocks();
        assert_eq!(blocks.first().unwrap().start, 0, "{label}");
        assert_eq!(blocks.last().unwrap().end, p.dim(), "{label}");
        assert!(blocks.windows(2).all(|w| w[0].end == w[1].start && !w[1].is_empty()), "{label}");
    }
}

#[test]
fn least_squares_minimum_is_stationary() {
    let p = common::planted_sparse(500, 20, 4, 34);
    let (x_star, f_star) = p.known_minimum().unwrap();
    let g = p.full_grad(x_star.as_slice()).unwrap();
    assert!(norm2_sq(g.as_slice()).sqrt() <= 1e-9);
    assert!((p.full_loss(x_star.as_slice()).unwrap() - f_star).abs() <= 1e-12);
    let mut r = RngStream::new(35, 0);
    for _ in 0..10 {
        let x = common::random_vec(&mut r, 20, 1.0);
        assert!(p.full_loss(&x).unwrap() >= f_star);
    }
}

#[test]
fn smoothness_hint_bounds_component_curvature() {
    // ||grad f_i(x) - grad f_i(y)|| <= L ||x - y|| on random pairs
    let mut r = RngStream::new(36, 0);
    let p = common::random_least_squares(&mut r, 30, 6, 0.1);
    let l = p.smoothness_hint().unwrap();
    for _ in 0..200 {
        let i = r.gen_range(0..30);
        let x = common::random_vec(&mut r, 6, 3.0);
        let y = common::random_vec(&mut r, 6, 3.0);
        let gx = p.component_grad(i, &x).unwrap();
        let gy = p.component_grad(i, &y).unwrap();
        let lhs = norm2_sq(gx.sub(&gy).unwrap().as_slice()).sqrt();
        let dist = x.iter().zip(&y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        assert!(lhs <= l * dist * (1.0 + 1e-9));
    }
}

#[test]
fn generated_datasets_round_trip_through_text() {
    let params = GenParams {
        n: 40,
        d: 6,
        users: 8,
        items: 7,
        observed: 30,
        ..GenParams::default()
    };
    for kind in DatasetKind::ALL {
        let ds = generate(kind, &params, 37).unwrap();
        let back = Dataset::parse(&ds.to_text()).unwrap();
        assert_eq!(back, ds, "{kind}");
    }
}
