#![allow(dead_code)]

use batchsel::data::Dataset;
use batchsel::exprtree::{ExprTree, PrimitiveOp};
use batchsel::selection::ErrorMatrix;
use rand::Rng;

/// Values that stress the protected operators: zeros, signed tiny and huge
/// magnitudes, exp overflow thresholds and ordinary reals.
pub fn nasty_value<R: Rng>(rng: &mut R) -> f64 {
    match rng.random_range(0..10) {
        0 => 0.0,
        1 => -0.0,
        2 => rng.random_range(-1e-300..1e-300),
        3 => if rng.random_bool(0.5) { 1e308 } else { -1e308 },
        4 => rng.random_range(700.0..720.0),
        5 => f64::MIN_POSITIVE,
        6 => rng.random_range(-1e6..1e6),
        _ => rng.random_range(-5.0..5.0),
    }
}

/// Random tree with up to `depth` levels over `n_features` variables, with
/// constants drawn from [`nasty_value`].
pub fn random_tree<R: Rng>(rng: &mut R, depth: usize, n_features: usize) -> ExprTree {
    if depth == 0 || rng.random_bool(0.3) {
        return if rng.random_bool(0.6) {
            ExprTree::var(rng.random_range(0..n_features))
        } else {
            ExprTree::constant(nasty_value(rng))
        };
    }
    let op = PrimitiveOp::ALL[rng.random_range(0..PrimitiveOp::ALL.len())];
    let children = (0..op.arity()).map(|_| random_tree(rng, depth - 1, n_features)).collect();
    ExprTree::op(op, children)
}

pub fn random_dataset<R: Rng>(rng: &mut R, n_cases: usize, n_features: usize) -> Dataset {
    let rows: Vec<Vec<f64>> = (0..n_cases)
        .map(|_| (0..n_features).map(|_| nasty_value(rng)).collect())
        .collect();
    let targets = (0..n_cases).map(|_| rng.random_range(-10.0..10.0)).collect();
    Dataset::from_rows("fuzz", rows, targets).unwrap()
}

/// Errors on a coarse grid so that ties are common.
pub fn random_matrix<R: Rng>(rng: &mut R, max_n: usize, max_t: usize) -> ErrorMatrix {
    let n = rng.random_range(1..=max_n);
    let t = rng.random_range(1..=max_t);
    let coarse = rng.random_bool(0.5);
    let errors = (0..n * t)
        .map(|_| {
            if coarse {
                f64::from(rng.random_range(0..4u8)) * 0.25
            } else {
                rng.random::<f64>() * 10.0
            }
        })
        .collect();
    ErrorMatrix::new(n, t, errors).unwrap()
}
