use rand::Rng;

use super::ErrorMatrix;
use crate::stats::median_absolute_deviation;

/// Per-case tolerance for automatic epsilon-lexicase.
#[derive(Debug, Clone, PartialEq)]
pub struct EpsilonLexicaseState {
    pub epsilon_per_case: Vec<f64>,
}

impl EpsilonLexicaseState {
    pub fn zeros(n_cases: usize) -> Self {
        EpsilonLexicaseState {
            epsilon_per_case: vec![0.0; n_cases],
        }
    }
}

/// Epsilon of each case is the median absolute deviation of the whole
/// population's errors on that case.
pub fn compute_auto_epsilon(em: &ErrorMatrix) -> EpsilonLexicaseState {
    let n = em.n_individuals();
    let mut column = Vec::with_capacity(n);
    let epsilon_per_case = (0..em.n_cases())
        .map(|t| {
            column.clear();
            column.extend((0..n).map(|i| em.get(i, t)));
            median_absolute_deviation(&column)
        })
        .collect();
    EpsilonLexicaseState { epsilon_per_case }
}

/// Lexicase selection: filter the population through a random case order,
/// keeping only the best performers on each case.
pub fn select_lexicase<R: Rng + ?Sized>(em: &ErrorMatrix, k: usize, rng: &mut R) -> Vec<usize> {
    filter_select(em, None, k, rng)
}

/// As [`select_lexicase`], but a survivor passes a case when its error is within
/// `epsilon_per_case[t]` of the best current survivor.
pub fn select_epsilon_lexicase<R: Rng + ?Sized>(
    em: &ErrorMatrix,
    eps: &EpsilonLexicaseState,
    k: usize,
    rng: &mut R,
) -> Vec<usize> {
    assert_eq!(eps.epsilon_per_case.len(), em.n_cases(), "epsilon length mismatch");
    filter_select(em, Some(&eps.epsilon_per_case), k, rng)
}

fn filter_select<R: Rng + ?Sized>(
    em: &ErrorMatrix,
    eps: Option<&[f64]>,
    k: usize,
    rng: &mut R,
) -> Vec<usize> {
    let n = em.n_individuals();
    let t_max = em.n_cases();
    // Cases are drawn by an incremental Fisher-Yates shuffle over this buffer,
    // so each parent sees a fresh uniform order and only pays for the cases it
    // actually visits.
    let mut order: Vec<usize> = (0..t_max).collect();
    let mut survivors: Vec<usize> = Vec::with_capacity(n);
    let mut selected = Vec::with_capacity(k);
    for _ in 0..k {
        survivors.clear();
        survivors.extend(0..n);
        let mut step = 0;
        while survivors.len() > 1 && step < t_max {
            let j = rng.random_range(step..t_max);
            order.swap(step, j);
            let case = order[step];
            step += 1;

            let best = survivors
                .iter()
                .map(|&i| em.get(i, case))
                .fold(f64::INFINITY, f64::min);
            let threshold = best + eps.map_or(0.0, |e| e[case]);
            survivors.retain(|&i| em.get(i, case) <= threshold);
        }
        let pick = match survivors.len() {
            1 => survivors[0],
            len => survivors[rng.random_range(0..len)],
        };
        selected.push(pick);
    }
    selected
}
