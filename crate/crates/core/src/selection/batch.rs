//! Batch tournament selection (BTS) and its shuffled variant (BTSS).
//!
//! Cases are ordered once per call, either by descending error of the current
//! best individual (BTS, hardest cases first) or by a uniform permutation
//! (BTSS), then chunked into batches. Each batch hosts one tournament scored by
//! the candidates' mean error over that batch. The batch queue restarts from
//! the first batch until `k` parents have been chosen.

use rand::seq::SliceRandom;
use rand::Rng;

use super::tournament::{draw_candidates, first_min};
use super::ErrorMatrix;
use crate::exprtree::mean_of;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BatchTournamentConfig {
    pub batch_size: usize,
    pub tourn_size: usize,
    /// `false` orders cases by difficulty (BTS), `true` permutes them (BTSS).
    pub shuffle: bool,
    pub k: usize,
}

/// An ordered partition of case indices into consecutive batches.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BatchPlan {
    pub case_order: Vec<usize>,
    pub batches: Vec<std::ops::Range<usize>>,
}

impl BatchPlan {
    pub fn batch(&self, b: usize) -> &[usize] {
        &self.case_order[self.batches[b].clone()]
    }

    pub fn len(&self) -> usize {
        self.batches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.batches.is_empty()
    }
}

/// Case indices sorted by the error of the best individual (lowest mean error,
/// lowest index on ties), largest error first; equal errors keep index order.
pub fn order_cases_by_difficulty(em: &ErrorMatrix) -> Vec<usize> {
    let best = em.row(em.best_index());
    let mut order: Vec<usize> = (0..em.n_cases()).collect();
    order.sort_by(|&a, &b| best[b].total_cmp(&best[a]));
    order
}

/// Consecutive chunks of `batch_size`; the last chunk holds any remainder.
pub fn partition_batches(case_order: Vec<usize>, batch_size: usize) -> BatchPlan {
    assert!(batch_size >= 1, "batch size must be at least 1");
    let t = case_order.len();
    let batches = (0..t)
        .step_by(batch_size)
        .map(|start| start..(start + batch_size).min(t))
        .collect();
    BatchPlan {
        case_order,
        batches,
    }
}

pub fn select_batch_tournament<R: Rng + ?Sized>(
    em: &ErrorMatrix,
    config: &BatchTournamentConfig,
    rng: &mut R,
) -> Vec<usize> {
    assert!(
        config.batch_size >= 1 && config.tourn_size >= 1,
        "batch and tournament sizes must be at least 1"
    );
    let case_order = if config.shuffle {
        let mut order: Vec<usize> = (0..em.n_cases()).collect();
        order.shuffle(rng);
        order
    } else {
        order_cases_by_difficulty(em)
    };
    let plan = partition_batches(case_order, config.batch_size);

    // The batch mean is summed in ascending case order, so a batch covering
    // every case scores exactly the cached row mean.
    let batches: Vec<Vec<usize>> = (0..plan.len())
        .map(|b| {
            let mut cases = plan.batch(b).to_vec();
            cases.sort_unstable();
            cases
        })
        .collect();

    let mut candidates = Vec::with_capacity(config.tourn_size);
    let mut selected = Vec::with_capacity(config.k);
    for cases in batches.iter().cycle().take(config.k) {
        draw_candidates(em.n_individuals(), config.tourn_size, rng, &mut candidates);
        let winner = first_min(&candidates, |i| batch_mean(em, i, cases));
        selected.push(winner);
    }
    selected
}

#[inline]
fn batch_mean(em: &ErrorMatrix, individual: usize, cases: &[usize]) -> f64 {
    let row = em.row(individual);
    mean_of(cases.iter().map(|&c| row[c]), cases.len())
}
