use rand::Rng;

use super::ErrorMatrix;

/// Index of the first candidate with the lowest score.
pub(crate) fn first_min(candidates: &[usize], score: impl Fn(usize) -> f64) -> usize {
    let mut winner = candidates[0];
    let mut best = score(winner);
    for &c in &candidates[1..] {
        let s = score(c);
        if s < best {
            best = s;
            winner = c;
        }
    }
    winner
}

/// Draws `tourn_size` candidates uniformly with replacement into `buf`.
pub(crate) fn draw_candidates<R: Rng + ?Sized>(
    n: usize,
    tourn_size: usize,
    rng: &mut R,
    buf: &mut Vec<usize>,
) {
    buf.clear();
    buf.extend((0..tourn_size).map(|_| rng.random_range(0..n)));
}

/// Canonical tournament on mean error. Ties go to the earliest drawn candidate.
pub fn select_tournament<R: Rng + ?Sized>(
    em: &ErrorMatrix,
    tourn_size: usize,
    k: usize,
    rng: &mut R,
) -> Vec<usize> {
    assert!(tourn_size >= 1, "tournament size must be at least 1");
    let mae = em.row_mae();
    let mut candidates = Vec::with_capacity(tourn_size);
    (0..k)
        .map(|_| {
            draw_candidates(em.n_individuals(), tourn_size, rng, &mut candidates);
            first_min(&candidates, |i| mae[i])
        })
        .collect()
}
