//! Wall-clock microbenchmark of the selection operators on synthetic error
//! matrices with uniform `[0, 1)` entries.

use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{derive_seed, seeded};
use crate::selection::{ErrorMatrix, Selector};
use crate::stats::median;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelbenchRow {
    pub selector: String,
    pub n: usize,
    pub t: usize,
    pub k: usize,
    pub repetitions: usize,
    pub median_seconds: f64,
    pub min_seconds: f64,
    pub max_seconds: f64,
}

pub fn uniform_error_matrix(n: usize, t: usize, seed: u64) -> Result<ErrorMatrix> {
    let mut rng = seeded(seed);
    ErrorMatrix::new(n, t, (0..n * t).map(|_| rng.random::<f64>()).collect())
}

/// Times `repetitions` calls of each selector choosing `k` parents from an
/// `n x t` matrix. Matrix construction is not timed; Ae-Lex timing includes
/// its per-call epsilon computation.
pub fn selbench(
    n: usize,
    t: usize,
    k: usize,
    selectors: &[Selector],
    repetitions: usize,
    seed: u64,
) -> Result<Vec<SelbenchRow>> {
    if n == 0 || t == 0 || k == 0 || repetitions == 0 {
        return Err(Error::Config("selbench needs n, t, k and repetitions >= 1".into()));
    }
    let em = uniform_error_matrix(n, t, seed)?;
    let mut rows = Vec::with_capacity(selectors.len());
    for selector in selectors {
        let id = selector.config_id();
        let mut times = Vec::with_capacity(repetitions);
        for rep in 0..repetitions {
            let mut rng = seeded(derive_seed(seed, &[&id, &rep.to_string()]));
            let start = Instant::now();
            let picked = selector.select(&em, k, &mut rng);
            times.push(start.elapsed().as_secs_f64());
            std::hint::black_box(picked);
        }
        rows.push(SelbenchRow {
            selector: id,
            n,
            t,
            k,
            repetitions,
            median_seconds: median(&times),
            min_seconds: times.iter().copied().fold(f64::INFINITY, f64::min),
            max_seconds: times.iter().copied().fold(0.0, f64::max),
        });
    }
    Ok(rows)
}

pub fn to_csv(rows: &[SelbenchRow]) -> String {
    let mut out = String::from("selector,n,t,k,repetitions,median_seconds,min_seconds,max_seconds\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{:?},{:?},{:?}\n",
            r.selector, r.n, r.t, r.k, r.repetitions, r.median_seconds, r.min_seconds, r.max_seconds
        ));
    }
    out
}
