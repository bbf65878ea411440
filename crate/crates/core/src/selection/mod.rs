//! Parent selection operators.
//!
//! Every operator reads a frozen [`ErrorMatrix`] and a random stream and
//! returns `k` population indices. No operator evaluates individuals.

mod batch;
mod lexicase;
mod tournament;

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::exprtree::{mean, EvalResult};

pub use batch::{
    order_cases_by_difficulty, partition_batches, select_batch_tournament, BatchPlan,
    BatchTournamentConfig,
};
pub use lexicase::{compute_auto_epsilon, select_epsilon_lexicase, select_lexicase, EpsilonLexicaseState};
pub use tournament::select_tournament;

/// Row-major N x T matrix of non-negative per-case errors, one row per
/// individual, with each row's mean cached.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorMatrix {
    n_cases: usize,
    errors: Vec<f64>,
    row_mae: Vec<f64>,
}

impl ErrorMatrix {
    pub fn new(n_individuals: usize, n_cases: usize, errors: Vec<f64>) -> Result<Self> {
        if n_individuals == 0 || n_cases == 0 {
            return Err(Error::Config("error matrix must be non-empty".into()));
        }
        if errors.len() != n_individuals * n_cases {
            return Err(Error::Config(format!(
                "{} errors do not form a {n_individuals} x {n_cases} matrix",
                errors.len()
            )));
        }
        if let Some(pos) = errors.iter().position(|e| !(e.is_finite() && *e >= 0.0)) {
            return Err(Error::Config(format!(
                "error at individual {}, case {} is {} (must be finite and >= 0)",
                pos / n_cases,
                pos % n_cases,
                errors[pos]
            )));
        }
        let row_mae = errors.chunks_exact(n_cases).map(mean).collect();
        Ok(ErrorMatrix {
            n_cases,
            errors,
            row_mae,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n_cases = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n_cases) {
            return Err(Error::Config("ragged error rows".into()));
        }
        ErrorMatrix::new(rows.len(), n_cases, rows.concat())
    }

    pub fn from_evaluations(evals: &[EvalResult]) -> Result<Self> {
        let n_cases = evals.first().map_or(0, |e| e.case_errors.len());
        let mut errors = Vec::with_capacity(evals.len() * n_cases);
        for e in evals {
            if e.case_errors.len() != n_cases {
                return Err(Error::Config("evaluations cover different case counts".into()));
            }
            errors.extend_from_slice(&e.case_errors);
        }
        ErrorMatrix::new(evals.len(), n_cases, errors)
    }

    pub fn n_individuals(&self) -> usize {
        self.row_mae.len()
    }

    pub fn n_cases(&self) -> usize {
        self.n_cases
    }

    #[inline]
    pub fn get(&self, individual: usize, case: usize) -> f64 {
        self.errors[individual * self.n_cases + case]
    }

    pub fn row(&self, individual: usize) -> &[f64] {
        &self.errors[individual * self.n_cases..(individual + 1) * self.n_cases]
    }

    pub fn row_mae(&self) -> &[f64] {
        &self.row_mae
    }

    /// Index of the lowest mean error; ties go to the lowest index.
    pub fn best_index(&self) -> usize {
        let mut best = 0;
        for (i, &m) in self.row_mae.iter().enumerate().skip(1) {
            if m < self.row_mae[best] {
                best = i;
            }
        }
        best
    }

    /// Every entry multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        ErrorMatrix::new(
            self.n_individuals(),
            self.n_cases,
            self.errors.iter().map(|e| e * factor).collect(),
        )
    }
}

/// The selection operator of a run, identified by its config id:
/// `Tourn/<ts>`, `Lex`, `Ae-Lex`, `BTS/<bs>/<ts>` or `BTSS/<bs>/<ts>`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Selector {
    Tournament { size: usize },
    Lexicase,
    AutoEpsilonLexicase,
    BatchTournament { batch_size: usize, tourn_size: usize, shuffle: bool },
}

impl Selector {
    pub fn select<R: Rng + ?Sized>(&self, em: &ErrorMatrix, k: usize, rng: &mut R) -> Vec<usize> {
        match *self {
            Selector::Tournament { size } => select_tournament(em, size, k, rng),
            Selector::Lexicase => select_lexicase(em, k, rng),
            Selector::AutoEpsilonLexicase => {
                let eps = compute_auto_epsilon(em);
                select_epsilon_lexicase(em, &eps, k, rng)
            }
            Selector::BatchTournament {
                batch_size,
                tourn_size,
                shuffle,
            } => select_batch_tournament(
                em,
                &BatchTournamentConfig {
                    batch_size,
                    tourn_size,
                    shuffle,
                    k,
                },
                rng,
            ),
        }
    }

    pub fn config_id(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for Selector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Selector::Tournament { size } => write!(f, "Tourn/{size}"),
            Selector::Lexicase => f.write_str("Lex"),
            Selector::AutoEpsilonLexicase => f.write_str("Ae-Lex"),
            Selector::BatchTournament {
                batch_size,
                tourn_size,
                shuffle,
            } => write!(
                f,
                "{}/{batch_size}/{tourn_size}",
                if shuffle { "BTSS" } else { "BTS" }
            ),
        }
    }
}

impl FromStr for Selector {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.trim().split('/').collect();
        let size = |p: &str| -> Result<usize> {
            match p.parse::<usize>() {
                Ok(v) if v >= 1 => Ok(v),
                _ => Err(Error::Config(format!("bad size '{p}' in selector '{s}'"))),
            }
        };
        match parts.as_slice() {
            ["Tourn", ts] => Ok(Selector::Tournament { size: size(ts)? }),
            ["Lex"] => Ok(Selector::Lexicase),
            ["Ae-Lex"] => Ok(Selector::AutoEpsilonLexicase),
            [family @ ("BTS" | "BTSS"), bs, ts] => Ok(Selector::BatchTournament {
                batch_size: size(bs)?,
                tourn_size: size(ts)?,
                shuffle: *family == "BTSS",
            }),
            _ => Err(Error::Config(format!(
                "unknown selector '{s}' (expected Tourn/<ts>, Lex, Ae-Lex, BTS/<bs>/<ts> or BTSS/<bs>/<ts>)"
            ))),
        }
    }
}

impl Serialize for Selector {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Selector {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(deserializer)?
            .parse()
            .map_err(serde::de::Error::custom)
    }
}
