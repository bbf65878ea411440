//! Generational GP loop: evaluate, record, select, vary, keep elites.

use std::collections::HashSet;
use std::fs;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::exprtree::{EvalResult, Evaluator, ExprTree};
use crate::genetics::{init_population, make_offspring, PrimitiveSet, VariationConfig};
use crate::par::Parallelism;
use crate::rng;
use crate::selection::{ErrorMatrix, Selector};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineConfig {
    pub population_size: usize,
    pub generations: usize,
    pub selector: Selector,
    pub variation: VariationConfig,
    pub seed: u64,
    /// How offspring are evaluated. Never affects the result.
    pub evaluation: Parallelism,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            population_size: 1000,
            generations: 1000,
            selector: Selector::AutoEpsilonLexicase,
            variation: VariationConfig::default(),
            seed: 0,
            evaluation: Parallelism::default(),
        }
    }
}

impl EngineConfig {
    /// Parses and validates a TOML engine configuration.
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: EngineConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        EngineConfig::from_toml(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<()> {
        self.variation.validate()?;
        if self.population_size <= self.variation.elite_count {
            return Err(Error::Config(format!(
                "population_size ({}) must exceed elite_count ({})",
                self.population_size, self.variation.elite_count
            )));
        }
        Ok(())
    }

    /// Parents drawn per generation; elites fill the remaining slots.
    pub fn parents_per_generation(&self) -> usize {
        self.population_size - self.variation.elite_count
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationStats {
    pub gen: usize,
    pub best_train_mae: f64,
    /// Test error of the individual that is best on the training set.
    pub best_test_mae: f64,
    pub diversity: f64,
    /// Time spent in the selection call that produced this generation.
    pub selection_wall_time_seconds: f64,
    /// Wall time since the start of the run.
    pub total_wall_time_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub config_id: String,
    pub seed: u64,
    pub dataset: String,
    pub per_generation: Vec<GenerationStats>,
    pub final_best: ExprTree,
}

pub const CSV_HEADER: [&str; 6] = [
    "gen",
    "best_train_mae",
    "best_test_mae",
    "diversity",
    "selection_wall_time_s",
    "total_wall_time_s",
];

impl RunRecord {
    pub fn last(&self) -> &GenerationStats {
        self.per_generation.last().expect("a run records at least generation 0")
    }

    pub fn total_seconds(&self) -> f64 {
        self.last().total_wall_time_seconds
    }

    /// Equality ignoring the wall-clock columns.
    pub fn same_trajectory(&self, other: &RunRecord) -> bool {
        let strip = |r: &RunRecord| {
            r.per_generation
                .iter()
                .map(|g| (g.gen, g.best_train_mae, g.best_test_mae, g.diversity))
                .collect::<Vec<_>>()
        };
        self.config_id == other.config_id
            && self.seed == other.seed
            && self.dataset == other.dataset
            && self.final_best == other.final_best
            && strip(self) == strip(other)
    }

    pub fn to_csv(&self) -> String {
        let mut out = CSV_HEADER.join(",");
        out.push('\n');
        for g in &self.per_generation {
            out.push_str(&format!(
                "{},{:?},{:?},{:?},{:?},{:?}\n",
                g.gen,
                g.best_train_mae,
                g.best_test_mae,
                g.diversity,
                g.selection_wall_time_seconds,
                g.total_wall_time_seconds
            ));
        }
        out
    }

    /// Writes `record.json` and `record.csv` into `dir`.
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let json = serde_json::to_string_pretty(self)?;
        write_atomic(&dir.join("record.csv"), self.to_csv().as_bytes())?;
        // written last: its presence marks the run as complete
        write_atomic(&dir.join("record.json"), json.as_bytes())
    }

    pub fn read_from(dir: &Path) -> Result<RunRecord> {
        let path = dir.join("record.json");
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

/// Fraction of distinct mean errors in the population, comparing values
/// rounded to 12 significant digits.
pub fn diversity(em: &ErrorMatrix) -> f64 {
    let distinct: HashSet<String> = em.row_mae().iter().map(|m| format!("{m:.11e}")).collect();
    distinct.len() as f64 / em.n_individuals() as f64
}

/// Evolves a population on `train`; `test` is only used to score the
/// train-best individual of each generation.
pub fn run(config: &EngineConfig, train: &Dataset, test: &Dataset) -> Result<RunRecord> {
    let mut evolution = Evolution::new(config, train, test)?;
    let mut per_generation = Vec::with_capacity(config.generations + 1);
    loop {
        let stats = evolution.stats()?;
        log::trace!("gen {}: best train MAE {}", stats.gen, stats.best_train_mae);
        per_generation.push(stats);
        if evolution.generation() == config.generations {
            return Ok(RunRecord {
                config_id: config.selector.config_id(),
                seed: config.seed,
                dataset: train.name().to_owned(),
                per_generation,
                final_best: evolution.best().clone(),
            });
        }
        evolution.step()?;
    }
}

/// A run in progress, advanced one generation at a time by [`Evolution::step`].
pub struct Evolution<'a> {
    config: &'a EngineConfig,
    pset: PrimitiveSet,
    train_eval: Evaluator,
    test_eval: Evaluator,
    rng: rng::GpRng,
    population: Vec<ExprTree>,
    evals: Vec<EvalResult>,
    errors: ErrorMatrix,
    gen: usize,
    start: Instant,
    last_selection_seconds: f64,
}

impl<'a> Evolution<'a> {
    /// Validates the inputs, then builds and evaluates generation 0.
    pub fn new(config: &'a EngineConfig, train: &Dataset, test: &Dataset) -> Result<Self> {
        config.validate()?;
        if train.n_features() != test.n_features() {
            return Err(Error::Config(format!(
                "training set has {} features, test set has {}",
                train.n_features(),
                test.n_features()
            )));
        }
        if train.n_cases() == 0 || test.n_cases() == 0 {
            return Err(Error::Data("training and test sets must be non-empty".into()));
        }
        let start = Instant::now();
        let mut rng = rng::seeded(config.seed);
        let pset = PrimitiveSet::new(train.n_features());
        let population = init_population(config.population_size, &config.variation, &pset, &mut rng);
        let train_eval = Evaluator::new(train);
        let evals = evaluate_all(config, &train_eval, &population)?;
        let errors = ErrorMatrix::from_evaluations(&evals)?;
        Ok(Evolution {
            config,
            pset,
            train_eval,
            test_eval: Evaluator::new(test),
            rng,
            population,
            evals,
            errors,
            gen: 0,
            start,
            last_selection_seconds: 0.0,
        })
    }

    pub fn generation(&self) -> usize {
        self.gen
    }

    pub fn population(&self) -> &[ExprTree] {
        &self.population
    }

    /// Training errors of the current population.
    pub fn errors(&self) -> &ErrorMatrix {
        &self.errors
    }

    /// Lowest training MAE, lowest index on ties.
    pub fn best(&self) -> &ExprTree {
        &self.population[self.errors.best_index()]
    }

    /// Statistics of the current generation. Selection time refers to the
    /// selection that produced it, zero for generation 0.
    pub fn stats(&self) -> Result<GenerationStats> {
        let best = self.errors.best_index();
        Ok(GenerationStats {
            gen: self.gen,
            best_train_mae: self.errors.row_mae()[best],
            best_test_mae: self.test_eval.evaluate(&self.population[best])?.mae,
            diversity: diversity(&self.errors),
            selection_wall_time_seconds: self.last_selection_seconds,
            total_wall_time_seconds: self.start.elapsed().as_secs_f64(),
        })
    }

    /// Select parents, vary them, evaluate the offspring and carry the elites over.
    pub fn step(&mut self) -> Result<()> {
        let config = self.config;
        let t0 = Instant::now();
        let chosen = config
            .selector
            .select(&self.errors, config.parents_per_generation(), &mut self.rng);
        self.last_selection_seconds = t0.elapsed().as_secs_f64();

        let parents: Vec<ExprTree> = chosen.iter().map(|&i| self.population[i].clone()).collect();
        let offspring = make_offspring(&parents, &config.variation, &self.pset, &mut self.rng);
        let offspring_evals = evaluate_all(config, &self.train_eval, &offspring)?;

        let mae = self.errors.row_mae();
        let mut ranked: Vec<usize> = (0..self.population.len()).collect();
        ranked.sort_by(|&a, &b| mae[a].total_cmp(&mae[b]).then(a.cmp(&b)));
        let elites = &ranked[..config.variation.elite_count];
        let mut population: Vec<ExprTree> = elites.iter().map(|&e| self.population[e].clone()).collect();
        let mut evals: Vec<EvalResult> = elites.iter().map(|&e| self.evals[e].clone()).collect();
        population.extend(offspring);
        evals.extend(offspring_evals);

        self.errors = ErrorMatrix::from_evaluations(&evals)?;
        self.population = population;
        self.evals = evals;
        self.gen += 1;
        Ok(())
    }
}

fn evaluate_all(config: &EngineConfig, evaluator: &Evaluator, trees: &[ExprTree]) -> Result<Vec<EvalResult>> {
    config
        .evaluation
        .map(trees, |t| evaluator.evaluate(t))
        .into_iter()
        .collect()
}
