//! Grid-search campaigns over datasets, selectors and repeated k-fold
//! cross-validation.
//!
//! Layout on disk:
//!
//! ```text
//! <out>/campaign.toml
//! <out>/<dataset>/<config_id>/run_<i>/record.json   (+ record.csv)
//! ```
//!
//! Run `i` of a configuration uses fold `i % folds` of repetition `i / folds`.
//! All configurations share the same splits, so their runs are paired. Seeds:
//!
//! * data sample (synthetic sets): `derive_seed(master, [dataset, "data"])`
//! * fold split of repetition `r`:  `derive_seed(master, [dataset, "split", r])`
//! * engine seed of run `i`:        `derive_seed(master, [dataset, config_id, i])`

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::analysis::{build_comparison_table, top_k_configs, ConfigResult, Report};
use crate::data::{fold_view, make_folds, normalize_features, Dataset, DatasetRegistry, DatasetSource};
use crate::engine::{self, write_atomic, EngineConfig, RunRecord};
use crate::error::{Error, Result};
use crate::par::Parallelism;
use crate::rng::derive_seed;
use crate::selection::Selector;

/// Batch and tournament sizes of the standard grid.
pub const STANDARD_GRID: [usize; 7] = [2, 4, 8, 16, 32, 64, 128];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CampaignConfig {
    pub master_seed: u64,
    /// Dataset references, see [`DatasetSource::parse`].
    pub datasets: Vec<String>,
    /// Configurations run as listed.
    pub selectors: Vec<Selector>,
    /// Adds `Tourn/<ts>` for every entry of `tourn_sizes`.
    pub tournament_grid: bool,
    /// Adds `BTS`/`BTSS` for every (batch size, tournament size, shuffle) triple.
    pub batch_grid: bool,
    pub batch_sizes: Vec<usize>,
    pub tourn_sizes: Vec<usize>,
    pub shuffle: Vec<bool>,
    pub runs: usize,
    pub folds: usize,
    /// `selector` and `seed` are set per cell.
    pub engine: EngineConfig,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        CampaignConfig {
            master_seed: 0,
            datasets: Vec::new(),
            selectors: vec![Selector::AutoEpsilonLexicase],
            tournament_grid: true,
            batch_grid: true,
            batch_sizes: STANDARD_GRID.to_vec(),
            tourn_sizes: STANDARD_GRID.to_vec(),
            shuffle: vec![false, true],
            runs: 25,
            folds: 5,
            engine: EngineConfig::default(),
        }
    }
}

impl CampaignConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: CampaignConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        CampaignConfig::from_toml(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.engine.validate()?;
        if self.datasets.is_empty() {
            return Err(Error::Config("campaign lists no datasets".into()));
        }
        for d in &self.datasets {
            DatasetSource::parse(d)?;
        }
        if self.expand_selectors().is_empty() {
            return Err(Error::Config("campaign expands to no configurations".into()));
        }
        if self.runs == 0 || self.folds < 2 {
            return Err(Error::Config("need runs >= 1 and folds >= 2".into()));
        }
        if self.batch_sizes.iter().chain(&self.tourn_sizes).any(|&s| s == 0) {
            return Err(Error::Config("batch and tournament sizes must be at least 1".into()));
        }
        Ok(())
    }

    /// Every configuration of the campaign, without duplicates, in a fixed order:
    /// explicit selectors, then the tournament grid, then the batch grid.
    pub fn expand_selectors(&self) -> Vec<Selector> {
        let mut out: Vec<Selector> = Vec::new();
        let mut push = |s: Selector| {
            if !out.contains(&s) {
                out.push(s);
            }
        };
        self.selectors.iter().copied().for_each(&mut push);
        if self.tournament_grid {
            for &size in &self.tourn_sizes {
                push(Selector::Tournament { size });
            }
        }
        if self.batch_grid {
            for &shuffle in &self.shuffle {
                for &batch_size in &self.batch_sizes {
                    for &tourn_size in &self.tourn_sizes {
                        push(Selector::BatchTournament {
                            batch_size,
                            tourn_size,
                            shuffle,
                        });
                    }
                }
            }
        }
        out
    }

    pub fn cells(&self) -> Vec<Cell> {
        let selectors = self.expand_selectors();
        let mut cells = Vec::new();
        for dataset in &self.datasets {
            for &selector in &selectors {
                for run_index in 0..self.runs {
                    cells.push(Cell {
                        dataset: dataset.clone(),
                        selector,
                        run_index,
                    });
                }
            }
        }
        cells
    }

    pub fn data_seed(&self, dataset: &str) -> u64 {
        derive_seed(self.master_seed, &[dataset, "data"])
    }

    pub fn split_seed(&self, dataset: &str, repetition: usize) -> u64 {
        derive_seed(self.master_seed, &[dataset, "split", &repetition.to_string()])
    }

    pub fn engine_seed(&self, cell: &Cell) -> u64 {
        derive_seed(
            self.master_seed,
            &[&cell.dataset, &cell.selector.config_id(), &cell.run_index.to_string()],
        )
    }
}

/// One (dataset, configuration, run) unit of a campaign.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cell {
    pub dataset: String,
    pub selector: Selector,
    pub run_index: usize,
}

impl Cell {
    pub fn dir(&self, root: &Path) -> PathBuf {
        root.join(dataset_label(&self.dataset))
            .join(self.selector.config_id())
            .join(format!("run_{}", self.run_index))
    }
}

/// Directory name for a dataset reference.
pub fn dataset_label(reference: &str) -> String {
    match DatasetSource::parse(reference) {
        Ok(DatasetSource::Csv(path)) => path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| reference.to_owned()),
        _ => reference.replace([':', '/', '\\'], "_"),
    }
}

/// Where datasets named in campaigns and runs are looked up.
#[derive(Debug, Clone, Default)]
pub struct DataContext {
    pub registry: DatasetRegistry,
    pub root: PathBuf,
}

impl DataContext {
    pub fn load(&self, reference: &str, seed: u64) -> Result<Dataset> {
        DatasetSource::parse(reference)?.load(&self.registry, &self.root, seed)
    }
}

/// Train/test pair for one fold, features z-scored with training statistics.
pub fn prepare_fold(data: &Dataset, folds: usize, split_seed: u64, fold: usize) -> Result<(Dataset, Dataset)> {
    let split = make_folds(data.n_cases(), folds, split_seed)?;
    let (train, test) = fold_view(data, &split, fold)?;
    let (train, mut others) = normalize_features(&train, &[test])?;
    Ok((train, others.remove(0)))
}

pub fn run_cell(config: &CampaignConfig, cell: &Cell, data: &Dataset) -> Result<RunRecord> {
    let repetition = cell.run_index / config.folds;
    let fold = cell.run_index % config.folds;
    let (train, test) = prepare_fold(data, config.folds, config.split_seed(&cell.dataset, repetition), fold)?;
    let engine_config = EngineConfig {
        selector: cell.selector,
        seed: config.engine_seed(cell),
        ..config.engine.clone()
    };
    let mut record = engine::run(&engine_config, &train, &test)?;
    record.dataset = cell.dataset.clone();
    Ok(record)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct GridSummary {
    pub completed: usize,
    pub skipped: usize,
}

/// Runs every cell that has no `record.json` yet, `jobs` at a time.
/// Finished cells are written as soon as they complete, so an interrupted
/// campaign resumes where it stopped.
pub fn run_grid(config: &CampaignConfig, out: &Path, jobs: usize, ctx: &DataContext) -> Result<GridSummary> {
    config.validate()?;
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let manifest = out.join("campaign.toml");
    if manifest.exists() {
        let existing = CampaignConfig::load(&manifest)?;
        if existing != *config {
            return Err(Error::Config(format!(
                "{} belongs to a different campaign",
                out.display()
            )));
        }
    } else {
        write_atomic(&manifest, config.to_toml()?.as_bytes())?;
    }

    let mut datasets = BTreeMap::new();
    for reference in &config.datasets {
        datasets.insert(reference.clone(), ctx.load(reference, config.data_seed(reference))?);
    }

    let cells = config.cells();
    let pending: Vec<&Cell> = cells
        .iter()
        .filter(|c| !c.dir(out).join("record.json").exists())
        .collect();
    let skipped = cells.len() - pending.len();
    log::info!("{} cells pending, {skipped} already complete", pending.len());

    let outcomes = Parallelism::Parallel.map_on_pool(jobs, &pending, |cell| -> Result<()> {
        let record = run_cell(config, cell, &datasets[&cell.dataset])?;
        record.write_to(&cell.dir(out))?;
        log::info!(
            "{} {} run {}: test MAE {:.6}",
            cell.dataset,
            cell.selector,
            cell.run_index,
            record.last().best_test_mae
        );
        Ok(())
    });
    for outcome in outcomes {
        outcome?;
    }
    Ok(GridSummary {
        completed: pending.len(),
        skipped,
    })
}

/// Results per dataset and configuration, from whatever cells exist.
pub struct CampaignResults {
    pub config: CampaignConfig,
    /// dataset reference -> results in configuration order
    pub by_dataset: BTreeMap<String, Vec<ConfigResult>>,
    pub missing_cells: Vec<Cell>,
}

pub fn load_results(out: &Path) -> Result<CampaignResults> {
    let config = CampaignConfig::load(&out.join("campaign.toml"))?;
    let mut by_dataset = BTreeMap::new();
    let mut missing_cells = Vec::new();
    for dataset in &config.datasets {
        let mut results = Vec::new();
        for selector in config.expand_selectors() {
            let mut records = Vec::new();
            for run_index in 0..config.runs {
                let cell = Cell {
                    dataset: dataset.clone(),
                    selector,
                    run_index,
                };
                match RunRecord::read_from(&cell.dir(out)) {
                    Ok(r) => records.push(r),
                    Err(_) => missing_cells.push(cell),
                }
            }
            if !records.is_empty() {
                results.push(ConfigResult::from_records(selector.config_id(), &records)?);
            }
        }
        by_dataset.insert(dataset.clone(), results);
    }
    Ok(CampaignResults {
        config,
        by_dataset,
        missing_cells,
    })
}

/// Builds one report per dataset: the baseline against the `top_k` other
/// configurations with the lowest training MMAE.
pub fn build_reports(results: &CampaignResults, baseline: &str, top_k: usize, alpha: f64) -> Result<Vec<Report>> {
    let mut reports = Vec::new();
    for (dataset, configs) in &results.by_dataset {
        let base = configs
            .iter()
            .find(|c| c.config_id == baseline)
            .ok_or_else(|| Error::Data(format!("no runs of baseline {baseline} on {dataset}")))?;
        let others: Vec<ConfigResult> = configs
            .iter()
            .filter(|c| c.config_id != baseline)
            .cloned()
            .collect();
        let top = top_k_configs(&others, top_k);
        let chosen: Vec<ConfigResult> = top
            .iter()
            .filter_map(|id| others.iter().find(|c| &c.config_id == id).cloned())
            .collect();
        reports.push(Report {
            dataset: dataset.clone(),
            top_configs: top,
            comparison: build_comparison_table(base, &chosen, alpha)?,
            results: configs.clone(),
        });
    }
    Ok(reports)
}
