//! `batchsel` command-line front end.
//!
//! Exit codes: 0 on success, 1 on usage or configuration errors, 2 on data
//! errors (missing, unreadable or malformed datasets).

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use batchsel::campaign::{build_reports, dataset_label, load_results, prepare_fold, run_grid, CampaignConfig, DataContext};
use batchsel::data::{DatasetRegistry, ValidationStatus};
use batchsel::engine::{self, EngineConfig};
use batchsel::selbench::{selbench, to_csv};
use batchsel::selection::Selector;
use batchsel::{Error, Result};
use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "batchsel", version, about = "GP symbolic regression with batch tournament selection")]
struct Cli {
    #[command(flatten)]
    data: DataArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct DataArgs {
    /// Root directory that relative dataset paths resolve against.
    #[arg(long, global = true, env = "BATCHSEL_DATA_DIR", default_value = ".")]
    data_dir: PathBuf,
    /// Dataset registry (JSON). Defaults to `<data-dir>/datasets.json` when it
    /// exists, else the built-in public benchmark table.
    #[arg(long, global = true)]
    registry: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Runs the engine once and writes record.json and record.csv.
    Run {
        /// Engine configuration (TOML); defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// `synthetic:<problem>[:<cases>]`, a registry name or a `.csv` path.
        #[arg(long)]
        dataset: String,
        /// Seed for the engine, the fold split and synthetic data.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the selector of the config, e.g. `BTS/8/16`.
        #[arg(long)]
        selector: Option<Selector>,
        #[arg(long, default_value_t = 5)]
        folds: usize,
        /// Fold held out as the test set.
        #[arg(long, default_value_t = 0)]
        fold: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Runs every cell of a campaign, skipping cells that already finished.
    Grid {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Cells run at the same time.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Summarizes a campaign directory against a baseline configuration.
    Report {
        /// Campaign directory written by `grid`.
        #[arg(long)]
        campaign: PathBuf,
        #[arg(long, default_value = "Ae-Lex")]
        baseline: String,
        /// Defaults to `<campaign>/report`.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 3)]
        top_k: usize,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
    },
    /// Times selection operators on uniform random error matrices.
    Selbench {
        #[arg(long, default_value_t = 1000)]
        n: usize,
        #[arg(long, default_value_t = 256)]
        t: usize,
        /// Parents per call; defaults to `n`.
        #[arg(long)]
        k: Option<usize>,
        #[arg(long, value_delimiter = ',', default_value = "Lex,Ae-Lex,BTS/8/16,Tourn/8")]
        selectors: Vec<Selector>,
        #[arg(long, default_value_t = 20)]
        repetitions: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// CSV destination; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Loads every registry dataset and checks its shape.
    ValidateData,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_data_error() { 2 } else { 1 })
        }
    }
}

fn execute(cli: Cli) -> Result<ExitCode> {
    let ctx = data_context(&cli.data)?;
    match cli.command {
        Command::Run {
            config,
            dataset,
            seed,
            selector,
            folds,
            fold,
            out,
        } => cmd_run(&ctx, config.as_deref(), &dataset, seed, selector, folds, fold, &out),
        Command::Grid { config, out, jobs } => {
            let config = CampaignConfig::load(&config)?;
            let summary = run_grid(&config, &out, jobs, &ctx)?;
            println!(
                "{} cells run, {} already complete, results in {}",
                summary.completed,
                summary.skipped,
                out.display()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Report {
            campaign,
            baseline,
            out,
            top_k,
            alpha,
        } => cmd_report(&campaign, &baseline, out, top_k, alpha),
        Command::Selbench {
            n,
            t,
            k,
            selectors,
            repetitions,
            seed,
            out,
        } => {
            let rows = selbench(n, t, k.unwrap_or(n), &selectors, repetitions, seed)?;
            let csv = to_csv(&rows);
            match out {
                Some(path) => fs::write(&path, csv).map_err(|e| io_error(&path, e))?,
                None => print!("{csv}"),
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::ValidateData => cmd_validate(&ctx),
    }
}

fn data_context(args: &DataArgs) -> Result<DataContext> {
    let default_registry = args.data_dir.join("datasets.json");
    let registry = match &args.registry {
        Some(path) => DatasetRegistry::load(path)?,
        None if default_registry.exists() => DatasetRegistry::load(&default_registry)?,
        None => DatasetRegistry::public_benchmarks(),
    };
    Ok(DataContext {
        registry,
        root: args.data_dir.clone(),
    })
}

#[allow(clippy::too_many_arguments)]
fn cmd_run(
    ctx: &DataContext,
    config: Option<&Path>,
    dataset: &str,
    seed: Option<u64>,
    selector: Option<Selector>,
    folds: usize,
    fold: usize,
    out: &Path,
) -> Result<ExitCode> {
    let mut engine_config = match config {
        Some(path) => EngineConfig::load(path)?,
        None => EngineConfig::default(),
    };
    if let Some(seed) = seed {
        engine_config.seed = seed;
    }
    if let Some(selector) = selector {
        engine_config.selector = selector;
    }
    engine_config.validate()?;
    if folds < 2 || fold >= folds {
        return Err(Error::Config(format!("fold {fold} is not in 0..{folds} (folds >= 2)")));
    }

    let data = ctx.load(dataset, engine_config.seed)?;
    let (train, test) = prepare_fold(&data, folds, engine_config.seed, fold)?;
    let mut record = engine::run(&engine_config, &train, &test)?;
    record.dataset = dataset.to_owned();
    record.write_to(out)?;
    let last = record.last();
    println!(
        "{} on {}: best train MAE {:.6}, test MAE {:.6}, {:.2}s; wrote {}",
        record.config_id,
        dataset_label(dataset),
        last.best_train_mae,
        last.best_test_mae,
        last.total_wall_time_seconds,
        out.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_report(campaign: &Path, baseline: &str, out: Option<PathBuf>, top_k: usize, alpha: f64) -> Result<ExitCode> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Config(format!("alpha must be in (0, 1), got {alpha}")));
    }
    let results = load_results(campaign)?;
    if !results.missing_cells.is_empty() {
        log::warn!(
            "{} cells have no record yet; reporting on the available runs",
            results.missing_cells.len()
        );
    }
    let out = out.unwrap_or_else(|| campaign.join("report"));
    for report in build_reports(&results, baseline, top_k, alpha)? {
        let dir = out.join(dataset_label(&report.dataset));
        report.write_to(&dir)?;
        println!("{} (baseline {}):", report.dataset, report.comparison.baseline);
        println!("  {:<14} {:>12} {:>9}  mark", "config", "MMAE", "speedup");
        for row in &report.comparison.rows {
            println!(
                "  {:<14} {:>12.6} {:>9.2}  {}",
                row.config_id,
                row.mmae,
                row.speedup,
                row.significance_mark.symbol()
            );
        }
    }
    println!("report written to {}", out.display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_validate(ctx: &DataContext) -> Result<ExitCode> {
    let outcomes = ctx.registry.validate(&ctx.root);
    let mut failed = false;
    for o in &outcomes {
        let expected = format!(
            "{} rows, {} features",
            o.expected_rows.map_or("?".into(), |r| r.to_string()),
            o.expected_features.map_or("?".into(), |f| f.to_string())
        );
        match &o.status {
            ValidationStatus::Ok { rows, features } => {
                println!("ok        {:<16} {rows} rows, {features} features", o.name)
            }
            ValidationStatus::Mismatch { rows, features } => {
                failed = true;
                println!("mismatch  {:<16} {rows} rows, {features} features; expected {expected}", o.name)
            }
            ValidationStatus::Unavailable(why) => {
                failed = true;
                println!("missing   {:<16} {why}", o.name)
            }
        }
    }
    Ok(if failed { ExitCode::from(2) } else { ExitCode::SUCCESS })
}

fn io_error(path: &Path, e: std::io::Error) -> Error {
    Error::Data(format!("{}: {e}", path.display()))
}
