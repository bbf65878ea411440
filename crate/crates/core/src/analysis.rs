//! Aggregation of experiment results: MMAE, top-k configurations, speedups,
//! Wilcoxon rank-sum tests with Holm correction, and report files.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::engine::{write_atomic, RunRecord};
use crate::error::{Error, Result};
use crate::stats::median;

/// Runs of one configuration on one dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigResult {
    pub config_id: String,
    pub per_run_final_train_mae: Vec<f64>,
    pub per_run_final_test_mae: Vec<f64>,
    pub per_run_total_seconds: Vec<f64>,
    /// Median over runs of the best-on-train individual's test MAE, per generation.
    pub per_generation_median_curve: Vec<f64>,
}

impl ConfigResult {
    pub fn from_records(config_id: impl Into<String>, records: &[RunRecord]) -> Result<Self> {
        let config_id = config_id.into();
        if records.is_empty() {
            return Err(Error::Data(format!("no runs for {config_id}")));
        }
        let generations = records.iter().map(|r| r.per_generation.len()).min().unwrap_or(0);
        let per_generation_median_curve = (0..generations)
            .map(|g| {
                let at_g: Vec<f64> = records.iter().map(|r| r.per_generation[g].best_test_mae).collect();
                median(&at_g)
            })
            .collect();
        Ok(ConfigResult {
            config_id,
            per_run_final_train_mae: records.iter().map(|r| r.last().best_train_mae).collect(),
            per_run_final_test_mae: records.iter().map(|r| r.last().best_test_mae).collect(),
            per_run_total_seconds: records.iter().map(RunRecord::total_seconds).collect(),
            per_generation_median_curve,
        })
    }

    pub fn train_mmae(&self) -> f64 {
        mmae(&self.per_run_final_train_mae)
    }

    pub fn test_mmae(&self) -> f64 {
        mmae(&self.per_run_final_test_mae)
    }
}

/// Median MAE across runs. Panics on an empty slice.
pub fn mmae(results: &[f64]) -> f64 {
    assert!(!results.is_empty(), "MMAE of no runs");
    median(results)
}

/// The `k` configurations with the lowest training MMAE, ties broken by id.
pub fn top_k_configs(all: &[ConfigResult], k: usize) -> Vec<String> {
    let mut ranked: Vec<(f64, &str)> = all
        .iter()
        .map(|c| (c.train_mmae(), c.config_id.as_str()))
        .collect();
    ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(b.1)));
    ranked.into_iter().take(k).map(|(_, id)| id.to_owned()).collect()
}

/// Ratio of median total run times, baseline over other.
pub fn speedup(baseline: &ConfigResult, other: &ConfigResult) -> f64 {
    median(&baseline.per_run_total_seconds) / median(&other.per_run_total_seconds)
}

/// Average ranks (1-based) of the pooled sample, plus the tie-group sizes.
fn pooled_ranks(a: &[f64], b: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut pooled: Vec<(f64, usize)> = a.iter().chain(b).copied().zip(0..).collect();
    pooled.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut ranks = vec![0.0; pooled.len()];
    let mut ties = Vec::new();
    let mut i = 0;
    while i < pooled.len() {
        let mut j = i;
        while j + 1 < pooled.len() && pooled[j + 1].0 == pooled[i].0 {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for p in &pooled[i..=j] {
            ranks[p.1] = rank;
        }
        ties.push(j - i + 1);
        i = j + 1;
    }
    (ranks, ties)
}

/// Number of ways to pick `n1` distinct ranks from `1..=n` for every rank sum.
fn rank_sum_counts(n: usize, n1: usize) -> Vec<u64> {
    let max_sum = n * (n + 1) / 2;
    // counts[j][s]: subsets of size j with sum s
    let mut counts = vec![vec![0u64; max_sum + 1]; n1 + 1];
    counts[0][0] = 1;
    for r in 1..=n {
        for j in (1..=n1.min(r)).rev() {
            for s in (r..=max_sum).rev() {
                counts[j][s] += counts[j - 1][s - r];
            }
        }
    }
    counts.swap_remove(n1)
}

/// How [`wilcoxon_rank_sum_with`] turns the rank sum into a p-value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RankSumMethod {
    /// Exact when the pooled sample is tie-free with at most 12 values,
    /// normal approximation otherwise.
    Auto,
    /// Enumeration of all rank assignments. Requires a tie-free sample of at
    /// most 60 values.
    Exact,
    /// Normal approximation with tie-corrected variance and a 0.5 continuity
    /// correction.
    Normal,
}

/// Two-sided Wilcoxon rank-sum p-value with [`RankSumMethod::Auto`].
pub fn wilcoxon_rank_sum(a: &[f64], b: &[f64]) -> Result<f64> {
    wilcoxon_rank_sum_with(a, b, RankSumMethod::Auto)
}

pub fn wilcoxon_rank_sum_with(a: &[f64], b: &[f64], method: RankSumMethod) -> Result<f64> {
    if a.len() < 3 || b.len() < 3 {
        return Err(Error::Config(format!(
            "rank-sum test needs at least 3 values per sample (got {} and {})",
            a.len(),
            b.len()
        )));
    }
    let (n1, n2) = (a.len(), b.len());
    let n = n1 + n2;
    let (ranks, ties) = pooled_ranks(a, b);
    if ties.len() == 1 {
        return Ok(1.0);
    }
    let w: f64 = ranks[..n1].iter().sum();
    let tie_free = ties.iter().all(|&t| t == 1);
    let exact = match method {
        RankSumMethod::Auto => tie_free && n <= 12,
        RankSumMethod::Exact if tie_free && n <= 60 => true,
        RankSumMethod::Exact => {
            return Err(Error::Config(
                "exact rank-sum test needs a tie-free sample of at most 60 values".into(),
            ))
        }
        RankSumMethod::Normal => false,
    };

    if exact {
        let counts = rank_sum_counts(n, n1);
        let total: u64 = counts.iter().sum();
        let w = w as usize;
        let lower: u64 = counts[..=w].iter().sum();
        let upper: u64 = counts[w..].iter().sum();
        let p = 2.0 * lower.min(upper) as f64 / total as f64;
        return Ok(p.min(1.0));
    }

    let (n1f, n2f, nf) = (n1 as f64, n2 as f64, n as f64);
    let u = w - n1f * (n1f + 1.0) / 2.0;
    let mean = n1f * n2f / 2.0;
    let tie_term: f64 = ties.iter().map(|&t| (t * t * t - t) as f64).sum::<f64>() / (nf * (nf - 1.0));
    let variance = n1f * n2f / 12.0 * ((nf + 1.0) - tie_term);
    if variance <= 0.0 {
        return Ok(1.0);
    }
    let z = ((u - mean).abs() - 0.5).max(0.0) / variance.sqrt();
    Ok(erfc(z / std::f64::consts::SQRT_2).min(1.0))
}

/// Holm step-down adjustment, returned in the input order.
pub fn holm_adjust(p_values: &[f64]) -> Vec<f64> {
    let m = p_values.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| p_values[a].total_cmp(&p_values[b]));
    let mut adjusted = vec![0.0; m];
    let mut running = 0.0f64;
    for (rank, &i) in order.iter().enumerate() {
        let scaled = ((m - rank) as f64 * p_values[i]).min(1.0);
        running = running.max(scaled);
        adjusted[i] = running;
    }
    adjusted
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SignificanceMark {
    None,
    /// Significantly higher MMAE than the baseline.
    Plus,
    /// Significantly lower MMAE than the baseline.
    Minus,
}

impl SignificanceMark {
    pub fn symbol(self) -> &'static str {
        match self {
            SignificanceMark::None => "",
            SignificanceMark::Plus => "+",
            SignificanceMark::Minus => "-",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub config_id: String,
    pub mmae: f64,
    pub speedup: f64,
    pub significance_mark: SignificanceMark,
    pub p_value: Option<f64>,
    pub adjusted_p_value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub baseline: String,
    pub alpha: f64,
    /// Baseline first, then the other configurations in the given order.
    pub rows: Vec<ComparisonRow>,
}

/// Compares every configuration against `baseline` on final test MAE.
///
/// Configurations with fewer than three runs on either side are reported
/// without a test (no p-value, no mark) and take no part in the Holm family.
pub fn build_comparison_table(
    baseline: &ConfigResult,
    others: &[ConfigResult],
    alpha: f64,
) -> Result<ComparisonTable> {
    let raw: Vec<Option<f64>> = others
        .iter()
        .map(|o| {
            if o.per_run_final_test_mae.len() < 3 || baseline.per_run_final_test_mae.len() < 3 {
                Ok(None)
            } else {
                wilcoxon_rank_sum(&o.per_run_final_test_mae, &baseline.per_run_final_test_mae).map(Some)
            }
        })
        .collect::<Result<_>>()?;
    let tested: Vec<f64> = raw.iter().flatten().copied().collect();
    let mut holm = holm_adjust(&tested).into_iter();
    let adjusted: Vec<Option<f64>> = raw.iter().map(|p| p.and_then(|_| holm.next())).collect();
    let base_mmae = baseline.test_mmae();

    let mut rows = vec![ComparisonRow {
        config_id: baseline.config_id.clone(),
        mmae: base_mmae,
        speedup: 1.0,
        significance_mark: SignificanceMark::None,
        p_value: None,
        adjusted_p_value: None,
    }];
    for ((other, p_value), adjusted_p_value) in others.iter().zip(raw).zip(adjusted) {
        let mmae = other.test_mmae();
        let significance_mark = match adjusted_p_value {
            Some(adj) if adj < alpha && mmae < base_mmae => SignificanceMark::Minus,
            Some(adj) if adj < alpha && mmae > base_mmae => SignificanceMark::Plus,
            _ => SignificanceMark::None,
        };
        rows.push(ComparisonRow {
            config_id: other.config_id.clone(),
            mmae,
            speedup: speedup(baseline, other),
            significance_mark,
            p_value,
            adjusted_p_value,
        });
    }
    Ok(ComparisonTable {
        baseline: baseline.config_id.clone(),
        alpha,
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub dataset: String,
    pub top_configs: Vec<String>,
    pub comparison: ComparisonTable,
    pub results: Vec<ConfigResult>,
}

fn curve_path(dir: &Path, config_id: &str) -> PathBuf {
    dir.join("curves").join(format!("{config_id}.csv"))
}

impl Report {
    /// Writes `comparison.csv`, `curves/<config_id>.csv`, `boxplot_data.csv`
    /// and `report.json` into `dir`.
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

        let mut comparison = String::from("config_id,mmae,speedup,mark\n");
        for row in &self.comparison.rows {
            comparison.push_str(&format!(
                "{},{:?},{:?},{}\n",
                row.config_id,
                row.mmae,
                row.speedup,
                row.significance_mark.symbol()
            ));
        }
        write_atomic(&dir.join("comparison.csv"), comparison.as_bytes())?;

        let mut boxplot = String::from("config_id,run_index,final_test_mae,total_seconds\n");
        for result in &self.results {
            for (i, (mae, secs)) in result
                .per_run_final_test_mae
                .iter()
                .zip(&result.per_run_total_seconds)
                .enumerate()
            {
                boxplot.push_str(&format!("{},{i},{mae:?},{secs:?}\n", result.config_id));
            }

            let path = curve_path(dir, &result.config_id);
            if let Some(parent) = path.parent() {
                fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
            }
            let mut curve = String::from("gen,median_test_mae\n");
            for (g, v) in result.per_generation_median_curve.iter().enumerate() {
                curve.push_str(&format!("{g},{v:?}\n"));
            }
            write_atomic(&path, curve.as_bytes())?;
        }
        write_atomic(&dir.join("boxplot_data.csv"), boxplot.as_bytes())?;
        write_atomic(&dir.join("report.json"), serde_json::to_string_pretty(self)?.as_bytes())
    }
}
