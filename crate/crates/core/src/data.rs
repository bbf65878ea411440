//! Datasets: CSV ingestion, z-score normalization, k-fold splitting and
//! closed-form synthetic problems.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// Case-major table of real features plus a real target per case.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    name: String,
    n_features: usize,
    features: Vec<f64>,
    targets: Vec<f64>,
}

impl Dataset {
    /// `features` is row-major with `n_features` entries per case.
    pub fn new(
        name: impl Into<String>,
        n_features: usize,
        features: Vec<f64>,
        targets: Vec<f64>,
    ) -> Result<Self> {
        if features.len() != n_features * targets.len() {
            return Err(Error::Data(format!(
                "{} feature values do not form {} rows of {} columns",
                features.len(),
                targets.len(),
                n_features
            )));
        }
        if let Some(pos) = features.iter().position(|v| !v.is_finite()) {
            return Err(Error::Data(format!(
                "non-finite feature at row {}, column {}",
                pos / n_features.max(1),
                pos % n_features.max(1)
            )));
        }
        if let Some(row) = targets.iter().position(|v| !v.is_finite()) {
            return Err(Error::Data(format!("non-finite target at row {row}")));
        }
        Ok(Dataset {
            name: name.into(),
            n_features,
            features,
            targets,
        })
    }

    pub fn from_rows(name: impl Into<String>, rows: Vec<Vec<f64>>, targets: Vec<f64>) -> Result<Self> {
        let n_features = rows.first().map_or(0, Vec::len);
        if let Some(r) = rows.iter().position(|r| r.len() != n_features) {
            return Err(Error::Data(format!("row {r} has a different column count")));
        }
        Dataset::new(name, n_features, rows.concat(), targets)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn n_cases(&self) -> usize {
        self.targets.len()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.n_features..(i + 1) * self.n_features]
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    /// New dataset holding the given cases, in the given order.
    pub fn select(&self, cases: &[usize]) -> Dataset {
        let mut features = Vec::with_capacity(cases.len() * self.n_features);
        for &i in cases {
            features.extend_from_slice(self.row(i));
        }
        Dataset {
            name: self.name.clone(),
            n_features: self.n_features,
            features,
            targets: cases.iter().map(|&i| self.targets[i]).collect(),
        }
    }
}

/// Which CSV column holds the response.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TargetColumn {
    Index(usize),
    Name(String),
}

impl Default for TargetColumn {
    fn default() -> Self {
        TargetColumn::Name("last".into())
    }
}

impl std::str::FromStr for TargetColumn {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Ok(match s.parse() {
            Ok(i) => TargetColumn::Index(i),
            Err(_) => TargetColumn::Name(s.to_owned()),
        })
    }
}

/// Reads a comma-separated file of decimal reals. The pseudo-name `last`
/// selects the final column when no header names it.
pub fn load_csv(path: &Path, target: &TargetColumn, has_header: bool) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let header: Option<Vec<String>> = if has_header {
        Some(
            reader
                .headers()
                .map_err(|e| csv_error(path, e))?
                .iter()
                .map(str::to_owned)
                .collect(),
        )
    } else {
        None
    };

    let mut width = header.as_ref().map(Vec::len);
    let mut target_index = None;
    let mut features = Vec::new();
    let mut targets = Vec::new();
    for (r, record) in reader.records().enumerate() {
        // 1-based line numbers in messages, counting the header
        let line = r + 1 + usize::from(has_header);
        let record = record.map_err(|e| csv_error(path, e))?;
        let w = *width.get_or_insert(record.len());
        if record.len() != w {
            return Err(Error::Data(format!(
                "{}: line {line} has {} columns, expected {w}",
                path.display(),
                record.len()
            )));
        }
        let t = match target_index {
            Some(t) => t,
            None => *target_index.insert(resolve_target(target, header.as_deref(), w, path)?),
        };
        for (c, cell) in record.iter().enumerate() {
            let value: f64 = cell.parse().map_err(|_| {
                Error::Data(format!(
                    "{}: line {line}, column {}: cannot parse '{cell}' as a real",
                    path.display(),
                    c + 1
                ))
            })?;
            if !value.is_finite() {
                return Err(Error::Data(format!(
                    "{}: line {line}, column {}: non-finite value '{cell}'",
                    path.display(),
                    c + 1
                )));
            }
            if c == t {
                targets.push(value);
            } else {
                features.push(value);
            }
        }
    }
    if targets.is_empty() {
        return Err(Error::Data(format!("{}: no data rows", path.display())));
    }
    let n_features = width.unwrap_or(1) - 1;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    Dataset::new(name, n_features, features, targets)
}

fn resolve_target(
    target: &TargetColumn,
    header: Option<&[String]>,
    width: usize,
    path: &Path,
) -> Result<usize> {
    if width < 2 {
        return Err(Error::Data(format!(
            "{}: need at least one feature column and a target column",
            path.display()
        )));
    }
    let index = match target {
        TargetColumn::Index(i) => Some(*i),
        TargetColumn::Name(name) => header
            .and_then(|h| h.iter().position(|c| c == name))
            .or_else(|| (name == "last").then_some(width - 1)),
    };
    match index {
        Some(i) if i < width => Ok(i),
        _ => Err(Error::Data(format!(
            "{}: target column {target:?} not found",
            path.display()
        ))),
    }
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::io(path, source),
        other => Error::Data(format!("{}: {other:?}", path.display())),
    }
}

/// Writes features `x0..x{D-1}` followed by target `y`, with a header row.
pub fn write_csv(data: &Dataset, path: &Path) -> Result<()> {
    let mut writer = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    let mut header: Vec<String> = (0..data.n_features()).map(|j| format!("x{j}")).collect();
    header.push("y".into());
    writer.write_record(&header).map_err(|e| csv_error(path, e))?;
    for i in 0..data.n_cases() {
        let record = data
            .row(i)
            .iter()
            .chain(std::iter::once(&data.targets()[i]))
            .map(|v| format!("{v:?}"));
        writer.write_record(record).map_err(|e| csv_error(path, e))?;
    }
    writer.flush().map_err(|e| Error::io(path, e))
}

/// Per-feature mean and population standard deviation fitted on a training set.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureScaler {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

impl FeatureScaler {
    pub fn fit(train: &Dataset) -> Self {
        let n = train.n_cases() as f64;
        let d = train.n_features();
        let mut means = vec![0.0; d];
        for i in 0..train.n_cases() {
            for (m, v) in means.iter_mut().zip(train.row(i)) {
                *m += v;
            }
        }
        means.iter_mut().for_each(|m| *m /= n);
        let mut vars = vec![0.0; d];
        for i in 0..train.n_cases() {
            for ((s, v), m) in vars.iter_mut().zip(train.row(i)).zip(&means) {
                *s += (v - m) * (v - m);
            }
        }
        let stds = vars.into_iter().map(|s| (s / n).sqrt()).collect();
        FeatureScaler { means, stds }
    }

    /// Zero-variance features map to 0. Targets are copied untouched.
    pub fn apply(&self, data: &Dataset) -> Dataset {
        let d = data.n_features();
        let features = data
            .features()
            .iter()
            .enumerate()
            .map(|(k, v)| {
                let j = k % d;
                if self.stds[j] > 0.0 {
                    (v - self.means[j]) / self.stds[j]
                } else {
                    0.0
                }
            })
            .collect();
        Dataset {
            name: data.name.clone(),
            n_features: d,
            features,
            targets: data.targets.clone(),
        }
    }
}

/// Z-scores the features of `train` and every set in `others` using statistics
/// computed on `train` alone.
pub fn normalize_features(train: &Dataset, others: &[Dataset]) -> Result<(Dataset, Vec<Dataset>)> {
    if let Some(o) = others.iter().find(|o| o.n_features() != train.n_features()) {
        return Err(Error::Data(format!(
            "feature count mismatch: {} has {}, training set has {}",
            o.name(),
            o.n_features(),
            train.n_features()
        )));
    }
    let scaler = FeatureScaler::fit(train);
    Ok((scaler.apply(train), others.iter().map(|o| scaler.apply(o)).collect()))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldSplit {
    pub fold_assignments: Vec<usize>,
    pub n_folds: usize,
    pub seed: u64,
}

impl FoldSplit {
    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.n_folds];
        for &f in &self.fold_assignments {
            sizes[f] += 1;
        }
        sizes
    }
}

/// Random assignment of cases to folds whose sizes differ by at most one.
pub fn make_folds(n_cases: usize, n_folds: usize, seed: u64) -> Result<FoldSplit> {
    if n_folds == 0 || n_folds > n_cases {
        return Err(Error::Config(format!(
            "cannot split {n_cases} cases into {n_folds} folds"
        )));
    }
    let mut fold_assignments: Vec<usize> = (0..n_cases).map(|i| i % n_folds).collect();
    fold_assignments.shuffle(&mut rng::seeded(seed));
    Ok(FoldSplit {
        fold_assignments,
        n_folds,
        seed,
    })
}

/// Held-out fold `fold_index` as the test set, every other fold as training.
/// Case order within each part follows the original dataset.
pub fn fold_view(data: &Dataset, split: &FoldSplit, fold_index: usize) -> Result<(Dataset, Dataset)> {
    if split.fold_assignments.len() != data.n_cases() {
        return Err(Error::Data(format!(
            "fold split covers {} cases, dataset has {}",
            split.fold_assignments.len(),
            data.n_cases()
        )));
    }
    if fold_index >= split.n_folds {
        return Err(Error::Config(format!(
            "fold {fold_index} out of range for {} folds",
            split.n_folds
        )));
    }
    let (test, train): (Vec<usize>, Vec<usize>) =
        (0..data.n_cases()).partition(|&i| split.fold_assignments[i] == fold_index);
    Ok((data.select(&train), data.select(&test)))
}

/// A closed-form regression problem over uniform inputs.
#[derive(Debug, Clone, Copy)]
pub struct SyntheticProblem {
    pub name: &'static str,
    pub n_features: usize,
    /// Ground-truth program in the `ExprTree` text syntax.
    pub expression: &'static str,
    /// Inputs are drawn uniformly from `[low, high)`.
    pub low: f64,
    pub high: f64,
    target: fn(&[f64]) -> f64,
}

impl SyntheticProblem {
    pub fn target(&self, x: &[f64]) -> f64 {
        (self.target)(x)
    }
}

pub const SYNTHETIC_PROBLEMS: &[SyntheticProblem] = &[
    SyntheticProblem {
        name: "poly2",
        n_features: 2,
        expression: "add(mul(x0, x0), x1)",
        low: -1.0,
        high: 1.0,
        target: |x| x[0] * x[0] + x[1],
    },
    SyntheticProblem {
        name: "poly3",
        n_features: 3,
        expression: "sub(add(mul(mul(x0, x0), x0), mul(x0, x1)), x2)",
        low: -1.0,
        high: 1.0,
        target: |x| x[0] * x[0] * x[0] + x[0] * x[1] - x[2],
    },
    SyntheticProblem {
        name: "trig",
        n_features: 2,
        expression: "add(sin(x0), mul(cos(x1), x0))",
        low: -3.0,
        high: 3.0,
        target: |x| x[0].sin() + x[1].cos() * x[0],
    },
    SyntheticProblem {
        name: "explog",
        n_features: 2,
        expression: "sub(exp(x0), log(mul(x1, x1)))",
        low: 0.1,
        high: 2.0,
        target: |x| x[0].exp() - (x[1] * x[1]).ln(),
    },
];

pub fn synthetic_problem(name: &str) -> Result<&'static SyntheticProblem> {
    SYNTHETIC_PROBLEMS
        .iter()
        .find(|p| p.name == name)
        .ok_or_else(|| {
            let known: Vec<_> = SYNTHETIC_PROBLEMS.iter().map(|p| p.name).collect();
            Error::Config(format!("unknown synthetic problem '{name}' (known: {known:?})"))
        })
}

/// Deterministic sample of `n_cases` from the named synthetic problem.
pub fn synthetic_dataset(name: &str, n_cases: usize, seed: u64) -> Result<Dataset> {
    let problem = synthetic_problem(name)?;
    let mut rng = rng::seeded(seed);
    let mut features = Vec::with_capacity(n_cases * problem.n_features);
    let mut targets = Vec::with_capacity(n_cases);
    for _ in 0..n_cases {
        let start = features.len();
        for _ in 0..problem.n_features {
            features.push(rng.random_range(problem.low..problem.high));
        }
        targets.push(problem.target(&features[start..]));
    }
    Dataset::new(problem.name, problem.n_features, features, targets)
}

/// One entry of a dataset registry file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegistryEntry {
    /// Relative paths resolve against the registry's data root.
    pub path: PathBuf,
    #[serde(default)]
    pub target_column: TargetColumn,
    #[serde(default = "default_true")]
    pub has_header: bool,
    pub expected_rows: Option<usize>,
    pub expected_features: Option<usize>,
}

fn default_true() -> bool {
    true
}

/// JSON mapping of dataset name to location and expected shape.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DatasetRegistry {
    pub entries: BTreeMap<String, RegistryEntry>,
}

/// (name, variables, training cases, test cases) of the eight public benchmark sets.
pub const PUBLIC_BENCHMARKS: &[(&str, usize, usize, usize)] = &[
    ("airfoil", 5, 1202, 301),
    ("concrete", 8, 824, 206),
    ("energyCooling", 8, 614, 154),
    ("energyHeating", 8, 614, 154),
    ("towerData", 25, 3999, 1000),
    ("wineRed", 11, 1279, 320),
    ("wineWhite", 11, 3918, 980),
    ("yacht", 6, 614, 154),
];

impl DatasetRegistry {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// Registry of the public benchmark sets, expecting `<name>.csv` files with
    /// a header row and the response in the last column.
    pub fn public_benchmarks() -> Self {
        let entries = PUBLIC_BENCHMARKS
            .iter()
            .map(|&(name, vars, train, test)| {
                (
                    name.to_owned(),
                    RegistryEntry {
                        path: PathBuf::from(format!("{name}.csv")),
                        target_column: TargetColumn::default(),
                        has_header: true,
                        expected_rows: Some(train + test),
                        expected_features: Some(vars),
                    },
                )
            })
            .collect();
        DatasetRegistry { entries }
    }

    pub fn load_dataset(&self, name: &str, root: &Path) -> Result<Dataset> {
        let entry = self
            .entries
            .get(name)
            .ok_or_else(|| Error::Config(format!("dataset '{name}' is not in the registry")))?;
        let path = if entry.path.is_absolute() {
            entry.path.clone()
        } else {
            root.join(&entry.path)
        };
        Ok(load_csv(&path, &entry.target_column, entry.has_header)?.with_name(name))
    }

    /// Loads every entry and checks its shape against the expected counts.
    pub fn validate(&self, root: &Path) -> Vec<ValidationOutcome> {
        self.entries
            .iter()
            .map(|(name, entry)| {
                let status = match self.load_dataset(name, root) {
                    Err(e) => ValidationStatus::Unavailable(e.to_string()),
                    Ok(ds) => {
                        let rows_ok = entry.expected_rows.is_none_or(|r| r == ds.n_cases());
                        let feats_ok = entry.expected_features.is_none_or(|f| f == ds.n_features());
                        if rows_ok && feats_ok {
                            ValidationStatus::Ok {
                                rows: ds.n_cases(),
                                features: ds.n_features(),
                            }
                        } else {
                            ValidationStatus::Mismatch {
                                rows: ds.n_cases(),
                                features: ds.n_features(),
                            }
                        }
                    }
                };
                ValidationOutcome {
                    name: name.clone(),
                    expected_rows: entry.expected_rows,
                    expected_features: entry.expected_features,
                    status,
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationOutcome {
    pub name: String,
    pub expected_rows: Option<usize>,
    pub expected_features: Option<usize>,
    pub status: ValidationStatus,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ValidationStatus {
    Ok { rows: usize, features: usize },
    Mismatch { rows: usize, features: usize },
    Unavailable(String),
}

/// Where a dataset reference points.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DatasetSource {
    /// `synthetic:<problem>[:<cases>]`, 600 cases by default.
    Synthetic { problem: String, n_cases: usize },
    /// A name looked up in the registry.
    Registry(String),
    /// A path ending in `.csv`, target in the last column, header row expected.
    Csv(PathBuf),
}

impl DatasetSource {
    pub fn parse(reference: &str) -> Result<Self> {
        if let Some(rest) = reference.strip_prefix("synthetic:") {
            let mut parts = rest.splitn(2, ':');
            let problem = parts.next().unwrap_or_default().to_owned();
            let n_cases = match parts.next() {
                Some(n) => n
                    .parse()
                    .map_err(|_| Error::Config(format!("bad case count in '{reference}'")))?,
                None => 600,
            };
            synthetic_problem(&problem)?;
            return Ok(DatasetSource::Synthetic { problem, n_cases });
        }
        if reference.ends_with(".csv") {
            return Ok(DatasetSource::Csv(PathBuf::from(reference)));
        }
        Ok(DatasetSource::Registry(reference.to_owned()))
    }

    /// Loads the dataset; `seed` only matters for synthetic sources.
    pub fn load(&self, registry: &DatasetRegistry, root: &Path, seed: u64) -> Result<Dataset> {
        match self {
            DatasetSource::Synthetic { problem, n_cases } => synthetic_dataset(problem, *n_cases, seed),
            DatasetSource::Registry(name) => registry.load_dataset(name, root),
            DatasetSource::Csv(path) => {
                let path = if path.is_absolute() || path.exists() {
                    path.clone()
                } else {
                    root.join(path)
                };
                load_csv(&path, &TargetColumn::default(), true)
            }
        }
    }
}
