//! Datasets, Z-score standardization and seeded train/test splits.

mod idx;
mod iris;

use std::fs;
use std::path::Path;

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

pub use idx::{load_mnist_idx, parse_mnist_idx};

/// The vendored Breast Cancer Wisconsin Diagnostic file (UCI `wdbc.data` layout).
pub const BCWD_CSV: &str = include_str!("../../data/wdbc.data");

/// Number of feature columns in the BCWD layout: `id, diagnosis, f1..f30`.
pub const BCWD_FEATURES: usize = 30;

/// Observations with one row per sample.
///
/// Targets are either a single `{0, 1}` column (binary) or one-hot rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    inputs: Array2<f64>,
    targets: Array2<f64>,
}

impl Dataset {
    pub fn new(name: impl Into<String>, inputs: Array2<f64>, targets: Array2<f64>) -> Result<Self> {
        if inputs.nrows() != targets.nrows() {
            return Err(Error::InvalidArgument(format!(
                "inputs have {} rows but targets have {}",
                inputs.nrows(),
                targets.nrows()
            )));
        }
        Ok(Self { name: name.into(), inputs, targets })
    }

    /// Observation count M.
    pub fn len(&self) -> usize {
        self.inputs.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn input_dim(&self) -> usize {
        self.inputs.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.targets.ncols()
    }

    pub fn inputs(&self) -> &Array2<f64> {
        &self.inputs
    }

    pub fn targets(&self) -> &Array2<f64> {
        &self.targets
    }

    /// Class label of row `i`: argmax for one-hot targets, the bit for binary ones.
    pub fn label(&self, i: usize) -> usize {
        let row = self.targets.row(i);
        if row.len() == 1 {
            (row[0] > 0.5) as usize
        } else {
            argmax(row.iter().copied())
        }
    }

    /// Rows selected by `indices`, in that order. Duplicates are kept.
    pub fn select(&self, indices: &[usize]) -> Dataset {
        Dataset {
            name: self.name.clone(),
            inputs: self.inputs.select(Axis(0), indices),
            targets: self.targets.select(Axis(0), indices),
        }
    }

    /// First `n` rows (or all of them when `n >= M`).
    pub fn truncate(&self, n: usize) -> Dataset {
        let idx: Vec<usize> = (0..n.min(self.len())).collect();
        self.select(&idx)
    }

    /// Expands a single binary column into two-column one-hot targets
    /// (`0 -> [1, 0]`, `1 -> [0, 1]`). One-hot datasets are returned unchanged.
    pub fn binary_to_one_hot(&self) -> Dataset {
        if self.output_dim() != 1 {
            return self.clone();
        }
        let mut targets = Array2::zeros((self.len(), 2));
        for (i, t) in self.targets.column(0).iter().enumerate() {
            targets[[i, (*t > 0.5) as usize]] = 1.0;
        }
        Dataset { name: self.name.clone(), inputs: self.inputs.clone(), targets }
    }

    /// Number of rows per class label.
    pub fn class_counts(&self) -> Vec<usize> {
        let classes = self.output_dim().max(2);
        let mut counts = vec![0; classes];
        for i in 0..self.len() {
            counts[self.label(i)] += 1;
        }
        counts
    }
}

pub(crate) fn argmax(values: impl Iterator<Item = f64>) -> usize {
    let mut best = 0;
    let mut best_val = f64::NEG_INFINITY;
    for (i, v) in values.enumerate() {
        if v > best_val {
            best = i;
            best_val = v;
        }
    }
    best
}

/// Fisher's Iris data: 150 observations, 4 features, 3 one-hot classes.
pub fn load_iris() -> Dataset {
    let mut inputs = Array2::zeros((iris::IRIS.len(), 4));
    let mut targets = Array2::zeros((iris::IRIS.len(), 3));
    for (i, (features, class)) in iris::IRIS.iter().enumerate() {
        for (j, v) in features.iter().enumerate() {
            inputs[[i, j]] = *v;
        }
        targets[[i, *class]] = 1.0;
    }
    Dataset { name: "iris".into(), inputs, targets }
}

/// Reads a BCWD CSV file: `id, diagnosis (M|B), 30 features` per line.
pub fn load_bcwd(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
    parse_bcwd(&text)
}

/// The vendored BCWD copy compiled into the library.
pub fn bcwd_embedded() -> Dataset {
    parse_bcwd(BCWD_CSV).expect("vendored BCWD file is well formed")
}

/// Parses BCWD CSV text. A header line is detected by a non-numeric first
/// token. Malignant maps to target 1.
pub fn parse_bcwd(text: &str) -> Result<Dataset> {
    let mut features: Vec<f64> = Vec::new();
    let mut labels: Vec<f64> = Vec::new();
    for (lineno, line) in text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())) {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if lineno == 1 && fields[0].parse::<f64>().is_err() {
            continue;
        }
        if fields.len() != BCWD_FEATURES + 2 {
            return Err(Error::Parse {
                line: lineno,
                msg: format!("expected {} columns, found {}", BCWD_FEATURES + 2, fields.len()),
            });
        }
        labels.push(match fields[1] {
            "M" => 1.0,
            "B" => 0.0,
            other => {
                return Err(Error::Parse { line: lineno, msg: format!("unknown diagnosis {other:?}") })
            }
        });
        for (col, field) in fields[2..].iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| Error::Parse {
                line: lineno,
                msg: format!("feature {} is not numeric: {field:?}", col + 1),
            })?;
            features.push(v);
        }
    }
    let m = labels.len();
    let inputs = Array2::from_shape_vec((m, BCWD_FEATURES), features).expect("row-major feature buffer");
    let targets = Array2::from_shape_vec((m, 1), labels).expect("label column");
    Ok(Dataset { name: "bcwd".into(), inputs, targets })
}

/// Per-column Z-score parameters, computed on one split and applied to others.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnStats {
    pub mean: Vec<f64>,
    /// Population standard deviation; zero marks a constant column.
    pub std: Vec<f64>,
}

impl ColumnStats {
    pub fn fit(d: &Dataset, rows: &[usize]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::InvalidArgument("standardization needs at least one row".into()));
        }
        if let Some(&bad) = rows.iter().find(|&&r| r >= d.len()) {
            return Err(Error::InvalidArgument(format!("row {bad} out of range for M = {}", d.len())));
        }
        let n = rows.len() as f64;
        let cols = d.input_dim();
        let mut mean = vec![0.0; cols];
        for &r in rows {
            for (m, v) in mean.iter_mut().zip(d.inputs.row(r)) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; cols];
        for &r in rows {
            for ((s, v), m) in var.iter_mut().zip(d.inputs.row(r)).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let std = var.into_iter().map(|s| (s / n).sqrt()).collect();
        Ok(Self { mean, std })
    }

    /// Applies `(x - mean) / std`; zero-variance columns become zero.
    pub fn apply(&self, d: &Dataset) -> Dataset {
        let mut inputs = d.inputs.clone();
        for (j, mut col) in inputs.axis_iter_mut(Axis(1)).enumerate() {
            let (m, s) = (self.mean[j], self.std[j]);
            if s == 0.0 {
                col.fill(0.0);
            } else {
                col.mapv_inplace(|v| (v - m) / s);
            }
        }
        Dataset { name: d.name.clone(), inputs, targets: d.targets.clone() }
    }
}

/// Z-scores every column of `d` using statistics from the `stats_from` rows.
pub fn standardize(d: &Dataset, stats_from: &[usize]) -> Result<(Dataset, ColumnStats)> {
    let stats = ColumnStats::fit(d, stats_from)?;
    Ok((stats.apply(d), stats))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_count: usize,
    pub test_count: usize,
    /// `None` keeps the file order.
    pub shuffle_seed: Option<u64>,
}

/// Row indices of the train and test parts (disjoint, in split order).
pub fn split_indices(m: usize, s: &SplitSpec) -> Result<(Vec<usize>, Vec<usize>)> {
    if s.train_count == 0 {
        return Err(Error::InvalidArgument("train_count must be positive".into()));
    }
    if s.train_count + s.test_count > m {
        return Err(Error::InvalidArgument(format!(
            "split {} + {} exceeds M = {m}",
            s.train_count, s.test_count
        )));
    }
    let mut order: Vec<usize> = (0..m).collect();
    if let Some(seed) = s.shuffle_seed {
        order.shuffle(&mut rng::seeded(seed));
    }
    let test = order[s.train_count..s.train_count + s.test_count].to_vec();
    order.truncate(s.train_count);
    Ok((order, test))
}

pub fn split(d: &Dataset, s: &SplitSpec) -> Result<(Dataset, Dataset)> {
    let (train, test) = split_indices(d.len(), s)?;
    Ok((d.select(&train), d.select(&test)))
}

/// Split, then standardize both parts with the training statistics.
pub fn split_standardized(d: &Dataset, s: &SplitSpec) -> Result<(Dataset, Dataset, ColumnStats)> {
    let (train, test) = split(d, s)?;
    let all: Vec<usize> = (0..train.len()).collect();
    let (train, stats) = standardize(&train, &all)?;
    let test = stats.apply(&test);
    Ok((train, test, stats))
}
