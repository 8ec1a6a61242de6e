//! Named network architectures and experiment setups.

use serde::{Deserialize, Serialize};

use crate::data::{self, Dataset, SplitSpec};
use crate::error::{Error, Result};
use crate::model::{Activation, Architecture, LossKind};

/// Architecture families; input and output widths come from the dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ArchPreset {
    #[serde(rename = "LogR")]
    LogR,
    #[serde(rename = "NetPI")]
    NetPI,
    #[serde(rename = "NetPII")]
    NetPII,
    #[serde(rename = "NetI")]
    NetI,
    #[serde(rename = "NetII")]
    NetII,
    /// NetPI with ten hidden layers of 32 units.
    #[serde(rename = "NetPI-deep10")]
    NetPIDeep10,
    /// Single sigmoid hidden layer used for the Iris localization study.
    #[serde(rename = "IrisNet")]
    IrisNet,
}

impl ArchPreset {
    pub const ALL: [ArchPreset; 7] = [
        ArchPreset::LogR,
        ArchPreset::NetPI,
        ArchPreset::NetPII,
        ArchPreset::NetI,
        ArchPreset::NetII,
        ArchPreset::NetPIDeep10,
        ArchPreset::IrisNet,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ArchPreset::LogR => "LogR",
            ArchPreset::NetPI => "NetPI",
            ArchPreset::NetPII => "NetPII",
            ArchPreset::NetI => "NetI",
            ArchPreset::NetII => "NetII",
            ArchPreset::NetPIDeep10 => "NetPI-deep10",
            ArchPreset::IrisNet => "IrisNet",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.name().eq_ignore_ascii_case(name))
    }

    fn hidden(&self) -> Vec<usize> {
        match self {
            ArchPreset::LogR => vec![],
            ArchPreset::NetPI | ArchPreset::NetPII => vec![32],
            ArchPreset::NetI => vec![800],
            ArchPreset::NetII => vec![1000, 500, 250],
            ArchPreset::NetPIDeep10 => vec![32; 10],
            ArchPreset::IrisNet => vec![IRIS_HIDDEN],
        }
    }

    /// Builds the architecture for the given dataset widths.
    pub fn build(&self, input_dim: usize, output_dim: usize) -> Architecture {
        let mut widths = vec![input_dim];
        widths.extend(self.hidden());
        widths.push(output_dim);
        let (hidden, output, loss, init_std) = match self {
            ArchPreset::LogR | ArchPreset::NetPI | ArchPreset::NetPIDeep10 | ArchPreset::NetI | ArchPreset::IrisNet => {
                (Activation::Sigmoid, Activation::Identity, LossKind::Bce, 1.0)
            }
            ArchPreset::NetPII => (Activation::Sigmoid, Activation::Sigmoid, LossKind::Mse, 1.0),
            ArchPreset::NetII => (Activation::Tanh, Activation::Tanh, LossKind::Mse, 0.1f64.sqrt()),
        };
        Architecture::new(widths, hidden, output, loss, init_std).expect("preset architectures are valid")
    }
}

/// Hidden width of [`ArchPreset::IrisNet`].
pub const IRIS_HIDDEN: usize = 200;

/// Initialization seed of the Iris localization study. With it the
/// full-batch optimum along steepest descent lies inside the default grid.
pub const IRIS_STUDY_SEED: u64 = 45;

/// Default localization study on the Iris preset.
pub fn iris_scan_spec() -> crate::analyze::ScanSpec {
    crate::analyze::ScanSpec { init_seed: IRIS_STUDY_SEED, ..Default::default() }
}

/// Default shuffle seed for the BCWD 400/169 split.
pub const BCWD_SPLIT_SEED: u64 = 11;

pub fn bcwd_split() -> SplitSpec {
    SplitSpec { train_count: 400, test_count: 169, shuffle_seed: Some(BCWD_SPLIT_SEED) }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DataSource {
    /// BCWD from a CSV file, or the vendored copy when `path` is `None`.
    Bcwd { path: Option<String>, split: SplitSpec },
    /// All 150 Iris rows for training, unstandardized; no test split.
    Iris,
    /// MNIST IDX files; training rows truncated to `train_count`.
    Mnist { dir: String, train_count: usize },
}

impl DataSource {
    /// Training and test sets with targets encoded for `output_dim` outputs.
    /// BCWD and MNIST are standardized with training-split statistics.
    pub fn load(&self, output_dim: usize) -> Result<(Dataset, Dataset)> {
        let (train, test) = match self {
            DataSource::Bcwd { path, split } => {
                let raw = match path {
                    Some(p) => data::load_bcwd(p)?,
                    None => data::bcwd_embedded(),
                };
                let (train, test, _) = data::split_standardized(&raw, split)?;
                (train, test)
            }
            DataSource::Iris => {
                let train = data::load_iris();
                let test = train.select(&[]);
                (train, test)
            }
            DataSource::Mnist { dir, train_count } => {
                let dir = std::path::Path::new(dir);
                let train = data::load_mnist_idx(dir.join("train-images-idx3-ubyte"), dir.join("train-labels-idx1-ubyte"))?
                    .truncate(*train_count);
                let test = data::load_mnist_idx(dir.join("t10k-images-idx3-ubyte"), dir.join("t10k-labels-idx1-ubyte"))?;
                let stats = data::ColumnStats::fit(&train, &(0..train.len()).collect::<Vec<_>>())?;
                (stats.apply(&train), stats.apply(&test))
            }
        };
        match output_dim {
            d if d == train.output_dim() => Ok((train, test)),
            2 if train.output_dim() == 1 => Ok((train.binary_to_one_hot(), test.binary_to_one_hot())),
            d => Err(Error::InvalidArgument(format!(
                "architecture has {d} outputs but the data has {}",
                train.output_dim()
            ))),
        }
    }

    pub fn input_dim(&self) -> usize {
        match self {
            DataSource::Bcwd { .. } => data::BCWD_FEATURES,
            DataSource::Iris => 4,
            DataSource::Mnist { .. } => 784,
        }
    }

    /// Output width the presets use for this data.
    pub fn output_dim(&self) -> usize {
        match self {
            DataSource::Bcwd { .. } => 2,
            DataSource::Iris => 3,
            DataSource::Mnist { .. } => 10,
        }
    }
}

/// A named dataset + architecture combination.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentPreset {
    pub name: &'static str,
    pub arch: ArchPreset,
    pub data: DataSource,
    pub default_budget: usize,
    pub default_batch: Option<usize>,
}

impl ExperimentPreset {
    pub fn architecture(&self) -> Architecture {
        self.arch.build(self.data.input_dim(), self.data.output_dim())
    }
}

pub const EXPERIMENT_NAMES: [&str; 7] =
    ["bcwd-logr", "bcwd-netpi", "bcwd-netpii", "netpi-deep10", "iris", "mnist-neti", "mnist-netii"];

/// Looks up an experiment preset. MNIST presets read from `data_dir`.
pub fn experiment(name: &str, data_dir: Option<&str>) -> Option<ExperimentPreset> {
    let bcwd = || DataSource::Bcwd {
        path: data_dir.map(|d| format!("{d}/wdbc.data")).filter(|p| std::path::Path::new(p).exists()),
        split: bcwd_split(),
    };
    let mnist = || DataSource::Mnist { dir: data_dir.unwrap_or(".").to_string(), train_count: 50_000 };
    let (arch, data, budget, batch) = match name {
        "bcwd-logr" => (ArchPreset::LogR, bcwd(), 3000, Some(100)),
        "bcwd-netpi" => (ArchPreset::NetPI, bcwd(), 3000, Some(100)),
        "bcwd-netpii" => (ArchPreset::NetPII, bcwd(), 3000, Some(100)),
        "netpi-deep10" => (ArchPreset::NetPIDeep10, bcwd(), 3000, Some(100)),
        "iris" => (ArchPreset::IrisNet, DataSource::Iris, 3000, Some(10)),
        "mnist-neti" => (ArchPreset::NetI, mnist(), 40_000, Some(100)),
        "mnist-netii" => (ArchPreset::NetII, mnist(), 40_000, Some(100)),
        _ => return None,
    };
    let name = EXPERIMENT_NAMES.into_iter().find(|n| *n == name)?;
    Some(ExperimentPreset { name, arch, data, default_budget: budget, default_batch: batch })
}
