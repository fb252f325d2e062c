//! Multi-label datasets: loading, train/test splitting and feature scaling.

mod arff;
mod csvfile;

use ndarray::{Array1, Array2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use arff::{load_arff, parse_arff, write_arff, LabelSpec};
pub use csvfile::{load_csv, parse_csv};

/// `n` instances with `d` real features and `L` labels in `{−1, +1}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    features: Array2<f64>,
    labels: Array2<i8>,
    feature_names: Vec<String>,
    label_names: Vec<String>,
}

impl Dataset {
    pub fn new(features: Array2<f64>, labels: Array2<i8>, feature_names: Vec<String>, label_names: Vec<String>) -> Result<Self> {
        let (n, d) = features.dim();
        let (n_lab, l) = labels.dim();
        if n == 0 {
            return Err(Error::InvalidInput("dataset has no instances".into()));
        }
        if n != n_lab {
            return Err(Error::Dimension(format!("{n} feature rows but {n_lab} label rows")));
        }
        if d == 0 {
            return Err(Error::InvalidInput("dataset has no features".into()));
        }
        if l < 2 {
            return Err(Error::InvalidInput(format!("a multi-label dataset needs at least 2 labels, got {l}")));
        }
        if feature_names.len() != d || label_names.len() != l {
            return Err(Error::Dimension(format!(
                "{} feature names for {d} features, {} label names for {l} labels",
                feature_names.len(),
                label_names.len()
            )));
        }
        if let Some(bad) = labels.iter().find(|&&y| y != 1 && y != -1) {
            return Err(Error::InvalidInput(format!("label entry {bad} is not -1 or +1")));
        }
        if let Some(bad) = features.iter().find(|x| !x.is_finite()) {
            return Err(Error::NonFinite(format!("feature value {bad}")));
        }
        Ok(Dataset { features, labels, feature_names, label_names })
    }

    /// Builds a dataset with generated names `x1..xd`, `y1..yL`.
    pub fn from_arrays(features: Array2<f64>, labels: Array2<i8>) -> Result<Self> {
        let feature_names = (1..=features.ncols()).map(|j| format!("x{j}")).collect();
        let label_names = (1..=labels.ncols()).map(|j| format!("y{j}")).collect();
        Dataset::new(features, labels, feature_names, label_names)
    }

    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    pub fn labels(&self) -> &Array2<i8> {
        &self.labels
    }

    /// Labels as reals, for arithmetic against scores and centers.
    pub fn labels_f64(&self) -> Array2<f64> {
        self.labels.mapv(f64::from)
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn label_names(&self) -> &[String] {
        &self.label_names
    }

    pub fn n_instances(&self) -> usize {
        self.features.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.features.ncols()
    }

    pub fn n_labels(&self) -> usize {
        self.labels.ncols()
    }

    /// A new dataset made of the given rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Result<Dataset> {
        if let Some(&bad) = rows.iter().find(|&&r| r >= self.n_instances()) {
            return Err(Error::InvalidInput(format!("row {bad} out of range")));
        }
        Dataset::new(
            self.features.select(Axis(0), rows),
            self.labels.select(Axis(0), rows),
            self.feature_names.clone(),
            self.label_names.clone(),
        )
    }

    /// Same labels, replaced features (e.g. after scaling).
    pub fn with_features(&self, features: Array2<f64>) -> Result<Dataset> {
        Dataset::new(features, self.labels.clone(), self.feature_names.clone(), self.label_names.clone())
    }

    /// Same features, replaced labels.
    pub fn with_labels(&self, labels: Array2<i8>) -> Result<Dataset> {
        Dataset::new(self.features.clone(), labels, self.feature_names.clone(), self.label_names.clone())
    }
}

/// Random train/test partition parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    train_fraction: f64,
    seed: u64,
}

impl SplitSpec {
    pub fn new(train_fraction: f64, seed: u64) -> Result<Self> {
        if !(train_fraction > 0.0 && train_fraction < 1.0) {
            return Err(Error::InvalidInput(format!("train fraction must lie in (0, 1), got {train_fraction}")));
        }
        Ok(SplitSpec { train_fraction, seed })
    }

    pub fn train_fraction(&self) -> f64 {
        self.train_fraction
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Sorted train and test row indices for `n` instances.
    pub fn indices(&self, n: usize) -> Result<(Vec<usize>, Vec<usize>)> {
        let n_train = (n as f64 * self.train_fraction).round() as usize;
        if n_train == 0 || n_train >= n {
            return Err(Error::InvalidInput(format!("split of {n} instances at fraction {} leaves an empty side", self.train_fraction)));
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(self.seed));
        let mut train = order[..n_train].to_vec();
        let mut test = order[n_train..].to_vec();
        train.sort_unstable();
        test.sort_unstable();
        Ok((train, test))
    }
}

/// Partitions `ds` into `(train, test)`; train holds `round(n·fraction)` rows.
pub fn split(ds: &Dataset, spec: &SplitSpec) -> Result<(Dataset, Dataset)> {
    let (train, test) = spec.indices(ds.n_instances())?;
    Ok((ds.select_rows(&train)?, ds.select_rows(&test)?))
}

/// Per-column z-scoring fitted on training data. Columns whose population
/// standard deviation is (numerically) zero pass through untouched.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    mean: Array1<f64>,
    std: Array1<f64>,
}

const MIN_STD: f64 = 1e-12;

impl Scaler {
    pub fn fit(features: &Array2<f64>) -> Result<Self> {
        if features.nrows() == 0 {
            return Err(Error::InvalidInput("cannot fit a scaler on zero rows".into()));
        }
        let mean = features.mean_axis(Axis(0)).expect("non-empty");
        let std = features.std_axis(Axis(0), 0.0);
        Ok(Scaler { mean, std })
    }

    pub fn n_features(&self) -> usize {
        self.mean.len()
    }

    pub fn transform(&self, features: &Array2<f64>) -> Result<Array2<f64>> {
        if features.ncols() != self.n_features() {
            return Err(Error::Dimension(format!("scaler fitted on {} columns, got {}", self.n_features(), features.ncols())));
        }
        let mut out = features.clone();
        for (j, mut col) in out.axis_iter_mut(Axis(1)).enumerate() {
            let (mu, sd) = (self.mean[j], self.std[j]);
            if sd > MIN_STD {
                col.mapv_inplace(|x| (x - mu) / sd);
            }
        }
        Ok(out)
    }
}

/// Scales both matrices with statistics computed on `train` only.
pub fn standardize(train: &Array2<f64>, test: &Array2<f64>) -> Result<(Array2<f64>, Array2<f64>, Scaler)> {
    let scaler = Scaler::fit(train)?;
    Ok((scaler.transform(train)?, scaler.transform(test)?, scaler))
}
