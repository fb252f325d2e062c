//! A trained model bundled with everything needed to predict: scaling,
//! classifiers, code regressor and the configuration it was trained with.

use std::fs;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::dataio::{Dataset, Scaler};
use crate::error::{Error, Result};
use crate::metrics::{evaluate_all, MetricsReport};
use crate::predictor::{fit_code_predictor, predict, CodePredictor, Prediction};
use crate::trainer::{ModelState, SweepRecord, TrainConfig, Trainer};

pub const CHECKPOINT_FORMAT: &str = "mlspl-model";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlsplModel {
    pub format: String,
    pub version: u32,
    pub config: TrainConfig,
    pub scaler: Option<Scaler>,
    pub state: ModelState,
    pub code_predictor: CodePredictor,
    pub feature_names: Vec<String>,
    pub label_names: Vec<String>,
    pub history: Vec<SweepRecord>,
    pub converged: bool,
}

impl MlsplModel {
    pub fn fit(train: &Dataset, cfg: &TrainConfig) -> Result<Self> {
        let scaler = if cfg.standardize { Some(Scaler::fit(train.features())?) } else { None };
        let features = match &scaler {
            Some(s) => s.transform(train.features())?,
            None => train.features().clone(),
        };
        let trainer = Trainer::new(features.clone(), train.labels_f64(), cfg.clone())?;
        let outcome = trainer.fit()?;
        let code_predictor = fit_code_predictor(features.view(), outcome.state.codes.view(), cfg.code_ridge)?;
        Ok(MlsplModel {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            config: cfg.clone(),
            scaler,
            state: outcome.state,
            code_predictor,
            feature_names: train.feature_names().to_vec(),
            label_names: train.label_names().to_vec(),
            history: outcome.history,
            converged: outcome.converged,
        })
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    /// Scores and label sets for raw (unscaled) features.
    pub fn predict(&self, features: &Array2<f64>) -> Result<Prediction> {
        if features.ncols() != self.n_features() {
            return Err(Error::Dimension(format!("model expects {} features, got {}", self.n_features(), features.ncols())));
        }
        let scaled = match &self.scaler {
            Some(s) => s.transform(features)?,
            None => features.clone(),
        };
        predict(&self.state.models, &self.code_predictor, scaled.view())
    }

    pub fn evaluate(&self, test: &Dataset) -> Result<(Prediction, MetricsReport)> {
        if test.n_labels() != self.label_names.len() {
            return Err(Error::Dimension(format!("model has {} labels, dataset has {}", self.label_names.len(), test.n_labels())));
        }
        let pred = self.predict(test.features())?;
        let report = evaluate_all(pred.scores.view(), pred.label_sets.view(), test.labels().view())?;
        Ok((pred, report))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        let format = value.get("format").and_then(|f| f.as_str());
        if format != Some(CHECKPOINT_FORMAT) {
            return Err(Error::InvalidInput(format!("not a model checkpoint (format {format:?})")));
        }
        let version = value.get("version").and_then(|v| v.as_u64());
        if version != Some(u64::from(CHECKPOINT_VERSION)) {
            return Err(Error::InvalidInput(format!("unsupported checkpoint version {version:?}, expected {CHECKPOINT_VERSION}")));
        }
        Ok(serde_json::from_value(value)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}
