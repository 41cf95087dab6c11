//! Fuel consumption rate (FCR) surrogate: an additive ensemble of regression
//! trees over an 86-wide encoding of operational records.

mod boost;
mod features;
pub mod synthetic;

use std::path::Path;

use serde::{Deserialize, Serialize};

pub use boost::{fit_matrix, BoostParams, Node, RegressionTree, TreeEnsemble};
pub use features::{
    encode_features, offsets, FeatureVector, OperationalRecord, FEATURE_DIM, FEATURE_LAYOUT,
    SHIP_TYPES,
};

use crate::error::{read_file, write_file, Error, Result};

/// Anything that can turn an encoded record into a fuel rate in mt/hour.
pub trait FuelRateModel: Send + Sync {
    fn fuel_rate(&self, x: &FeatureVector) -> f64;
}

impl FuelRateModel for TreeEnsemble {
    fn fuel_rate(&self, x: &FeatureVector) -> f64 {
        predict_fcr(self, x)
    }
}

/// Predicted FCR, clamped to be non-negative.
pub fn predict_fcr(model: &TreeEnsemble, x: &FeatureVector) -> f64 {
    model.predict_raw(x.as_slice()).max(0.0)
}

/// Fits an ensemble on records that carry `fcr_target`.
pub fn fit_ensemble(dataset: &[OperationalRecord], params: &BoostParams) -> Result<TreeEnsemble> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut rows = Vec::with_capacity(dataset.len());
    let mut targets = Vec::with_capacity(dataset.len());
    for (i, r) in dataset.iter().enumerate() {
        let y = r.fcr_target.ok_or_else(|| {
            Error::InvalidArgument(format!("record {i} has no fcr_target"))
        })?;
        rows.push(encode_features(r)?);
        targets.push(y);
    }
    let views: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
    fit_matrix(&views, &targets, FEATURE_DIM, params)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegressionMetrics {
    pub mae: f64,
    pub rmse: f64,
    /// Coefficient of determination, in percent.
    pub r2: f64,
}

pub fn regression_metrics(pred: &[f64], target: &[f64]) -> Result<RegressionMetrics> {
    if pred.len() != target.len() {
        return Err(Error::LengthMismatch(pred.len(), target.len()));
    }
    if pred.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let n = pred.len() as f64;
    let mean = target.iter().sum::<f64>() / n;
    let ss_tot: f64 = target.iter().map(|y| (y - mean).powi(2)).sum();
    if ss_tot == 0.0 {
        return Err(Error::ZeroVariance);
    }
    let (mut abs, mut sq) = (0.0, 0.0);
    for (p, y) in pred.iter().zip(target) {
        abs += (p - y).abs();
        sq += (p - y).powi(2);
    }
    Ok(RegressionMetrics {
        mae: abs / n,
        rmse: (sq / n).sqrt(),
        r2: (1.0 - sq / ss_tot) * 100.0,
    })
}

const MODEL_FORMAT: &str = "crlnav-tree-ensemble";
const MODEL_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    feature_layout: String,
    #[serde(flatten)]
    model: TreeEnsemble,
}

/// Serialises an ensemble to the JSON model format.
pub fn to_json(model: &TreeEnsemble) -> String {
    let file = ModelFile {
        format: MODEL_FORMAT.into(),
        version: MODEL_VERSION,
        feature_layout: FEATURE_LAYOUT.into(),
        model: model.clone(),
    };
    serde_json::to_string_pretty(&file).expect("ensemble serialises")
}

pub fn from_json(text: &str) -> std::result::Result<TreeEnsemble, String> {
    let file: ModelFile = serde_json::from_str(text).map_err(|e| e.to_string())?;
    if file.format != MODEL_FORMAT || file.version != MODEL_VERSION {
        return Err(format!(
            "unsupported model format {} v{}",
            file.format, file.version
        ));
    }
    if file.feature_layout != FEATURE_LAYOUT || file.model.n_features != FEATURE_DIM {
        return Err(format!(
            "feature layout {} with {} features does not match {FEATURE_LAYOUT}",
            file.feature_layout, file.model.n_features
        ));
    }
    file.model.validate().map_err(|e| e.to_string())?;
    Ok(file.model)
}

pub fn save_model(model: &TreeEnsemble, path: &Path) -> Result<()> {
    write_file(path, &to_json(model))
}

pub fn load_model(path: &Path) -> Result<TreeEnsemble> {
    from_json(&read_file(path)?).map_err(|m| Error::parse(path, m))
}

/// Reads a delimited table whose header names the [`OperationalRecord`]
/// fields.
pub fn read_records(path: &Path) -> Result<Vec<OperationalRecord>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::parse(path, e))?;
    reader
        .deserialize()
        .map(|row| row.map_err(|e| Error::parse(path, e)))
        .collect()
}

pub fn write_records(records: &[OperationalRecord], path: &Path) -> Result<()> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    for r in records {
        writer.serialize(r).map_err(|e| Error::parse(path, e))?;
    }
    let bytes = writer.into_inner().map_err(|e| Error::parse(path, e))?;
    write_file(path, &String::from_utf8(bytes).expect("csv is utf-8"))
}
