//! model.json checkpoints and metrics.json summaries.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::Tensor;

use super::model::{Dims, SimGatModel, PARAM_NAMES};
use super::train::TrainReport;
use super::{SimGatConfig, SimGatError};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelFile {
    pub config: SimGatConfig,
    pub dims: Dims,
    /// Named row-major parameter tensors, alphabetical for stable output.
    pub parameters: BTreeMap<String, Tensor>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train_report: Option<TrainReport>,
}

pub fn write_model(
    path: &Path,
    model: &SimGatModel,
    report: Option<&TrainReport>,
) -> Result<(), SimGatError> {
    model.check_shapes()?;
    let parameters: BTreeMap<String, Tensor> = PARAM_NAMES
        .iter()
        .zip(&model.params)
        .map(|(n, t)| (n.to_string(), t.clone()))
        .collect();
    let file = ModelFile {
        config: model.config,
        dims: model.dims,
        parameters,
        train_report: report.cloned(),
    };
    let mut text = serde_json::to_string_pretty(&file)?;
    text.push('\n');
    // atomic replace so a crash can't leave a torn checkpoint
    let tmp = path.with_extension("json.tmp");
    std::fs::write(&tmp, text)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

pub fn read_model(path: &Path) -> Result<(SimGatModel, Option<TrainReport>), SimGatError> {
    let text = std::fs::read_to_string(path)?;
    let file: ModelFile = serde_json::from_str(&text)?;
    let mut params = Vec::with_capacity(PARAM_NAMES.len());
    for name in PARAM_NAMES {
        let t = file
            .parameters
            .get(name)
            .ok_or_else(|| SimGatError::Shape(format!("checkpoint is missing parameter {name}")))?;
        params.push(t.clone());
    }
    let model = SimGatModel { config: file.config, dims: file.dims, params };
    model.check_shapes()?;
    Ok((model, file.train_report))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Metrics {
    pub train_loss: f64,
    pub val_loss: f64,
    pub best_epoch: usize,
    pub n_params: usize,
    /// Validation losses of the comparison models, by name.
    pub baselines: BTreeMap<String, f64>,
}

pub fn write_metrics(path: &Path, metrics: &Metrics) -> Result<(), SimGatError> {
    let mut text = serde_json::to_string_pretty(metrics)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

pub fn read_metrics(path: &Path) -> Result<Metrics, SimGatError> {
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}
