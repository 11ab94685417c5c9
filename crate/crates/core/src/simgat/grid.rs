//! Hyperparameter sweep over learning rate, batch size, and hidden width.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::model::{Dims, SimGatModel};
use super::train::{train, Dataset, TrainReport};
use super::{SimGatConfig, SimGatError};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridSpec {
    pub learning_rates: Vec<f64>,
    pub batch_sizes: Vec<usize>,
    pub hidden_dims: Vec<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridResult {
    pub config: SimGatConfig,
    pub best_val_loss: f64,
    pub best_epoch: usize,
}

/// Trains every combination (in parallel, each with its own tape) and returns
/// the winning checkpoint plus one result per trial in grid order.
pub fn grid_search(
    base: &SimGatConfig,
    dims: Dims,
    spec: &GridSpec,
    dataset: &Dataset,
) -> Result<(SimGatModel, TrainReport, Vec<GridResult>), SimGatError> {
    if spec.learning_rates.is_empty() || spec.batch_sizes.is_empty() || spec.hidden_dims.is_empty()
    {
        return Err(SimGatError::Config("empty grid axis".into()));
    }
    let mut configs = Vec::new();
    for &h in &spec.hidden_dims {
        for &bs in &spec.batch_sizes {
            for &lr in &spec.learning_rates {
                configs.push(SimGatConfig {
                    hidden_dim: h,
                    batch_size: bs,
                    learning_rate: lr,
                    ..*base
                });
            }
        }
    }
    let trials: Vec<Result<(SimGatModel, TrainReport), SimGatError>> = configs
        .par_iter()
        .map(|cfg| {
            let model = SimGatModel::new(*cfg, dims)?;
            train(&model, dataset)
        })
        .collect();

    let mut results = Vec::with_capacity(trials.len());
    let mut best: Option<(SimGatModel, TrainReport)> = None;
    for trial in trials {
        let (model, report) = trial?;
        results.push(GridResult {
            config: model.config,
            best_val_loss: report.best_val_loss,
            best_epoch: report.best_epoch,
        });
        // strict < keeps the earliest trial on ties, so order is deterministic
        if best.as_ref().map_or(true, |(_, r)| report.best_val_loss < r.best_val_loss) {
            best = Some((model, report));
        }
    }
    let (model, report) = best.expect("grid is nonempty");
    Ok((model, report, results))
}
