//! The cost-modified graph-attention flow predictor, its training loop, and
//! the GCN/GraphSAGE baselines it is compared against.

mod baselines;
mod forward;
mod grid;
pub mod io;
mod model;
mod train;

pub use baselines::{
    baseline_gcn, baseline_graphsage, knn_adjacency, train_baseline, BaselineKind, BaselineModel,
};
pub use forward::{env_window, poisson_loss_value, FlowOutputs, ForwardPass, COMBINE_EPS};
pub use grid::{grid_search, GridResult, GridSpec};
pub use model::{describe, Dims, ParamInventory, SimGatModel};
#[cfg(test)]
pub(crate) use model::{P_HEAD_W, P_WOUT, P_WU, P_WV};
pub use train::{
    check_gradients, eval_loss, train, train_with_inspect, Dataset, EpochStats, TrainReport,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::AdError;

#[derive(Debug, Error)]
pub enum SimGatError {
    #[error("bad config: {0}")]
    Config(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("dataset has {have} usable days, need at least {need}")]
    InsufficientDays { have: usize, need: usize },
    #[error("negative observed count {0}")]
    NegativeCount(f64),
    #[error("cluster centroids are required for baseline adjacency")]
    MissingCentroids,
    #[error(transparent)]
    Ad(#[from] AdError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostCombiner {
    /// Learnable softplus-weighted sum over modes.
    Learned,
    /// First mode only, weight frozen at softplus^{-1}(1).
    Single,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimGatConfig {
    pub hidden_dim: usize,
    pub lstm_window: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub leaky_slope: f64,
    pub seed: u64,
    pub include_visit_lag: bool,
    pub cost_combiner: CostCombiner,
}

impl Default for SimGatConfig {
    fn default() -> Self {
        SimGatConfig {
            hidden_dim: 8,
            lstm_window: 7,
            learning_rate: 0.01,
            batch_size: 8,
            epochs: 100,
            leaky_slope: 0.2,
            seed: 0,
            include_visit_lag: true,
            cost_combiner: CostCombiner::Learned,
        }
    }
}

impl SimGatConfig {
    pub fn validate(&self) -> Result<(), SimGatError> {
        if self.hidden_dim < 1 {
            return Err(SimGatError::Config("hidden_dim must be >= 1".into()));
        }
        if self.lstm_window < 1 {
            return Err(SimGatError::Config("lstm_window must be >= 1".into()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(SimGatError::Config(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.batch_size < 1 {
            return Err(SimGatError::Config("batch_size must be >= 1".into()));
        }
        if !(self.leaky_slope.is_finite()) {
            return Err(SimGatError::Config("leaky_slope must be finite".into()));
        }
        Ok(())
    }
}
