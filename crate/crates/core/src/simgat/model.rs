//! Model parameters, seeded initialization, and the parameter inventory.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::Tensor;

use super::{SimGatConfig, SimGatError};

/// Input dimensions the parameter shapes depend on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    /// Cluster feature count l.
    pub l: usize,
    /// Neighborhood feature count k.
    pub k: usize,
    /// Environment feature count s.
    pub s: usize,
    /// Number of travel modes.
    pub n_modes: usize,
}

// parameter slots, in tape-leaf order
pub(crate) const P_WU: usize = 0;
pub(crate) const P_BU: usize = 1;
pub(crate) const P_WV: usize = 2;
pub(crate) const P_BV: usize = 3;
pub(crate) const P_LSTM_WI: usize = 4;
pub(crate) const P_LSTM_BI: usize = 5;
pub(crate) const P_LSTM_WF: usize = 6;
pub(crate) const P_LSTM_BF: usize = 7;
pub(crate) const P_LSTM_WG: usize = 8;
pub(crate) const P_LSTM_BG: usize = 9;
pub(crate) const P_LSTM_WO: usize = 10;
pub(crate) const P_LSTM_BO: usize = 11;
pub(crate) const P_ATILDE: usize = 12;
pub(crate) const P_WVAL: usize = 13;
pub(crate) const P_WOUT: usize = 14;
pub(crate) const P_BOUT: usize = 15;
pub(crate) const P_HEAD_W: usize = 16;
pub(crate) const P_HEAD_B: usize = 17;
pub(crate) const P_COMBINER: usize = 18;
pub(crate) const N_PARAMS: usize = 19;

pub(crate) const PARAM_NAMES: [&str; N_PARAMS] = [
    "w_u", "b_u", "w_v", "b_v", "lstm_w_i", "lstm_b_i", "lstm_w_f", "lstm_b_f", "lstm_w_g",
    "lstm_b_g", "lstm_w_o", "lstm_b_o", "a_tilde", "w_val", "w_out", "b_out", "head_w", "head_b",
    "combiner",
];

fn param_shapes(h: usize, dims: Dims) -> [Vec<usize>; N_PARAMS] {
    let Dims { l, k, s, n_modes } = dims;
    [
        vec![l, h],
        vec![h],
        vec![k, h],
        vec![h],
        vec![s + h, h],
        vec![h],
        vec![s + h, h],
        vec![h],
        vec![s + h, h],
        vec![h],
        vec![s + h, h],
        vec![h],
        vec![3 * h],
        vec![h, h],
        vec![3 * h, h],
        vec![h],
        vec![h],
        vec![],
        vec![n_modes],
    ]
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimGatModel {
    pub config: SimGatConfig,
    pub dims: Dims,
    /// Tensors in the fixed slot order of `PARAM_NAMES`.
    pub params: Vec<Tensor>,
}

impl SimGatModel {
    /// Seeded initialization: uniform Xavier weights, zero biases.
    pub fn new(config: SimGatConfig, dims: Dims) -> Result<Self, SimGatError> {
        config.validate()?;
        if dims.l == 0 || dims.k == 0 || dims.s == 0 || dims.n_modes == 0 {
            return Err(SimGatError::Config(format!("degenerate dims {dims:?}")));
        }
        let h = config.hidden_dim;
        let mut rng = ChaCha20Rng::seed_from_u64(config.seed);
        let shapes = param_shapes(h, dims);
        let params = shapes
            .iter()
            .enumerate()
            .map(|(slot, shape)| init_tensor(slot, shape, &mut rng))
            .collect();
        Ok(SimGatModel { config, dims, params })
    }

    pub fn n_parameters(&self) -> usize {
        self.params.iter().map(|t| t.len()).sum()
    }

    pub fn check_shapes(&self) -> Result<(), SimGatError> {
        let expected = param_shapes(self.config.hidden_dim, self.dims);
        if self.params.len() != N_PARAMS {
            return Err(SimGatError::Shape(format!(
                "{} parameter tensors, expected {N_PARAMS}",
                self.params.len()
            )));
        }
        for (i, (t, shape)) in self.params.iter().zip(&expected).enumerate() {
            if t.shape() != shape.as_slice() {
                return Err(SimGatError::Shape(format!(
                    "{} has shape {:?}, expected {:?}",
                    PARAM_NAMES[i],
                    t.shape(),
                    shape
                )));
            }
        }
        Ok(())
    }
}

fn init_tensor(slot: usize, shape: &[usize], rng: &mut ChaCha20Rng) -> Tensor {
    let is_bias = matches!(
        slot,
        P_BU | P_BV
            | P_LSTM_BI
            | P_LSTM_BF
            | P_LSTM_BG
            | P_LSTM_BO
            | P_BOUT
            | P_HEAD_B
            | P_COMBINER
    );
    if is_bias {
        return Tensor::zeros(shape.to_vec());
    }
    let (fan_in, fan_out) = match shape.len() {
        2 => (shape[0], shape[1]),
        1 => (shape[0], 1),
        _ => (1, 1),
    };
    let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let n: usize = shape.iter().product();
    let data = (0..n).map(|_| rng.gen_range(-bound..bound)).collect();
    Tensor::new(shape.to_vec(), data).expect("shape/product agree")
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ParamInventory {
    pub components: Vec<(String, usize)>,
    pub total: usize,
    /// l·h+h + k·h+h + 4·((s+h)·h+h) + 3h + h·h + (3h·h+h) + (h+1) + #modes.
    pub analytic_total: usize,
}

/// Per-component parameter counts; `total` is counted from the tensors and
/// `analytic_total` from the closed-form size formula.
pub fn describe(model: &SimGatModel) -> ParamInventory {
    let components: Vec<(String, usize)> = PARAM_NAMES
        .iter()
        .zip(&model.params)
        .map(|(n, t)| (n.to_string(), t.len()))
        .collect();
    let total = components.iter().map(|(_, c)| c).sum();
    let h = model.config.hidden_dim;
    let Dims { l, k, s, n_modes } = model.dims;
    let analytic_total = l * h
        + h
        + k * h
        + h
        + 4 * ((s + h) * h + h)
        + 3 * h
        + h * h
        + (3 * h * h + h)
        + (h + 1)
        + n_modes;
    ParamInventory { components, total, analytic_total }
}
