//! Gravity and Huff spatial-interaction models: evaluation and calibration.

mod fit;
pub mod io;

pub use fit::{
    fit_gravity, fit_huff, FitDiagnostics, FitMethod, GravityData, GravityFit, HuffData, HuffFit,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ClassicError {
    #[error("{what} must be positive, got {value}")]
    NonPositive { what: &'static str, value: f64 },
    #[error("cost {value} is below the cost floor {floor}")]
    BelowCostFloor { value: f64, floor: f64 },
    #[error("{what} must be finite")]
    NotFinite { what: &'static str },
    #[error("huff beta must be >= 0, got {0}")]
    NegativeBeta(f64),
    #[error("design matrix is rank-deficient; collinear columns: {}", columns.join(", "))]
    RankDeficient { columns: Vec<String> },
    #[error("no usable observations ({detail})")]
    NoObservations { detail: String },
    #[error("input lengths disagree: {detail}")]
    LengthMismatch { detail: String },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

/// T = k · M_i^α · M_j^β / c^γ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GravityParams {
    pub k: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl GravityParams {
    pub fn validate(&self) -> Result<(), ClassicError> {
        if !(self.k > 0.0) {
            return Err(ClassicError::NonPositive { what: "gravity k", value: self.k });
        }
        for (name, v) in [
            ("k", self.k),
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("gamma", self.gamma),
        ] {
            if !v.is_finite() {
                let _ = name;
                return Err(ClassicError::NotFinite { what: "gravity parameter" });
            }
        }
        Ok(())
    }
}

/// P_j ∝ A_j^α · c_j^{-β}; β ≥ 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HuffParams {
    pub alpha: f64,
    pub beta: f64,
}

impl HuffParams {
    pub fn validate(&self) -> Result<(), ClassicError> {
        if !self.alpha.is_finite() || !self.beta.is_finite() {
            return Err(ClassicError::NotFinite { what: "huff parameter" });
        }
        if self.beta < 0.0 {
            return Err(ClassicError::NegativeBeta(self.beta));
        }
        Ok(())
    }
}

/// Expected flow between one origin/destination pair.
pub fn gravity_flow(
    params: &GravityParams,
    origin_mass: f64,
    dest_mass: f64,
    cost: f64,
) -> Result<f64, ClassicError> {
    params.validate()?;
    if !(origin_mass > 0.0) {
        return Err(ClassicError::NonPositive { what: "origin mass", value: origin_mass });
    }
    if !(dest_mass > 0.0) {
        return Err(ClassicError::NonPositive { what: "destination mass", value: dest_mass });
    }
    if cost < crate::domain::COST_FLOOR {
        return Err(ClassicError::BelowCostFloor { value: cost, floor: crate::domain::COST_FLOOR });
    }
    Ok(params.k * origin_mass.powf(params.alpha) * dest_mass.powf(params.beta)
        / cost.powf(params.gamma))
}

/// Choice probabilities over n destinations for one origin.
pub fn huff_probability(
    params: &HuffParams,
    attractiveness: &[f64],
    costs: &[f64],
) -> Result<Vec<f64>, ClassicError> {
    params.validate()?;
    if attractiveness.is_empty() {
        return Err(ClassicError::NoObservations { detail: "no destinations".into() });
    }
    if attractiveness.len() != costs.len() {
        return Err(ClassicError::LengthMismatch {
            detail: format!("{} attractiveness vs {} costs", attractiveness.len(), costs.len()),
        });
    }
    for &a in attractiveness {
        if !(a > 0.0) {
            return Err(ClassicError::NonPositive { what: "attractiveness", value: a });
        }
    }
    for &c in costs {
        if c < crate::domain::COST_FLOOR {
            return Err(ClassicError::BelowCostFloor { value: c, floor: crate::domain::COST_FLOOR });
        }
    }
    // work in log space so large exponents don't overflow the ratio
    let logits: Vec<f64> = attractiveness
        .iter()
        .zip(costs)
        .map(|(&a, &c)| params.alpha * a.ln() - params.beta * c.ln())
        .collect();
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let expd: Vec<f64> = logits.iter().map(|&l| (l - max).exp()).collect();
    let total: f64 = expd.iter().sum();
    Ok(expd.into_iter().map(|e| e / total).collect())
}
