//! Calibration of gravity and Huff parameters from observed flows.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::domain::COST_FLOOR;
use crate::Tensor;

use super::{huff_probability, ClassicError, GravityParams, HuffParams};

const MAX_ITERS: usize = 100;
const REL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FitMethod {
    LogOls,
    Poisson,
}

/// One row per origin-destination pair.
#[derive(Debug, Clone)]
pub struct GravityData {
    pub flows: Vec<f64>,
    pub origin_mass: Vec<f64>,
    pub dest_mass: Vec<f64>,
    pub cost: Vec<f64>,
}

impl GravityData {
    /// Flattens an m×n flow matrix with per-origin and per-destination masses.
    pub fn from_matrices(
        flows: &Tensor,
        origin_masses: &[f64],
        dest_masses: &[f64],
        costs: &Tensor,
    ) -> Result<Self, ClassicError> {
        let (m, n) = (origin_masses.len(), dest_masses.len());
        if flows.shape() != [m, n] || costs.shape() != [m, n] {
            return Err(ClassicError::LengthMismatch {
                detail: format!(
                    "flows {:?} and costs {:?} vs {m} origins x {n} destinations",
                    flows.shape(),
                    costs.shape()
                ),
            });
        }
        let mut data = GravityData {
            flows: Vec::with_capacity(m * n),
            origin_mass: Vec::with_capacity(m * n),
            dest_mass: Vec::with_capacity(m * n),
            cost: Vec::with_capacity(m * n),
        };
        for i in 0..m {
            for j in 0..n {
                data.flows.push(flows.at2(i, j));
                data.origin_mass.push(origin_masses[i]);
                data.dest_mass.push(dest_masses[j]);
                data.cost.push(costs.at2(i, j));
            }
        }
        Ok(data)
    }

    fn validate(&self) -> Result<(), ClassicError> {
        let n = self.flows.len();
        if self.origin_mass.len() != n || self.dest_mass.len() != n || self.cost.len() != n {
            return Err(ClassicError::LengthMismatch {
                detail: format!(
                    "{n} flows, {} origin masses, {} dest masses, {} costs",
                    self.origin_mass.len(),
                    self.dest_mass.len(),
                    self.cost.len()
                ),
            });
        }
        if n == 0 {
            return Err(ClassicError::NoObservations { detail: "empty flow table".into() });
        }
        for &f in &self.flows {
            if !(f >= 0.0) || !f.is_finite() {
                return Err(ClassicError::NotFinite { what: "flow" });
            }
        }
        for &m in self.origin_mass.iter().chain(&self.dest_mass) {
            if !(m > 0.0) {
                return Err(ClassicError::NonPositive { what: "mass", value: m });
            }
        }
        for &c in &self.cost {
            if c < COST_FLOOR {
                return Err(ClassicError::BelowCostFloor { value: c, floor: COST_FLOOR });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitDiagnostics {
    pub deviance: f64,
    pub pseudo_r2: f64,
    pub log_likelihood: f64,
    pub n_obs: usize,
    pub n_dropped_zeros: usize,
    pub iterations: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GravityFit {
    pub params: GravityParams,
    pub method: FitMethod,
    pub diagnostics: FitDiagnostics,
}

const GRAVITY_COLUMNS: [&str; 4] = ["intercept", "ln_origin_mass", "ln_dest_mass", "ln_cost"];

/// Design matrix for ln T = b0 + α ln M_i + β ln M_j − γ ln c.
fn design(data: &GravityData, rows: &[usize], intercept_only: bool) -> DMatrix<f64> {
    let p = if intercept_only { 1 } else { 4 };
    DMatrix::from_fn(rows.len(), p, |r, c| {
        let i = rows[r];
        match c {
            0 => 1.0,
            1 => data.origin_mass[i].ln(),
            2 => data.dest_mass[i].ln(),
            _ => data.cost[i].ln(),
        }
    })
}

/// Gram-Schmidt rank check naming any columns that add no new direction.
fn check_rank(x: &DMatrix<f64>, names: &[&str]) -> Result<(), ClassicError> {
    let mut basis: Vec<DVector<f64>> = Vec::new();
    let mut collinear = Vec::new();
    for c in 0..x.ncols() {
        let mut v = x.column(c).into_owned();
        let orig = v.norm();
        for b in &basis {
            let proj = b.dot(&v);
            v -= b * proj;
        }
        if v.norm() <= 1e-10 * orig.max(1.0) {
            collinear.push(names[c].to_string());
        } else {
            let n = v.norm();
            basis.push(v / n);
        }
    }
    if collinear.is_empty() {
        Ok(())
    } else {
        Err(ClassicError::RankDeficient { columns: collinear })
    }
}

fn solve_weighted_ls(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    w: Option<&DVector<f64>>,
) -> Result<DVector<f64>, ClassicError> {
    let (xtx, xty) = match w {
        Some(w) => {
            let wx = DMatrix::from_fn(x.nrows(), x.ncols(), |r, c| x[(r, c)] * w[r]);
            (x.transpose() * &wx, wx.transpose() * y)
        }
        None => (x.transpose() * x, x.transpose() * y),
    };
    xtx.cholesky()
        .map(|ch| ch.solve(&xty))
        .ok_or_else(|| ClassicError::RankDeficient { columns: vec!["(weighted normal equations)".into()] })
}

fn poisson_deviance(y: &[f64], mu: &[f64]) -> f64 {
    y.iter()
        .zip(mu)
        .map(|(&yi, &mi)| {
            let a = if yi > 0.0 { yi * (yi / mi).ln() } else { 0.0 };
            2.0 * (a - (yi - mi))
        })
        .sum()
}

fn poisson_loglik(y: &[f64], eta: &[f64]) -> f64 {
    // up to the y! constant, which cancels in comparisons
    y.iter().zip(eta).map(|(&yi, &e)| yi * e - e.exp()).sum()
}

fn params_from_coef(coef: &DVector<f64>, intercept_only: bool) -> GravityParams {
    if intercept_only {
        GravityParams { k: coef[0].exp(), alpha: 0.0, beta: 0.0, gamma: 0.0 }
    } else {
        GravityParams { k: coef[0].exp(), alpha: coef[1], beta: coef[2], gamma: -coef[3] }
    }
}

fn predict_all(data: &GravityData, params: &GravityParams) -> Vec<f64> {
    data.flows
        .iter()
        .enumerate()
        .map(|(i, _)| {
            params.k
                * data.origin_mass[i].powf(params.alpha)
                * data.dest_mass[i].powf(params.beta)
                / data.cost[i].powf(params.gamma)
        })
        .collect()
}

fn finish(
    data: &GravityData,
    params: GravityParams,
    method: FitMethod,
    n_dropped_zeros: usize,
    iterations: usize,
) -> GravityFit {
    let mu = predict_all(data, &params);
    let deviance = poisson_deviance(&data.flows, &mu);
    let ybar = data.flows.iter().sum::<f64>() / data.flows.len() as f64;
    let null_mu = vec![ybar.max(1e-300); data.flows.len()];
    let null_dev = poisson_deviance(&data.flows, &null_mu);
    let pseudo_r2 = if null_dev > 0.0 { 1.0 - deviance / null_dev } else { 0.0 };
    let eta: Vec<f64> = mu.iter().map(|m| m.max(1e-300).ln()).collect();
    GravityFit {
        params,
        method,
        diagnostics: FitDiagnostics {
            deviance,
            pseudo_r2,
            log_likelihood: poisson_loglik(&data.flows, &eta),
            n_obs: data.flows.len(),
            n_dropped_zeros,
            iterations,
        },
    }
}

/// Calibrates Eq. 1 exponents. Log-OLS drops zero flows (counted in the
/// diagnostics); the Poisson path keeps them and maximizes the likelihood by
/// iteratively reweighted least squares with step-halving.
pub fn fit_gravity(
    data: &GravityData,
    method: FitMethod,
    intercept_only: bool,
) -> Result<GravityFit, ClassicError> {
    data.validate()?;
    let names: &[&str] = if intercept_only { &GRAVITY_COLUMNS[..1] } else { &GRAVITY_COLUMNS };

    let positive: Vec<usize> =
        (0..data.flows.len()).filter(|&i| data.flows[i] > 0.0).collect();
    let n_dropped_zeros = data.flows.len() - positive.len();

    match method {
        FitMethod::LogOls => {
            if positive.is_empty() {
                return Err(ClassicError::NoObservations {
                    detail: "all flows are zero; log-ols needs positive flows".into(),
                });
            }
            let x = design(data, &positive, intercept_only);
            check_rank(&x, names)?;
            let y = DVector::from_iterator(
                positive.len(),
                positive.iter().map(|&i| data.flows[i].ln()),
            );
            let coef = solve_weighted_ls(&x, &y, None)?;
            Ok(finish(data, params_from_coef(&coef, intercept_only), method, n_dropped_zeros, 1))
        }
        FitMethod::Poisson => {
            let all: Vec<usize> = (0..data.flows.len()).collect();
            let x = design(data, &all, intercept_only);
            check_rank(&x, names)?;
            let y: Vec<f64> = data.flows.clone();
            let ybar = y.iter().sum::<f64>() / y.len() as f64;
            if !(ybar > 0.0) {
                return Err(ClassicError::NoObservations {
                    detail: "all flows are zero; mean rate is not positive".into(),
                });
            }
            // start from the null model: intercept at ln(mean), slopes at zero
            let p = x.ncols();
            let mut coef = DVector::zeros(p);
            coef[0] = ybar.ln();
            let eta_of = |coef: &DVector<f64>| -> Vec<f64> {
                (&x * coef).iter().map(|&e| e.min(700.0)).collect()
            };
            let mut ll = poisson_loglik(&y, &eta_of(&coef));
            let mut iterations = 0;
            for _ in 0..MAX_ITERS {
                iterations += 1;
                let eta = eta_of(&coef);
                let mu: Vec<f64> = eta.iter().map(|e| e.exp()).collect();
                let w = DVector::from_vec(mu.clone());
                let resid = DVector::from_iterator(
                    y.len(),
                    y.iter().zip(&mu).map(|(&yi, &mi)| yi - mi),
                );
                // Newton/IRLS step: (X' W X) δ = X' (y - μ)
                let delta = {
                    let rhs = x.transpose() * &resid;
                    let wx = DMatrix::from_fn(x.nrows(), x.ncols(), |r, c| x[(r, c)] * w[r]);
                    let xtwx = x.transpose() * wx;
                    xtwx.cholesky().map(|ch| ch.solve(&rhs)).ok_or_else(|| {
                        ClassicError::RankDeficient {
                            columns: vec!["(weighted normal equations)".into()],
                        }
                    })?
                };
                let mut step = 1.0;
                let mut next = &coef + &delta * step;
                let mut next_ll = poisson_loglik(&y, &eta_of(&next));
                let mut halvings = 0;
                while next_ll < ll && halvings < 40 {
                    step *= 0.5;
                    next = &coef + &delta * step;
                    next_ll = poisson_loglik(&y, &eta_of(&next));
                    halvings += 1;
                }
                if next_ll < ll {
                    break; // no ascent direction left
                }
                let rel = (next_ll - ll).abs() / (ll.abs() + 1e-12);
                coef = next;
                ll = next_ll;
                if rel < REL_TOL {
                    break;
                }
            }
            Ok(finish(
                data,
                params_from_coef(&coef, intercept_only),
                method,
                n_dropped_zeros,
                iterations,
            ))
        }
    }
}

/// Observed destination-choice counts: one row per origin, one column per
/// destination, plus the shared attractiveness vector and cost matrix.
#[derive(Debug, Clone)]
pub struct HuffData {
    pub counts: Tensor,
    pub attractiveness: Vec<f64>,
    pub costs: Tensor,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HuffFit {
    pub params: HuffParams,
    pub diagnostics: FitDiagnostics,
}

/// Maximum-likelihood Huff calibration: conditional-logit Newton iteration in
/// (α, β) with step-halving, β clamped at zero.
pub fn fit_huff(data: &HuffData) -> Result<HuffFit, ClassicError> {
    let m = data.counts.shape().first().copied().unwrap_or(0);
    let n = data.counts.shape().get(1).copied().unwrap_or(0);
    if m == 0 || n == 0 || data.attractiveness.len() != n || data.costs.shape() != [m, n] {
        return Err(ClassicError::LengthMismatch {
            detail: format!(
                "counts {:?}, costs {:?}, {} attractiveness values",
                data.counts.shape(),
                data.costs.shape(),
                data.attractiveness.len()
            ),
        });
    }
    for &a in &data.attractiveness {
        if !(a > 0.0) {
            return Err(ClassicError::NonPositive { what: "attractiveness", value: a });
        }
    }
    let total: f64 = data.counts.data().iter().sum();
    if !(total > 0.0) {
        return Err(ClassicError::NoObservations { detail: "all choice counts are zero".into() });
    }

    // per-pair features: utility = α f1 + β f2, f1 = ln A_j, f2 = -ln c_ij
    let f1: Vec<f64> = data.attractiveness.iter().map(|a| a.ln()).collect();
    let loglik = |alpha: f64, beta: f64| -> Result<f64, ClassicError> {
        let mut ll = 0.0;
        for i in 0..m {
            let costs_i: Vec<f64> = (0..n).map(|j| data.costs.at2(i, j)).collect();
            let probs =
                huff_probability(&HuffParams { alpha, beta }, &data.attractiveness, &costs_i)?;
            for j in 0..n {
                let y = data.counts.at2(i, j);
                if y > 0.0 {
                    ll += y * probs[j].max(1e-300).ln();
                }
            }
        }
        Ok(ll)
    };

    let (mut alpha, mut beta) = (0.0, 0.0);
    let mut ll = loglik(alpha, beta)?;
    let mut iterations = 0;
    for _ in 0..MAX_ITERS {
        iterations += 1;
        // gradient and Hessian of the multinomial log-likelihood
        let (mut g1, mut g2) = (0.0, 0.0);
        let (mut h11, mut h12, mut h22) = (0.0, 0.0, 0.0);
        for i in 0..m {
            let costs_i: Vec<f64> = (0..n).map(|j| data.costs.at2(i, j)).collect();
            let probs =
                huff_probability(&HuffParams { alpha, beta }, &data.attractiveness, &costs_i)?;
            let f2: Vec<f64> = costs_i.iter().map(|c| -c.ln()).collect();
            let ni: f64 = (0..n).map(|j| data.counts.at2(i, j)).sum();
            let (mut e1, mut e2) = (0.0, 0.0);
            for j in 0..n {
                e1 += probs[j] * f1[j];
                e2 += probs[j] * f2[j];
            }
            for j in 0..n {
                let y = data.counts.at2(i, j);
                g1 += y * (f1[j] - e1);
                g2 += y * (f2[j] - e2);
            }
            let (mut v11, mut v12, mut v22) = (0.0, 0.0, 0.0);
            for j in 0..n {
                v11 += probs[j] * (f1[j] - e1) * (f1[j] - e1);
                v12 += probs[j] * (f1[j] - e1) * (f2[j] - e2);
                v22 += probs[j] * (f2[j] - e2) * (f2[j] - e2);
            }
            h11 += ni * v11;
            h12 += ni * v12;
            h22 += ni * v22;
        }
        let det = h11 * h22 - h12 * h12;
        let (da, db) = if det.abs() > 1e-14 {
            ((h22 * g1 - h12 * g2) / det, (h11 * g2 - h12 * g1) / det)
        } else {
            // fall back to a gradient step when the Hessian degenerates
            let scale = 1.0 / (h11 + h22).max(1e-12);
            (g1 * scale, g2 * scale)
        };
        let mut step = 1.0;
        let mut next;
        let mut next_ll;
        let mut halvings = 0;
        loop {
            next = (alpha + step * da, (beta + step * db).max(0.0));
            next_ll = loglik(next.0, next.1)?;
            if next_ll >= ll || halvings >= 40 {
                break;
            }
            step *= 0.5;
            halvings += 1;
        }
        if next_ll < ll {
            break;
        }
        let rel = (next_ll - ll).abs() / (ll.abs() + 1e-12);
        alpha = next.0;
        beta = next.1;
        ll = next_ll;
        if rel < REL_TOL {
            break;
        }
    }

    // null model (α=β=0) for the deviance-style diagnostics
    let ll_null = loglik(0.0, 0.0)?;
    let mut ll_sat = 0.0;
    for i in 0..m {
        let ni: f64 = (0..n).map(|j| data.counts.at2(i, j)).sum();
        if ni > 0.0 {
            for j in 0..n {
                let y = data.counts.at2(i, j);
                if y > 0.0 {
                    ll_sat += y * (y / ni).ln();
                }
            }
        }
    }
    let pseudo_r2 = if ll_null.abs() > 0.0 { 1.0 - ll / ll_null } else { 0.0 };
    Ok(HuffFit {
        params: HuffParams { alpha, beta },
        diagnostics: FitDiagnostics {
            deviance: 2.0 * (ll_sat - ll),
            pseudo_r2,
            log_likelihood: ll,
            n_obs: (m * n),
            n_dropped_zeros: 0,
            iterations,
        },
    })
}
