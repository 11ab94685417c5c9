//! Tape-based forward pass: embeddings, LSTM environment encoder, attention
//! with cost modification, and the exponential flow head.

use crate::autodiff::AdError;
use crate::domain::CityGraph;
use crate::{Tape, Tensor, Var};

use super::model::*;
use super::{CostCombiner, SimGatError};

/// ε added to the combined cost so it stays strictly positive.
pub const COMBINE_EPS: f64 = 1e-3;
/// Floor inside ln() of the Poisson loss.
pub const LOSS_CLAMP: f64 = 1e-12;

/// One forward computation over a fresh tape; parameters enter as leaves so
/// `tape.backward` yields their gradients in slot order.
pub struct ForwardPass<'m> {
    pub tape: Tape,
    pub param_vars: Vec<Var>,
    pub model: &'m SimGatModel,
}

/// Intermediates of one day's prediction, for inspection and attribution.
pub struct FlowOutputs {
    /// Input leaves (cluster features, neighborhood features, env window), so
    /// attribution can substitute reference values for them.
    pub clusters_in: Var,
    pub neighborhoods_in: Var,
    pub env_in: Var,
    pub u_emb: Var,
    pub v_emb: Var,
    pub w_emb: Var,
    pub combined_cost: Var,
    pub scores: Var,
    pub modified_scores: Var,
    pub alpha: Var,
    pub lambda: Var,
}

impl<'m> ForwardPass<'m> {
    pub fn new(model: &'m SimGatModel) -> Result<Self, SimGatError> {
        model.check_shapes()?;
        let tape = Tape::new();
        let param_vars = model.params.iter().map(|p| tape.leaf(p.clone())).collect();
        Ok(ForwardPass { tape, param_vars, model })
    }

    fn p(&self, slot: usize) -> Var {
        self.param_vars[slot]
    }

    /// Linear projection of cluster features (n×l) to n×h.
    pub fn embed_clusters(&self, features: Var) -> Result<Var, AdError> {
        let t = &self.tape;
        t.add(t.matmul(features, self.p(P_WU))?, self.p(P_BU))
    }

    /// Linear projection of neighborhood features (m×k) to m×h.
    pub fn embed_neighborhoods(&self, features: Var) -> Result<Var, AdError> {
        let t = &self.tape;
        t.add(t.matmul(features, self.p(P_WV))?, self.p(P_BV))
    }

    /// LSTM over a T×s window; returns the final hidden state as an h-vector.
    pub fn encode_environment(&self, window: Var) -> Result<Var, SimGatError> {
        let t = &self.tape;
        let shape = t.shape(window);
        let cfg = &self.model.config;
        if shape.len() != 2 || shape[0] != cfg.lstm_window {
            return Err(SimGatError::Shape(format!(
                "environment window has shape {shape:?}, expected [{}, s]",
                cfg.lstm_window
            )));
        }
        let h = cfg.hidden_dim;
        let mut hidden = t.constant(Tensor::zeros(vec![1, h]));
        let mut cell = t.constant(Tensor::zeros(vec![1, h]));
        for step in 0..cfg.lstm_window {
            let x = t.slice(window, 0, step, 1)?; // 1×s
            let z = t.concat(&[x, hidden], 1)?; // 1×(s+h)
            let i = t.sigmoid(t.add(t.matmul(z, self.p(P_LSTM_WI))?, self.p(P_LSTM_BI))?)?;
            let f = t.sigmoid(t.add(t.matmul(z, self.p(P_LSTM_WF))?, self.p(P_LSTM_BF))?)?;
            let g = t.tanh(t.add(t.matmul(z, self.p(P_LSTM_WG))?, self.p(P_LSTM_BG))?)?;
            let o = t.sigmoid(t.add(t.matmul(z, self.p(P_LSTM_WO))?, self.p(P_LSTM_BO))?)?;
            cell = t.add(t.mul(f, cell)?, t.mul(i, g)?)?;
            hidden = t.mul(o, t.tanh(cell)?)?;
        }
        Ok(t.reshape(hidden, vec![h])?)
    }

    /// Raw attention scores e (n×m): leaky_relu(ã·[u_i ‖ v_j ‖ w]).
    pub fn attention_scores(&self, u_emb: Var, v_emb: Var, w_emb: Var) -> Result<Var, AdError> {
        let t = &self.tape;
        let h = self.model.config.hidden_dim;
        let n = t.shape(u_emb)[0];
        let m = t.shape(v_emb)[0];
        let a_u = t.slice(self.p(P_ATILDE), 0, 0, h)?;
        let a_v = t.slice(self.p(P_ATILDE), 0, h, h)?;
        let a_w = t.slice(self.p(P_ATILDE), 0, 2 * h, h)?;
        let su = t.reshape(t.matmul(u_emb, a_u)?, vec![n, 1])?;
        let sv = t.reshape(t.matmul(v_emb, a_v)?, vec![1, m])?;
        let sw = t.sum(t.mul(w_emb, a_w)?, None)?;
        let raw = t.add(t.add(su, sv)?, sw)?;
        t.leaky_relu(raw, self.model.config.leaky_slope)
    }

    /// Softplus-weighted sum of per-mode cost matrices plus ε (m×n).
    pub fn combine_costs(&self, costs: &[Tensor]) -> Result<Var, SimGatError> {
        if costs.is_empty() {
            return Err(SimGatError::Shape("no cost matrices supplied".into()));
        }
        let t = &self.tape;
        match self.model.config.cost_combiner {
            CostCombiner::Single => {
                Ok(t.add_scalar(t.constant(costs[0].clone()), COMBINE_EPS)?)
            }
            CostCombiner::Learned => {
                if costs.len() != self.model.dims.n_modes {
                    return Err(SimGatError::Shape(format!(
                        "{} cost matrices for {} combiner weights",
                        costs.len(),
                        self.model.dims.n_modes
                    )));
                }
                let weights = t.softplus(self.p(P_COMBINER))?;
                let mut acc: Option<Var> = None;
                for (idx, c) in costs.iter().enumerate() {
                    let w = t.slice(weights, 0, idx, 1)?;
                    let term = t.mul(t.constant(c.clone()), w)?;
                    acc = Some(match acc {
                        Some(a) => t.add(a, term)?,
                        None => term,
                    });
                }
                Ok(t.add_scalar(acc.expect("nonempty"), COMBINE_EPS)?)
            }
        }
    }

    /// Eq. 4: ẽ = e / c, with the m×n cost transposed to score orientation.
    pub fn cost_modify(&self, scores: Var, combined_cost: Var) -> Result<Var, AdError> {
        let t = &self.tape;
        t.div(scores, t.transpose(combined_cost)?)
    }

    /// Eq. 5: per-neighborhood softmax over the n clusters of σ(ẽ).
    pub fn normalize_attention(&self, modified_scores: Var) -> Result<Var, AdError> {
        let t = &self.tape;
        let sig = t.leaky_relu(modified_scores, self.model.config.leaky_slope)?;
        t.softmax(sig, 0)
    }

    /// Eq. 6: H[i] = Σ_j α[i][j] · W_val v_j (n×h).
    pub fn aggregate_cluster_state(&self, alpha: Var, v_emb: Var) -> Result<Var, AdError> {
        let t = &self.tape;
        let projected = t.matmul(v_emb, t.transpose(self.p(P_WVAL))?)?; // m×h
        t.matmul(alpha, projected)
    }

    /// Eq. 7 + head: λ[i][j] = exp(α[i][j]·(head_w·(W_out[u‖v‖w] + b_out)) + head_b).
    pub fn predict_pairs(&self, u_emb: Var, v_emb: Var, w_emb: Var, alpha: Var) -> Result<Var, AdError> {
        let t = &self.tape;
        let h = self.model.config.hidden_dim;
        let n = t.shape(u_emb)[0];
        let m = t.shape(v_emb)[0];
        let wo_u = t.slice(self.p(P_WOUT), 0, 0, h)?;
        let wo_v = t.slice(self.p(P_WOUT), 0, h, h)?;
        let wo_w = t.slice(self.p(P_WOUT), 0, 2 * h, h)?;
        let head = self.p(P_HEAD_W);
        let qa = t.reshape(t.matmul(u_emb, t.matmul(wo_u, head)?)?, vec![n, 1])?;
        let qb = t.reshape(t.matmul(v_emb, t.matmul(wo_v, head)?)?, vec![1, m])?;
        let qw = t.sum(t.mul(w_emb, t.matmul(wo_w, head)?)?, None)?;
        let qbias = t.sum(t.mul(head, self.p(P_BOUT))?, None)?;
        let q = t.add(t.add(t.add(qa, qb)?, qw)?, qbias)?;
        let logits = t.add(t.mul(alpha, q)?, self.p(P_HEAD_B))?;
        t.exp(logits)
    }

    /// Full pipeline for one day: embeddings → Eq. 3 → Eq. 4 → Eq. 5 → Eq. 7
    /// → exp head. Returns all intermediates.
    pub fn predict_flows(&self, city: &CityGraph, day: usize) -> Result<FlowOutputs, SimGatError> {
        let t = &self.tape;
        let window = env_window(city, day, self.model.config.lstm_window)?;
        let clusters_in = t.constant(city.clusters.clone());
        let neighborhoods_in = t.constant(city.neighborhoods.clone());
        let env_in = t.constant(window);
        let u_emb = self.embed_clusters(clusters_in)?;
        let v_emb = self.embed_neighborhoods(neighborhoods_in)?;
        let w_emb = self.encode_environment(env_in)?;
        let combined_cost = self.combine_costs(&city.costs)?;
        let scores = self.attention_scores(u_emb, v_emb, w_emb)?;
        let modified_scores = self.cost_modify(scores, combined_cost)?;
        let alpha = self.normalize_attention(modified_scores)?;
        let lambda = self.predict_pairs(u_emb, v_emb, w_emb, alpha)?;
        Ok(FlowOutputs {
            clusters_in,
            neighborhoods_in,
            env_in,
            u_emb,
            v_emb,
            w_emb,
            combined_cost,
            scores,
            modified_scores,
            alpha,
            lambda,
        })
    }

    /// Mean over pairs of λ − y·ln(max(λ, 1e-12)).
    pub fn poisson_loss(&self, lambda: Var, observed: &Tensor) -> Result<Var, SimGatError> {
        for &y in observed.data() {
            if y < 0.0 || !y.is_finite() {
                return Err(SimGatError::NegativeCount(y));
            }
        }
        let t = &self.tape;
        let y = t.constant(observed.clone());
        let lnl = t.ln(t.clamp_min(lambda, LOSS_CLAMP)?)?;
        let per_pair = t.sub(lambda, t.mul(y, lnl)?)?;
        Ok(t.mean(per_pair)?)
    }

    /// Mean loss over several days (each observed matrix is n×m).
    pub fn batch_loss(
        &self,
        city: &CityGraph,
        days: &[(usize, Tensor)],
    ) -> Result<Var, SimGatError> {
        if days.is_empty() {
            return Err(SimGatError::Shape("empty batch".into()));
        }
        let t = &self.tape;
        let mut acc: Option<Var> = None;
        for (day, observed) in days {
            let out = self.predict_flows(city, *day)?;
            let loss = self.poisson_loss(out.lambda, observed)?;
            acc = Some(match acc {
                Some(a) => t.add(a, loss)?,
                None => loss,
            });
        }
        Ok(t.scale(acc.expect("nonempty"), 1.0 / days.len() as f64)?)
    }
}

/// Rows day−T+1..=day of the environment matrix.
pub fn env_window(city: &CityGraph, day: usize, window: usize) -> Result<Tensor, SimGatError> {
    if day + 1 < window || day >= city.n_days() {
        return Err(SimGatError::Shape(format!(
            "day {day} has no {window}-day window in a {}-day series",
            city.n_days()
        )));
    }
    let s = city.env_dim();
    let mut out = Tensor::zeros(vec![window, s]);
    for r in 0..window {
        let src = day + 1 - window + r;
        for c in 0..s {
            out.set2(r, c, city.env.at2(src, c));
        }
    }
    Ok(out)
}

/// Plain-value Poisson loss for reporting without a tape.
pub fn poisson_loss_value(lambda: &Tensor, observed: &Tensor) -> f64 {
    let n = lambda.len() as f64;
    lambda
        .data()
        .iter()
        .zip(observed.data())
        .map(|(&l, &y)| l - y * l.max(LOSS_CLAMP).ln())
        .sum::<f64>()
        / n
}
