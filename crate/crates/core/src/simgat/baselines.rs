//! GCN and GraphSAGE comparison models over the cluster-only graph.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::domain::CityGraph;
use crate::{Tape, Tensor, Var};

use super::forward::poisson_loss_value;
use super::{SimGatConfig, SimGatError};

pub const BASELINE_KNN: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    Gcn,
    GraphSage,
}

/// Two graph layers (hidden h) and an exp head h→m, over cluster features.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BaselineModel {
    pub kind: BaselineKind,
    pub hidden_dim: usize,
    pub leaky_slope: f64,
    pub n_out: usize,
    pub params: Vec<Tensor>,
    /// Row-normalized neighbor weights (GraphSAGE) or Â (GCN), n×n.
    pub propagation: Tensor,
}

/// Directed k-nearest-neighbor lists by centroid distance, ties to the lower
/// index; a node is never its own neighbor.
pub fn knn_adjacency(xy: &[(f64, f64)], k: usize) -> Vec<Vec<usize>> {
    let n = xy.len();
    (0..n)
        .map(|i| {
            let mut others: Vec<usize> = (0..n).filter(|&j| j != i).collect();
            others.sort_by(|&a, &b| {
                let da = dist2(xy[i], xy[a]);
                let db = dist2(xy[i], xy[b]);
                da.partial_cmp(&db).expect("finite").then(a.cmp(&b))
            });
            others.truncate(k);
            others
        })
        .collect()
}

fn dist2(a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)
}

/// Â = D^{-1/2}(A+I)D^{-1/2} over the symmetrized kNN graph.
fn gcn_propagation(neighbors: &[Vec<usize>]) -> Tensor {
    let n = neighbors.len();
    let mut a = vec![vec![0.0f64; n]; n];
    for (i, row) in a.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for (i, nbrs) in neighbors.iter().enumerate() {
        for &j in nbrs {
            a[i][j] = 1.0;
            a[j][i] = 1.0;
        }
    }
    let deg: Vec<f64> = a.iter().map(|row| row.iter().sum()).collect();
    let mut out = Tensor::zeros(vec![n, n]);
    for i in 0..n {
        for j in 0..n {
            if a[i][j] != 0.0 {
                out.set2(i, j, a[i][j] / (deg[i].sqrt() * deg[j].sqrt()));
            }
        }
    }
    out
}

/// Mean aggregator: row i averages i's out-neighbors; isolated rows stay zero.
fn sage_propagation(neighbors: &[Vec<usize>]) -> Tensor {
    let n = neighbors.len();
    let mut out = Tensor::zeros(vec![n, n]);
    for (i, nbrs) in neighbors.iter().enumerate() {
        if nbrs.is_empty() {
            continue;
        }
        let w = 1.0 / nbrs.len() as f64;
        for &j in nbrs {
            out.set2(i, j, w);
        }
    }
    out
}

fn init_matrix(rows: usize, cols: usize, rng: &mut ChaCha20Rng) -> Tensor {
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    Tensor::matrix(rows, cols, (0..rows * cols).map(|_| rng.gen_range(-bound..bound)).collect())
        .expect("sized data")
}

impl BaselineModel {
    pub fn new(
        kind: BaselineKind,
        config: &SimGatConfig,
        n_features: usize,
        n_out: usize,
        neighbors: &[Vec<usize>],
    ) -> Self {
        let h = config.hidden_dim;
        let mut rng = ChaCha20Rng::seed_from_u64(config.seed ^ 0xBA5E);
        let propagation = match kind {
            BaselineKind::Gcn => gcn_propagation(neighbors),
            BaselineKind::GraphSage => sage_propagation(neighbors),
        };
        let params = match kind {
            BaselineKind::Gcn => vec![
                init_matrix(n_features, h, &mut rng),
                Tensor::zeros(vec![h]),
                init_matrix(h, h, &mut rng),
                Tensor::zeros(vec![h]),
                init_matrix(h, n_out, &mut rng),
                Tensor::zeros(vec![n_out]),
            ],
            BaselineKind::GraphSage => vec![
                init_matrix(n_features, h, &mut rng),
                init_matrix(n_features, h, &mut rng),
                Tensor::zeros(vec![h]),
                init_matrix(h, h, &mut rng),
                init_matrix(h, h, &mut rng),
                Tensor::zeros(vec![h]),
                init_matrix(h, n_out, &mut rng),
                Tensor::zeros(vec![n_out]),
            ],
        };
        BaselineModel { kind, hidden_dim: h, leaky_slope: config.leaky_slope, n_out, params, propagation }
    }

    /// Forward pass on a tape; `vars` are the parameter leaves.
    pub fn forward(
        &self,
        tape: &Tape,
        vars: &[Var],
        features: &Tensor,
    ) -> Result<Var, SimGatError> {
        let t = tape;
        let x = t.constant(features.clone());
        let prop = t.constant(self.propagation.clone());
        let slope = self.leaky_slope;
        let logits = match self.kind {
            BaselineKind::Gcn => {
                let h1 = t.leaky_relu(
                    t.add(t.matmul(t.matmul(prop, x)?, vars[0])?, vars[1])?,
                    slope,
                )?;
                let h2 = t.leaky_relu(
                    t.add(t.matmul(t.matmul(prop, h1)?, vars[2])?, vars[3])?,
                    slope,
                )?;
                t.add(t.matmul(h2, vars[4])?, vars[5])?
            }
            BaselineKind::GraphSage => {
                let agg = t.matmul(prop, x)?;
                let h1 = t.leaky_relu(
                    t.add(
                        t.add(t.matmul(x, vars[0])?, t.matmul(agg, vars[1])?)?,
                        vars[2],
                    )?,
                    slope,
                )?;
                let agg1 = t.matmul(prop, h1)?;
                let h2 = t.leaky_relu(
                    t.add(
                        t.add(t.matmul(h1, vars[3])?, t.matmul(agg1, vars[4])?)?,
                        vars[5],
                    )?,
                    slope,
                )?;
                t.add(t.matmul(h2, vars[6])?, vars[7])?
            }
        };
        Ok(t.exp(logits)?)
    }

    /// Predicted n×m rates (day-independent).
    pub fn predict(&self, features: &Tensor) -> Result<Tensor, SimGatError> {
        let tape = Tape::new();
        let vars: Vec<Var> = self.params.iter().map(|p| tape.leaf(p.clone())).collect();
        let out = self.forward(&tape, &vars, features)?;
        Ok(tape.value(out))
    }
}

/// Trains a baseline with the shared Poisson objective and Adam settings and
/// returns its mean validation loss.
pub fn train_baseline(
    kind: BaselineKind,
    city: &CityGraph,
    train_days: &[(usize, Tensor)],
    val_days: &[(usize, Tensor)],
    config: &SimGatConfig,
) -> Result<(BaselineModel, f64), SimGatError> {
    if train_days.is_empty() || val_days.is_empty() {
        return Err(SimGatError::Shape("baseline needs train and val days".into()));
    }
    let xy = city.cluster_xy.as_ref().ok_or(SimGatError::MissingCentroids)?;
    let neighbors = knn_adjacency(xy, BASELINE_KNN);
    let n = city.n_clusters();
    let m = city.n_neighborhoods();
    let mut model = BaselineModel::new(kind, config, city.clusters.shape()[1], m, &neighbors);

    // a day-independent model sees only the mean train-day counts: the mean
    // Poisson loss over days equals the loss against the mean count matrix
    let mut ybar = Tensor::zeros(vec![n, m]);
    for (_, y) in train_days {
        for idx in 0..ybar.len() {
            ybar.data_mut()[idx] += y.data()[idx] / train_days.len() as f64;
        }
    }

    let (b1, b2, eps) = (0.9, 0.999, 1e-8);
    let mut mom: Vec<Tensor> =
        model.params.iter().map(|p| Tensor::zeros(p.shape().to_vec())).collect();
    let mut vel = mom.clone();
    for step in 1..=config.epochs {
        let tape = Tape::new();
        let vars: Vec<Var> = model.params.iter().map(|p| tape.leaf(p.clone())).collect();
        let lam = model.forward(&tape, &vars, &city.clusters)?;
        let yv = tape.constant(ybar.clone());
        let lnl = tape.ln(tape.clamp_min(lam, 1e-12)?)?;
        let loss = tape.mean(tape.sub(lam, tape.mul(yv, lnl)?)?)?;
        let grads = tape.backward(loss)?;
        let bc1 = 1.0 - f64::powi(b1, step as i32);
        let bc2 = 1.0 - f64::powi(b2, step as i32);
        for (slot, var) in vars.iter().enumerate() {
            let g = &grads[var.0];
            for i in 0..g.len() {
                let gi = g.data()[i];
                mom[slot].data_mut()[i] = b1 * mom[slot].data()[i] + (1.0 - b1) * gi;
                vel[slot].data_mut()[i] = b2 * vel[slot].data()[i] + (1.0 - b2) * gi * gi;
                let mh = mom[slot].data()[i] / bc1;
                let vh = vel[slot].data()[i] / bc2;
                model.params[slot].data_mut()[i] -= config.learning_rate * mh / (vh.sqrt() + eps);
            }
        }
    }

    let lam = model.predict(&city.clusters)?;
    let val_loss = val_days
        .iter()
        .map(|(_, y)| poisson_loss_value(&lam, y))
        .sum::<f64>()
        / val_days.len() as f64;
    Ok((model, val_loss))
}

pub fn baseline_gcn(
    city: &CityGraph,
    train_days: &[(usize, Tensor)],
    val_days: &[(usize, Tensor)],
    config: &SimGatConfig,
) -> Result<(BaselineModel, f64), SimGatError> {
    train_baseline(BaselineKind::Gcn, city, train_days, val_days, config)
}

pub fn baseline_graphsage(
    city: &CityGraph,
    train_days: &[(usize, Tensor)],
    val_days: &[(usize, Tensor)],
    config: &SimGatConfig,
) -> Result<(BaselineModel, f64), SimGatError> {
    train_baseline(BaselineKind::GraphSage, city, train_days, val_days, config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simgat::train::Dataset;
    use crate::testutil::{simple_rng, test_city};

    #[test]
    fn knn_is_k_closest_without_self() {
        let xy = vec![(0.0, 0.0), (1.0, 0.0), (2.0, 0.0), (10.0, 0.0)];
        let adj = knn_adjacency(&xy, 2);
        assert_eq!(adj[0], vec![1, 2]);
        assert_eq!(adj[3], vec![2, 1]);
        assert!(adj.iter().enumerate().all(|(i, nb)| !nb.contains(&i)));
    }

    #[test]
    fn isolated_sage_node_ignores_other_features() {
        // node 2 has no neighbors; others point among themselves
        let neighbors = vec![vec![1], vec![0], vec![]];
        let config = SimGatConfig { hidden_dim: 3, ..SimGatConfig::default() };
        let model = BaselineModel::new(BaselineKind::GraphSage, &config, 2, 4, &neighbors);
        let mut rng = simple_rng(1);
        let x1 = Tensor::matrix(3, 2, (0..6).map(|_| rng()).collect()).unwrap();
        let mut x2 = x1.clone();
        x2.set2(0, 0, 9.0);
        x2.set2(1, 1, -9.0);
        let p1 = model.predict(&x1).unwrap();
        let p2 = model.predict(&x2).unwrap();
        for c in 0..4 {
            assert_eq!(p1.at2(2, c), p2.at2(2, c));
        }
        assert_ne!(p1.at2(0, 0), p2.at2(0, 0));
    }

    #[test]
    fn gcn_on_identity_adjacency_is_per_cluster_mlp() {
        // no kNN edges at all → A+I = I → Â = I
        let neighbors = vec![vec![], vec![], vec![]];
        let config = SimGatConfig { hidden_dim: 2, ..SimGatConfig::default() };
        let model = BaselineModel::new(BaselineKind::Gcn, &config, 2, 3, &neighbors);
        let mut rng = simple_rng(5);
        let x = Tensor::matrix(3, 2, (0..6).map(|_| rng() * 2.0 - 1.0).collect()).unwrap();
        let got = model.predict(&x).unwrap();
        let leaky = |v: f64| if v >= 0.0 { v } else { 0.2 * v };
        for row in 0..3 {
            // hand-rolled MLP on this row alone
            let mut h1 = vec![0.0; 2];
            for c in 0..2 {
                let mut acc = model.params[1].data()[c];
                for d in 0..2 {
                    acc += x.at2(row, d) * model.params[0].at2(d, c);
                }
                h1[c] = leaky(acc);
            }
            let mut h2 = vec![0.0; 2];
            for c in 0..2 {
                let mut acc = model.params[3].data()[c];
                for d in 0..2 {
                    acc += h1[d] * model.params[2].at2(d, c);
                }
                h2[c] = leaky(acc);
            }
            for c in 0..3 {
                let mut acc = model.params[5].data()[c];
                for d in 0..2 {
                    acc += h2[d] * model.params[4].at2(d, c);
                }
                assert!((got.at2(row, c) - acc.exp()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn both_baselines_train_to_finite_loss() {
        let city = test_city(4, 3, 12, 4, 3, 2, 1, 9);
        let entries: Vec<crate::domain::FlowEntry> = city
            .dates
            .iter()
            .enumerate()
            .map(|(di, &d)| crate::domain::FlowEntry {
                date: d,
                neighborhood: di % 3,
                cluster: di % 4,
                count: 3,
            })
            .collect();
        let flows = crate::domain::FlowTable::new(entries).unwrap();
        let ds = Dataset { city: &city, flows: &flows };
        let days = ds.usable_days(3);
        let (train_days, val_days) = days.split_at(days.len() - 2);
        let config = SimGatConfig { hidden_dim: 3, epochs: 10, ..SimGatConfig::default() };
        for kind in [BaselineKind::Gcn, BaselineKind::GraphSage] {
            let (model, val) = train_baseline(kind, &city, train_days, val_days, &config).unwrap();
            assert!(val.is_finite(), "{kind:?} val loss {val}");
            assert!(model.predict(&city.clusters).unwrap().all_finite());
        }
    }
}
