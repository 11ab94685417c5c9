//! Per-mode travel-cost matrices between neighborhood and cluster centroids.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::COST_FLOOR;
use crate::Tensor;

use super::network::{ModePolicy, RoadNetwork};
use super::shortest::{adjacency, dijkstra};
use super::TransportError;

/// Travel-time matrices (m neighborhoods × n clusters, minutes), one per
/// policy, floored at [`COST_FLOOR`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CostMatrixSet {
    pub mode_names: Vec<String>,
    pub matrices: Vec<Tensor>,
    pub cost_floor: f64,
}

impl CostMatrixSet {
    pub fn m(&self) -> usize {
        self.matrices[0].shape()[0]
    }

    pub fn n(&self) -> usize {
        self.matrices[0].shape()[1]
    }
}

/// Snaps each centroid to its nearest admissible node and computes all
/// shortest times per policy. Any unreachable pair fails the whole build
/// with the full pair list.
pub fn build_cost_matrices(
    network: &RoadNetwork,
    neighborhood_centroids: &[(f64, f64)],
    cluster_centroids: &[(f64, f64)],
    policies: &[ModePolicy],
) -> Result<CostMatrixSet, TransportError> {
    network.validate()?;
    let m = neighborhood_centroids.len();
    let n = cluster_centroids.len();
    if m == 0 || n == 0 || policies.is_empty() {
        return Err(TransportError::Invalid {
            what: "cost matrix request",
            detail: format!("m={m}, n={n}, policies={}", policies.len()),
        });
    }

    let mut matrices = Vec::with_capacity(policies.len());
    for &policy in policies {
        let neigh_nodes: Vec<u64> = neighborhood_centroids
            .iter()
            .map(|&p| network.snap(p, policy))
            .collect::<Result<_, _>>()?;
        let cluster_nodes: Vec<u64> = cluster_centroids
            .iter()
            .map(|&p| network.snap(p, policy))
            .collect::<Result<_, _>>()?;

        let adj = adjacency(network, policy);
        // one Dijkstra per neighborhood source, independent across sources
        let rows: Vec<Vec<Option<f64>>> = neigh_nodes
            .par_iter()
            .map(|&src| {
                let dist = dijkstra(network, &adj, src);
                cluster_nodes.iter().map(|dst| dist.get(dst).copied()).collect()
            })
            .collect();

        let mut failing = Vec::new();
        let mut matrix = Tensor::zeros(vec![m, n]);
        for (i, row) in rows.iter().enumerate() {
            for (j, t) in row.iter().enumerate() {
                match t {
                    Some(minutes) => matrix.set2(i, j, minutes.max(COST_FLOOR)),
                    None => failing.push((i, j)),
                }
            }
        }
        if !failing.is_empty() {
            return Err(TransportError::UnreachablePairs { policy, pairs: failing });
        }
        matrices.push(matrix);
    }

    Ok(CostMatrixSet {
        mode_names: policies.iter().map(|p| p.name().to_string()).collect(),
        matrices,
        cost_floor: COST_FLOOR,
    })
}
