//! Cluster feature computation from member POIs plus context overlays.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::domain::{ClusterFeatures, Poi};

use super::ClusteringError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Morphology {
    Plaza,
    Street,
    Downtown,
    Mall,
}

impl Morphology {
    pub fn one_hot(self) -> [f64; 4] {
        let mut v = [0.0; 4];
        v[self as usize] = 1.0;
        v
    }
}

/// Overlay data the POIs alone cannot provide: surrounding land use, transit
/// stops and flood-zone coverage.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClusterContext {
    pub land_use: [f64; 8],
    pub bus_stop_count: f64,
    pub flood_zone: [f64; 3],
    pub total_area: f64,
}

impl Default for ClusterContext {
    fn default() -> Self {
        ClusterContext {
            land_use: [0.0; 8],
            bus_stop_count: 0.0,
            flood_zone: [0.0; 3],
            total_area: 0.0,
        }
    }
}

/// Shannon diversity, chain ratio and sector counts for one cluster.
///
/// `poi_counts_reduced` is left as the raw per-sector count vector here;
/// callers run the PCA projection across all clusters at once.
pub fn featurize_cluster(
    members: &[&Poi],
    context: &ClusterContext,
    morphology: Morphology,
) -> Result<(ClusterFeatures, HashMap<String, usize>), ClusteringError> {
    if members.is_empty() {
        return Err(ClusteringError::EmptyCluster);
    }
    let mut counts: HashMap<String, usize> = HashMap::new();
    let mut chains = 0usize;
    for poi in members {
        *counts.entry(poi.naics.clone()).or_insert(0) += 1;
        if poi.is_chain {
            chains += 1;
        }
    }
    let total = members.len() as f64;
    let diversity: f64 = counts
        .values()
        .map(|&c| {
            let p = c as f64 / total;
            -p * p.ln()
        })
        .sum();

    let features = ClusterFeatures {
        morphology: morphology.one_hot(),
        poi_counts_reduced: Vec::new(), // filled after the cross-cluster PCA
        poi_diversity: diversity.max(0.0),
        chain_ratio: chains as f64 / total,
        land_use: context.land_use,
        bus_stop_count: context.bus_stop_count,
        flood_zone: context.flood_zone,
        business_count: total,
        total_area: context.total_area,
    };
    Ok((features, counts))
}

/// Dense per-cluster count matrix over the union of 6-digit codes, with the
/// code order returned alongside (sorted for determinism).
pub fn sector_count_matrix(per_cluster_counts: &[HashMap<String, usize>]) -> (Vec<String>, crate::Tensor) {
    let mut codes: Vec<String> = per_cluster_counts
        .iter()
        .flat_map(|m| m.keys().cloned())
        .collect();
    codes.sort();
    codes.dedup();
    let n = per_cluster_counts.len();
    let d = codes.len();
    let mut t = crate::Tensor::zeros(vec![n, d]);
    for (i, counts) in per_cluster_counts.iter().enumerate() {
        for (j, code) in codes.iter().enumerate() {
            if let Some(&c) = counts.get(code) {
                t.set2(i, j, c as f64);
            }
        }
    }
    (codes, t)
}
