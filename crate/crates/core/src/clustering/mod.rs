//! Density-based detection of business clusters from POIs.

mod dbscan;
mod features;

pub use dbscan::{dbscan, ClusterAssignment, DbscanParams, Label, NOISE};
pub use features::{featurize_cluster, sector_count_matrix, ClusterContext, Morphology};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ClusteringError {
    #[error("invalid dbscan params: {0}")]
    InvalidParams(String),
    #[error("unknown cluster id {0} in merge list")]
    UnknownClusterId(usize),
    #[error("cluster has no members")]
    EmptyCluster,
}

/// Merges the given cluster-id pairs (chains union transitively) and
/// renumbers ids densely in order of lowest original id.
pub fn merge_clusters(
    assignment: &ClusterAssignment,
    merge_pairs: &[(usize, usize)],
) -> Result<ClusterAssignment, ClusteringError> {
    let k = assignment.cluster_members.len();
    let mut parent: Vec<usize> = (0..k).collect();
    fn find(parent: &mut Vec<usize>, x: usize) -> usize {
        if parent[x] != x {
            let root = find(parent, parent[x]);
            parent[x] = root;
        }
        parent[x]
    }
    for &(a, b) in merge_pairs {
        if a >= k {
            return Err(ClusteringError::UnknownClusterId(a));
        }
        if b >= k {
            return Err(ClusteringError::UnknownClusterId(b));
        }
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra != rb {
            // lower root wins so renumbering is stable
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            parent[hi] = lo;
        }
    }
    // map each root to a dense new id in ascending root order
    let mut roots: Vec<usize> = (0..k).map(|i| find(&mut parent, i)).collect();
    let mut uniq: Vec<usize> = roots.clone();
    uniq.sort_unstable();
    uniq.dedup();
    let remap: std::collections::HashMap<usize, usize> =
        uniq.iter().enumerate().map(|(new, &old)| (old, new)).collect();
    for r in roots.iter_mut() {
        *r = remap[r];
    }

    let mut cluster_members: Vec<Vec<usize>> = vec![Vec::new(); uniq.len()];
    for (old, &new) in roots.iter().enumerate() {
        cluster_members[new].extend(&assignment.cluster_members[old]);
    }
    for members in cluster_members.iter_mut() {
        members.sort_unstable();
    }
    let mut labels = assignment.labels.clone();
    for l in labels.iter_mut() {
        if let Label::Cluster(c) = l {
            *l = Label::Cluster(roots[*c]);
        }
    }
    Ok(ClusterAssignment { labels, cluster_members })
}

/// Serializable clusters.json payload.
#[derive(Debug, Serialize, Deserialize)]
pub struct ClustersFile {
    pub params: DbscanParams,
    pub clusters: Vec<ClusterRecord>,
    pub noise_poi_ids: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ClusterRecord {
    pub id: usize,
    pub member_poi_ids: Vec<String>,
    pub centroid_xy: (f64, f64),
    pub features: crate::domain::ClusterFeatures,
}
