//! DBSCAN over planar points with a uniform-grid neighborhood index.
//!
//! Scan order is deterministic: points are processed in ascending input
//! index and border points attach to the lowest-index core point that
//! reaches them. A point's epsilon-neighborhood includes the point itself.

use serde::{Deserialize, Serialize};
use std::collections::HashMap;

use super::ClusteringError;

pub const NOISE: Label = Label::Noise;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Label {
    Noise,
    Cluster(usize),
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DbscanParams {
    /// Neighborhood radius, meters.
    pub eps: f64,
    /// Minimum neighborhood size (the point counts itself).
    pub min_pts: usize,
}

impl DbscanParams {
    pub fn validate(&self) -> Result<(), ClusteringError> {
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return Err(ClusteringError::InvalidParams(format!("eps {} must be > 0", self.eps)));
        }
        if self.min_pts < 1 {
            return Err(ClusteringError::InvalidParams("min_pts must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterAssignment {
    pub labels: Vec<Label>,
    /// Cluster id -> sorted POI indices.
    pub cluster_members: Vec<Vec<usize>>,
}

impl ClusterAssignment {
    pub fn n_clusters(&self) -> usize {
        self.cluster_members.len()
    }

    pub fn noise_indices(&self) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter(|(_, l)| **l == Label::Noise)
            .map(|(i, _)| i)
            .collect()
    }
}

/// Grid index with cell size eps; a neighborhood query scans the 3x3 block
/// around the query cell.
struct Grid {
    cell: f64,
    cells: HashMap<(i64, i64), Vec<usize>>,
}

impl Grid {
    fn build(points: &[(f64, f64)], eps: f64) -> Self {
        let mut cells: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
        for (i, &(x, y)) in points.iter().enumerate() {
            cells.entry(((x / eps).floor() as i64, (y / eps).floor() as i64)).or_default().push(i);
        }
        Grid { cell: eps, cells }
    }

    fn neighbors(&self, points: &[(f64, f64)], i: usize, eps: f64) -> Vec<usize> {
        let (x, y) = points[i];
        let (cx, cy) = ((x / self.cell).floor() as i64, (y / self.cell).floor() as i64);
        let eps2 = eps * eps;
        let mut out = Vec::new();
        for dx in -1..=1 {
            for dy in -1..=1 {
                if let Some(bucket) = self.cells.get(&(cx + dx, cy + dy)) {
                    for &j in bucket {
                        let (px, py) = points[j];
                        let d2 = (px - x) * (px - x) + (py - y) * (py - y);
                        if d2 <= eps2 {
                            out.push(j);
                        }
                    }
                }
            }
        }
        out.sort_unstable();
        out
    }
}

/// Standard DBSCAN semantics with deterministic scan order.
pub fn dbscan(points: &[(f64, f64)], params: DbscanParams) -> Result<ClusterAssignment, ClusteringError> {
    params.validate()?;
    let n = points.len();
    if n == 0 {
        return Ok(ClusterAssignment { labels: vec![], cluster_members: vec![] });
    }
    let grid = Grid::build(points, params.eps);

    let mut labels = vec![Label::Noise; n];
    let mut visited = vec![false; n];
    let mut cluster_members: Vec<Vec<usize>> = Vec::new();

    for seed in 0..n {
        if visited[seed] {
            continue;
        }
        visited[seed] = true;
        let neigh = grid.neighbors(points, seed, params.eps);
        if neigh.len() < params.min_pts {
            continue; // stays noise unless claimed as a border point later
        }
        let cid = cluster_members.len();
        labels[seed] = Label::Cluster(cid);
        let mut members = vec![seed];
        // breadth-first expansion in ascending index order
        let mut frontier: Vec<usize> = neigh;
        let mut qi = 0;
        while qi < frontier.len() {
            let p = frontier[qi];
            qi += 1;
            if labels[p] == Label::Noise {
                labels[p] = Label::Cluster(cid);
                members.push(p);
            }
            if visited[p] {
                continue;
            }
            visited[p] = true;
            let pn = grid.neighbors(points, p, params.eps);
            if pn.len() >= params.min_pts {
                frontier.extend(pn);
            }
        }
        members.sort_unstable();
        members.dedup();
        cluster_members.push(members);
    }

    Ok(ClusterAssignment { labels, cluster_members })
}
