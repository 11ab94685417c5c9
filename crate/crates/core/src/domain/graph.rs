//! The assembled city graph and observed flow table.

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use std::collections::HashSet;

use crate::Tensor;

use super::{DomainError, COST_FLOOR};

/// The full bipartite system: standardized cluster features (n × l),
/// standardized neighborhood features (m × k), per-mode travel-cost matrices
/// (each m × n, minutes) and the standardized environment series (T × s).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CityGraph {
    pub cluster_ids: Vec<String>,
    pub neighborhood_ids: Vec<String>,
    pub cluster_feature_names: Vec<String>,
    pub neighborhood_feature_names: Vec<String>,
    pub env_feature_names: Vec<String>,
    pub mode_names: Vec<String>,
    pub clusters: Tensor,
    pub neighborhoods: Tensor,
    pub costs: Vec<Tensor>,
    pub dates: Vec<NaiveDate>,
    pub env: Tensor,
    /// Cluster centroids in meters, when known; used for baseline adjacency.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cluster_xy: Option<Vec<(f64, f64)>>,
}

impl CityGraph {
    pub fn n_clusters(&self) -> usize {
        self.cluster_ids.len()
    }

    pub fn n_neighborhoods(&self) -> usize {
        self.neighborhood_ids.len()
    }

    pub fn n_days(&self) -> usize {
        self.dates.len()
    }

    pub fn env_dim(&self) -> usize {
        self.env.shape()[1]
    }

    pub fn date_index(&self, date: NaiveDate) -> Option<usize> {
        self.dates.iter().position(|&d| d == date)
    }

    /// Checks every structural invariant; returns the full list of problems.
    pub fn validate(&self) -> Result<(), DomainError> {
        let mut issues = Vec::new();
        let n = self.cluster_ids.len();
        let m = self.neighborhood_ids.len();
        if n == 0 {
            issues.push("no clusters".to_string());
        }
        if m == 0 {
            issues.push("no neighborhoods".to_string());
        }
        if self.clusters.rank() != 2 || self.clusters.shape()[0] != n {
            issues.push(format!(
                "cluster matrix shape {:?} does not match {} cluster ids",
                self.clusters.shape(),
                n
            ));
        }
        if self.clusters.rank() == 2 && self.clusters.shape()[1] != self.cluster_feature_names.len() {
            issues.push(format!(
                "cluster matrix has {} columns but {} feature names",
                self.clusters.shape()[1],
                self.cluster_feature_names.len()
            ));
        }
        if self.neighborhoods.rank() != 2 || self.neighborhoods.shape()[0] != m {
            issues.push(format!(
                "neighborhood matrix shape {:?} does not match {} neighborhood ids",
                self.neighborhoods.shape(),
                m
            ));
        }
        if self.neighborhoods.rank() == 2
            && self.neighborhoods.shape()[1] != self.neighborhood_feature_names.len()
        {
            issues.push(format!(
                "neighborhood matrix has {} columns but {} feature names",
                self.neighborhoods.shape()[1],
                self.neighborhood_feature_names.len()
            ));
        }
        if self.costs.len() != self.mode_names.len() {
            issues.push(format!(
                "{} cost matrices but {} mode names",
                self.costs.len(),
                self.mode_names.len()
            ));
        }
        if self.costs.is_empty() {
            issues.push("no cost matrices".to_string());
        }
        for (mode, c) in self.mode_names.iter().zip(&self.costs) {
            if c.rank() != 2 || c.shape() != [m, n] {
                issues.push(format!(
                    "cost matrix for mode {mode} has shape {:?}, expected [{m}, {n}]",
                    c.shape()
                ));
                continue;
            }
            for i in 0..m {
                for j in 0..n {
                    let v = c.at2(i, j);
                    if !v.is_finite() {
                        issues.push(format!("cost[{mode}][{i}][{j}] is not finite"));
                    } else if v < COST_FLOOR {
                        issues.push(format!("cost[{mode}][{i}][{j}] = {v} below cost floor {COST_FLOOR}"));
                    }
                }
            }
        }
        if self.env.rank() != 2 || self.env.shape()[0] != self.dates.len() {
            issues.push(format!(
                "env matrix shape {:?} does not match {} dates",
                self.env.shape(),
                self.dates.len()
            ));
        }
        if self.env.rank() == 2 && self.env.shape()[1] != self.env_feature_names.len() {
            issues.push(format!(
                "env matrix has {} columns but {} feature names",
                self.env.shape()[1],
                self.env_feature_names.len()
            ));
        }
        for (what, t) in [
            ("clusters", &self.clusters),
            ("neighborhoods", &self.neighborhoods),
            ("env", &self.env),
        ] {
            if !t.all_finite() {
                issues.push(format!("{what} matrix contains non-finite values"));
            }
        }
        for (what, t) in [("clusters", &self.clusters), ("neighborhoods", &self.neighborhoods)] {
            if t.rank() == 2 && t.all_finite() {
                check_standardized(what, t, &mut issues);
            }
        }
        if let Some(xy) = &self.cluster_xy {
            if xy.len() != n {
                issues.push(format!("{} centroids for {} clusters", xy.len(), n));
            }
        }
        let unique: HashSet<&String> = self.cluster_ids.iter().collect();
        if unique.len() != n {
            issues.push("duplicate cluster ids".to_string());
        }
        let unique: HashSet<&String> = self.neighborhood_ids.iter().collect();
        if unique.len() != m {
            issues.push("duplicate neighborhood ids".to_string());
        }

        if issues.is_empty() {
            Ok(())
        } else {
            Err(DomainError::Validation { issues })
        }
    }
}

fn check_standardized(what: &str, t: &Tensor, issues: &mut Vec<String>) {
    let (rows, cols) = (t.shape()[0], t.shape()[1]);
    if rows < 2 {
        return; // sd undefined for a single row
    }
    for c in 0..cols {
        let mean: f64 = (0..rows).map(|r| t.at2(r, c)).sum::<f64>() / rows as f64;
        let var: f64 = (0..rows).map(|r| (t.at2(r, c) - mean).powi(2)).sum::<f64>() / rows as f64;
        let sd = var.sqrt();
        if sd < 1e-12 {
            continue; // constant column, scaled by 1 upstream
        }
        if mean.abs() >= 1e-9 {
            issues.push(format!("{what} column {c} mean {mean:e} not centered"));
        }
        if !(0.99..=1.01).contains(&sd) {
            issues.push(format!("{what} column {c} sd {sd} outside [0.99, 1.01]"));
        }
    }
}

/// Builds and validates a [`CityGraph`]; any invariant violation is reported
/// as an itemized list.
#[allow(clippy::too_many_arguments)]
pub fn assemble_city_graph(
    cluster_ids: Vec<String>,
    neighborhood_ids: Vec<String>,
    cluster_feature_names: Vec<String>,
    neighborhood_feature_names: Vec<String>,
    env_feature_names: Vec<String>,
    mode_names: Vec<String>,
    clusters: Tensor,
    neighborhoods: Tensor,
    costs: Vec<Tensor>,
    dates: Vec<NaiveDate>,
    env: Tensor,
    cluster_xy: Option<Vec<(f64, f64)>>,
) -> Result<CityGraph, DomainError> {
    let graph = CityGraph {
        cluster_ids,
        neighborhood_ids,
        cluster_feature_names,
        neighborhood_feature_names,
        env_feature_names,
        mode_names,
        clusters,
        neighborhoods,
        costs,
        dates,
        env,
        cluster_xy,
    };
    graph.validate()?;
    Ok(graph)
}

/// One observed daily count: visits from `neighborhood` to `cluster`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlowEntry {
    pub date: NaiveDate,
    pub neighborhood: usize,
    pub cluster: usize,
    pub count: u64,
}

/// Sparse observed visitation counts; absent keys mean zero.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FlowTable {
    entries: Vec<FlowEntry>,
}

impl FlowTable {
    pub fn new(entries: Vec<FlowEntry>) -> Result<Self, DomainError> {
        let mut seen = HashSet::new();
        for e in &entries {
            if !seen.insert((e.date, e.neighborhood, e.cluster)) {
                return Err(DomainError::Invalid {
                    what: "flow table",
                    detail: format!(
                        "duplicate entry for ({}, neighborhood {}, cluster {})",
                        e.date, e.neighborhood, e.cluster
                    ),
                });
            }
        }
        Ok(FlowTable { entries })
    }

    pub fn entries(&self) -> &[FlowEntry] {
        &self.entries
    }

    pub fn check_bounds(&self, n_clusters: usize, n_neighborhoods: usize) -> Result<(), DomainError> {
        for e in &self.entries {
            if e.cluster >= n_clusters || e.neighborhood >= n_neighborhoods {
                return Err(DomainError::Invalid {
                    what: "flow table",
                    detail: format!(
                        "entry ({}, {}, {}) out of range for {}x{} graph",
                        e.date, e.neighborhood, e.cluster, n_clusters, n_neighborhoods
                    ),
                });
            }
        }
        Ok(())
    }

    /// Dense n × m count matrix (clusters × neighborhoods) for one day.
    pub fn dense_for_date(&self, date: NaiveDate, n_clusters: usize, n_neighborhoods: usize) -> Tensor {
        let mut out = Tensor::zeros(vec![n_clusters, n_neighborhoods]);
        for e in &self.entries {
            if e.date == date {
                out.set2(e.cluster, e.neighborhood, e.count as f64);
            }
        }
        out
    }

    pub fn total_for_date(&self, date: NaiveDate) -> u64 {
        self.entries.iter().filter(|e| e.date == date).map(|e| e.count).sum()
    }
}
