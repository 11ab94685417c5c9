//! Multimodal road networks and travel-time cost matrices.

mod cost;
pub mod io;
mod network;
mod shortest;

pub use cost::{build_cost_matrices, CostMatrixSet};
pub use network::{compose_networks, edge_time, Edge, Mode, ModePolicy, RoadNetwork};
pub use shortest::shortest_time;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum TransportError {
    #[error("edge references unknown node {0}")]
    UnknownNode(u64),
    #[error("edge {from}->{to} has non-positive length {length}")]
    BadLength { from: u64, to: u64, length: f64 },
    #[error("edge {from}->{to} has non-positive speed {speed}")]
    BadSpeed { from: u64, to: u64, speed: f64 },
    #[error("shared node {id} has conflicting coordinates (distance {dist:.1} m)")]
    NodeConflict { id: u64, dist: f64 },
    #[error("mode {mode:?} not allowed on edge {from}->{to}")]
    ModeNotAllowed { mode: Mode, from: u64, to: u64 },
    #[error("no path from node {from} to node {to} under {policy:?}")]
    NoPath { from: u64, to: u64, policy: ModePolicy },
    #[error("unreachable centroid pairs under {policy:?}: {}", pairs.iter().map(|(a, b)| format!("({a},{b})")).collect::<Vec<_>>().join(", "))]
    UnreachablePairs { policy: ModePolicy, pairs: Vec<(usize, usize)> },
    #[error("network has no node admissible for {policy:?}")]
    NoAdmissibleNode { policy: ModePolicy },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("invalid {what}: {detail}")]
    Invalid { what: &'static str, detail: String },
}
