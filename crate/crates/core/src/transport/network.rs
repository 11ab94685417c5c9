//! Road network representation and multimodal composition.

use serde::{Deserialize, Serialize};
use std::collections::HashMap;

use super::TransportError;

pub const DEFAULT_ROAD_SPEED_KMH: f64 = 50.0;
pub const WALK_SPEED_KMH: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Drive,
    Walk,
    Transit,
}

impl Mode {
    pub fn parse(s: &str) -> Result<Mode, TransportError> {
        match s {
            "drive" => Ok(Mode::Drive),
            "walk" => Ok(Mode::Walk),
            "transit" => Ok(Mode::Transit),
            other => Err(TransportError::Invalid {
                what: "mode",
                detail: format!("unknown mode {other:?}"),
            }),
        }
    }

    pub fn tag(&self) -> &'static str {
        match self {
            Mode::Drive => "drive",
            Mode::Walk => "walk",
            Mode::Transit => "transit",
        }
    }
}

/// Which edges a traveler may use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModePolicy {
    DriveOnly,
    WalkTransit,
}

impl ModePolicy {
    pub fn admits(&self, mode: Mode) -> bool {
        match self {
            ModePolicy::DriveOnly => mode == Mode::Drive,
            ModePolicy::WalkTransit => mode == Mode::Walk || mode == Mode::Transit,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ModePolicy::DriveOnly => "drive",
            ModePolicy::WalkTransit => "walk_transit",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Edge {
    pub from: u64,
    pub to: u64,
    pub length_m: f64,
    pub speed_kmh: Option<f64>,
    pub modes: Vec<Mode>,
    pub directed: bool,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct RoadNetwork {
    pub nodes: HashMap<u64, (f64, f64)>,
    pub edges: Vec<Edge>,
}

impl RoadNetwork {
    pub fn validate(&self) -> Result<(), TransportError> {
        for e in &self.edges {
            if !self.nodes.contains_key(&e.from) {
                return Err(TransportError::UnknownNode(e.from));
            }
            if !self.nodes.contains_key(&e.to) {
                return Err(TransportError::UnknownNode(e.to));
            }
            if !(e.length_m > 0.0 && e.length_m.is_finite()) {
                return Err(TransportError::BadLength { from: e.from, to: e.to, length: e.length_m });
            }
            if let Some(s) = e.speed_kmh {
                if !(s > 0.0 && s.is_finite()) {
                    return Err(TransportError::BadSpeed { from: e.from, to: e.to, speed: s });
                }
            }
        }
        Ok(())
    }

    /// Node ids touching at least one edge admissible under `policy`.
    pub fn admissible_nodes(&self, policy: ModePolicy) -> Vec<u64> {
        let mut ids: Vec<u64> = self
            .edges
            .iter()
            .filter(|e| e.modes.iter().any(|&m| policy.admits(m)))
            .flat_map(|e| [e.from, e.to])
            .collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }

    /// Nearest admissible node to a point, ties to the lowest node id.
    pub fn snap(&self, point: (f64, f64), policy: ModePolicy) -> Result<u64, TransportError> {
        let candidates = self.admissible_nodes(policy);
        if candidates.is_empty() {
            return Err(TransportError::NoAdmissibleNode { policy });
        }
        let mut best = candidates[0];
        let mut best_d2 = f64::INFINITY;
        for id in candidates {
            let (x, y) = self.nodes[&id];
            let d2 = (x - point.0).powi(2) + (y - point.1).powi(2);
            if d2 < best_d2 {
                best_d2 = d2;
                best = id;
            }
        }
        Ok(best)
    }
}

/// Travel time in minutes for one edge under one mode.
///
/// Drive and transit edges missing a posted speed default to 50 km/h;
/// walking is always 5 km/h.
pub fn edge_time(edge: &Edge, mode: Mode) -> Result<f64, TransportError> {
    if !edge.modes.contains(&mode) {
        return Err(TransportError::ModeNotAllowed { mode, from: edge.from, to: edge.to });
    }
    let speed_kmh = match mode {
        Mode::Walk => WALK_SPEED_KMH,
        Mode::Drive | Mode::Transit => edge.speed_kmh.unwrap_or(DEFAULT_ROAD_SPEED_KMH),
    };
    let speed_m_per_min = speed_kmh * 1000.0 / 60.0;
    Ok(edge.length_m / speed_m_per_min)
}

/// Fastest admissible traversal time for an edge under a policy, if any.
pub fn edge_time_under_policy(edge: &Edge, policy: ModePolicy) -> Option<f64> {
    edge.modes
        .iter()
        .filter(|&&m| policy.admits(m))
        .filter_map(|&m| edge_time(edge, m).ok())
        .min_by(|a, b| a.partial_cmp(b).expect("times are finite"))
}

/// Union of network layers. Shared node ids must agree in position to within
/// one meter; duplicate (from, to, mode) edges keep the faster one.
pub fn compose_networks(layers: &[RoadNetwork]) -> Result<RoadNetwork, TransportError> {
    let mut nodes: HashMap<u64, (f64, f64)> = HashMap::new();
    for layer in layers {
        layer.validate()?;
        for (&id, &(x, y)) in &layer.nodes {
            if let Some(&(px, py)) = nodes.get(&id) {
                let dist = ((x - px).powi(2) + (y - py).powi(2)).sqrt();
                if dist > 1.0 {
                    return Err(TransportError::NodeConflict { id, dist });
                }
            } else {
                nodes.insert(id, (x, y));
            }
        }
    }
    // dedup on (from, to, mode, directed), keeping the fastest traversal
    let mut best: HashMap<(u64, u64, Mode, bool), Edge> = HashMap::new();
    for layer in layers {
        for e in &layer.edges {
            for &mode in &e.modes {
                let key = (e.from, e.to, mode, e.directed);
                let mut single = e.clone();
                single.modes = vec![mode];
                match best.get(&key) {
                    Some(prev) => {
                        let t_new = edge_time(&single, mode).expect("mode present");
                        let prev_single = prev.clone();
                        let t_prev = edge_time(&prev_single, mode).expect("mode present");
                        if t_new < t_prev {
                            best.insert(key, single);
                        }
                    }
                    None => {
                        best.insert(key, single);
                    }
                }
            }
        }
    }
    let mut edges: Vec<Edge> = best.into_values().collect();
    edges.sort_by(|a, b| {
        (a.from, a.to, a.modes[0].tag(), a.directed).cmp(&(b.from, b.to, b.modes[0].tag(), b.directed))
    });
    Ok(RoadNetwork { nodes, edges })
}
