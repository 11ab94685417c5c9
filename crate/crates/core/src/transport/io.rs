//! CSV/JSON formats for networks and cost matrices.
//!
//! `nodes.csv`: `id,x,y`. `edges.csv`: `from,to,length_m,speed_kmh,modes`
//! with `modes` pipe-separated (`drive|walk`) and `speed_kmh` optionally
//! empty. Edges read from CSV are undirected.

use std::collections::HashMap;
use std::path::Path;

use serde::Deserialize;

use super::cost::CostMatrixSet;
use super::network::{Edge, Mode, RoadNetwork};
use super::TransportError;

#[derive(Deserialize)]
struct NodeRow {
    id: u64,
    x: f64,
    y: f64,
}

#[derive(Deserialize)]
struct EdgeRow {
    from: u64,
    to: u64,
    length_m: f64,
    speed_kmh: Option<f64>,
    modes: String,
}

pub fn read_network(nodes_path: &Path, edges_path: &Path) -> Result<RoadNetwork, TransportError> {
    let mut nodes = HashMap::new();
    for row in csv::Reader::from_path(nodes_path)?.deserialize() {
        let row: NodeRow = row?;
        if nodes.insert(row.id, (row.x, row.y)).is_some() {
            return Err(TransportError::Invalid {
                what: "nodes.csv",
                detail: format!("duplicate node id {}", row.id),
            });
        }
    }
    let mut edges = Vec::new();
    for row in csv::Reader::from_path(edges_path)?.deserialize() {
        let row: EdgeRow = row?;
        let modes = row
            .modes
            .split('|')
            .filter(|s| !s.is_empty())
            .map(Mode::parse)
            .collect::<Result<Vec<_>, _>>()?;
        if modes.is_empty() {
            return Err(TransportError::Invalid {
                what: "edges.csv",
                detail: format!("edge {}->{} lists no modes", row.from, row.to),
            });
        }
        edges.push(Edge {
            from: row.from,
            to: row.to,
            length_m: row.length_m,
            speed_kmh: row.speed_kmh,
            modes,
            directed: false,
        });
    }
    let net = RoadNetwork { nodes, edges };
    net.validate()?;
    Ok(net)
}

pub fn write_network(
    net: &RoadNetwork,
    nodes_path: &Path,
    edges_path: &Path,
) -> Result<(), TransportError> {
    let mut w = csv::Writer::from_path(nodes_path)?;
    w.write_record(["id", "x", "y"])?;
    let mut ids: Vec<u64> = net.nodes.keys().copied().collect();
    ids.sort_unstable();
    for id in ids {
        let (x, y) = net.nodes[&id];
        w.write_record([id.to_string(), x.to_string(), y.to_string()])?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(edges_path)?;
    w.write_record(["from", "to", "length_m", "speed_kmh", "modes"])?;
    for e in &net.edges {
        let speed = e.speed_kmh.map(|s| s.to_string()).unwrap_or_default();
        let modes = e.modes.iter().map(|m| m.tag()).collect::<Vec<_>>().join("|");
        w.write_record([
            e.from.to_string(),
            e.to.to_string(),
            e.length_m.to_string(),
            speed,
            modes,
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// costs.json: {modes, matrices (row-major), m, n, cost_floor}.
pub fn write_costs(set: &CostMatrixSet, path: &Path) -> Result<(), TransportError> {
    let doc = serde_json::json!({
        "modes": set.mode_names,
        "matrices": set.matrices.iter().map(|t| t.data().to_vec()).collect::<Vec<_>>(),
        "m": set.m(),
        "n": set.n(),
        "cost_floor": set.cost_floor,
    });
    let mut text = serde_json::to_string_pretty(&doc).expect("serializable");
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

pub fn read_costs(path: &Path) -> Result<CostMatrixSet, TransportError> {
    #[derive(Deserialize)]
    struct CostsDoc {
        modes: Vec<String>,
        matrices: Vec<Vec<f64>>,
        m: usize,
        n: usize,
        cost_floor: f64,
    }
    let text = std::fs::read_to_string(path)?;
    let doc: CostsDoc = serde_json::from_str(&text).map_err(|e| TransportError::Invalid {
        what: "costs.json",
        detail: e.to_string(),
    })?;
    if doc.modes.len() != doc.matrices.len() {
        return Err(TransportError::Invalid {
            what: "costs.json",
            detail: format!("{} modes but {} matrices", doc.modes.len(), doc.matrices.len()),
        });
    }
    let mut matrices = Vec::with_capacity(doc.matrices.len());
    for (name, flat) in doc.modes.iter().zip(doc.matrices) {
        if flat.len() != doc.m * doc.n {
            return Err(TransportError::Invalid {
                what: "costs.json",
                detail: format!(
                    "matrix {name:?} has {} entries, expected {}x{}",
                    flat.len(),
                    doc.m,
                    doc.n
                ),
            });
        }
        matrices.push(crate::Tensor::new(vec![doc.m, doc.n], flat).expect("length checked"));
    }
    Ok(CostMatrixSet { mode_names: doc.modes, matrices, cost_floor: doc.cost_floor })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transport::{build_cost_matrices, ModePolicy};

    #[test]
    fn network_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let nodes = dir.path().join("nodes.csv");
        let edges = dir.path().join("edges.csv");
        std::fs::write(&nodes, "id,x,y\n1,0,0\n2,1000,0\n3,2000,50\n").unwrap();
        std::fs::write(
            &edges,
            "from,to,length_m,speed_kmh,modes\n1,2,1000,,drive|walk\n2,3,1010,35,transit\n",
        )
        .unwrap();
        let net = read_network(&nodes, &edges).unwrap();
        assert_eq!(net.nodes.len(), 3);
        assert_eq!(net.edges[0].modes, vec![Mode::Drive, Mode::Walk]);
        assert_eq!(net.edges[1].speed_kmh, Some(35.0));

        let nodes2 = dir.path().join("nodes2.csv");
        let edges2 = dir.path().join("edges2.csv");
        write_network(&net, &nodes2, &edges2).unwrap();
        let back = read_network(&nodes2, &edges2).unwrap();
        assert_eq!(back.nodes, net.nodes);
        assert_eq!(back.edges.len(), net.edges.len());
    }

    #[test]
    fn unknown_mode_tag_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let nodes = dir.path().join("nodes.csv");
        let edges = dir.path().join("edges.csv");
        std::fs::write(&nodes, "id,x,y\n1,0,0\n2,1000,0\n").unwrap();
        std::fs::write(&edges, "from,to,length_m,speed_kmh,modes\n1,2,1000,,teleport\n").unwrap();
        assert!(read_network(&nodes, &edges).is_err());
    }

    #[test]
    fn costs_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let nodes = dir.path().join("nodes.csv");
        let edges = dir.path().join("edges.csv");
        std::fs::write(&nodes, "id,x,y\n1,0,0\n2,1000,0\n3,2000,0\n").unwrap();
        std::fs::write(
            &edges,
            "from,to,length_m,speed_kmh,modes\n1,2,1000,,drive|walk\n2,3,1000,,drive|walk\n",
        )
        .unwrap();
        let net = read_network(&nodes, &edges).unwrap();
        let set = build_cost_matrices(
            &net,
            &[(0.0, 0.0), (2000.0, 0.0)],
            &[(1000.0, 0.0)],
            &[ModePolicy::DriveOnly, ModePolicy::WalkTransit],
        )
        .unwrap();
        let path = dir.path().join("costs.json");
        write_costs(&set, &path).unwrap();
        let back = read_costs(&path).unwrap();
        assert_eq!(back.mode_names, vec!["drive", "walk_transit"]);
        assert_eq!(back.m(), 2);
        assert_eq!(back.n(), 1);
        for (a, b) in set.matrices.iter().zip(&back.matrices) {
            assert_eq!(a.data(), b.data());
        }
    }
}
