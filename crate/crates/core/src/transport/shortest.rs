//! Dijkstra shortest travel times under a mode policy.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};

use super::network::{edge_time_under_policy, ModePolicy, RoadNetwork};
use super::TransportError;

#[derive(PartialEq)]
struct HeapItem {
    time: f64,
    node: u64,
}

impl Eq for HeapItem {}

impl Ord for HeapItem {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on time, ties broken by node id for determinism
        other
            .time
            .partial_cmp(&self.time)
            .expect("times are finite")
            .then(other.node.cmp(&self.node))
    }
}

impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Adjacency under a policy: node -> (neighbor, minutes).
pub(crate) fn adjacency(network: &RoadNetwork, policy: ModePolicy) -> HashMap<u64, Vec<(u64, f64)>> {
    let mut adj: HashMap<u64, Vec<(u64, f64)>> = HashMap::new();
    for e in &network.edges {
        if let Some(t) = edge_time_under_policy(e, policy) {
            adj.entry(e.from).or_default().push((e.to, t));
            if !e.directed {
                adj.entry(e.to).or_default().push((e.from, t));
            }
        }
    }
    for list in adj.values_mut() {
        list.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.partial_cmp(&b.1).expect("finite")));
    }
    adj
}

/// Single-source Dijkstra; returns minutes to every reachable node.
pub(crate) fn dijkstra(
    network: &RoadNetwork,
    adj: &HashMap<u64, Vec<(u64, f64)>>,
    source: u64,
) -> HashMap<u64, f64> {
    let mut dist: HashMap<u64, f64> = HashMap::with_capacity(network.nodes.len());
    let mut heap = BinaryHeap::new();
    dist.insert(source, 0.0);
    heap.push(HeapItem { time: 0.0, node: source });
    while let Some(HeapItem { time, node }) = heap.pop() {
        if time > dist[&node] {
            continue;
        }
        if let Some(neighbors) = adj.get(&node) {
            for &(next, w) in neighbors {
                let cand = time + w;
                if dist.get(&next).map_or(true, |&d| cand < d) {
                    dist.insert(next, cand);
                    heap.push(HeapItem { time: cand, node: next });
                }
            }
        }
    }
    dist
}

/// Exact shortest travel time in minutes between two nodes.
pub fn shortest_time(
    network: &RoadNetwork,
    source: u64,
    target: u64,
    policy: ModePolicy,
) -> Result<f64, TransportError> {
    if !network.nodes.contains_key(&source) {
        return Err(TransportError::UnknownNode(source));
    }
    if !network.nodes.contains_key(&target) {
        return Err(TransportError::UnknownNode(target));
    }
    if source == target {
        return Ok(0.0);
    }
    let adj = adjacency(network, policy);
    let dist = dijkstra(network, &adj, source);
    dist.get(&target)
        .copied()
        .ok_or(TransportError::NoPath { from: source, to: target, policy })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transport::network::{Edge, Mode};

    fn grid_network(seed: u64, n: usize) -> RoadNetwork {
        let mut s = seed.wrapping_add(0x9E3779B97F4A7C15);
        let mut next = move || {
            s = s.wrapping_add(0x9E3779B97F4A7C15);
            let mut z = s;
            z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
            z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
            z ^= z >> 31;
            (z >> 11) as f64 / (1u64 << 53) as f64
        };
        let mut net = RoadNetwork::default();
        for id in 0..n as u64 {
            net.nodes.insert(id, (next() * 5000.0, next() * 5000.0));
        }
        // ring for connectivity plus random chords
        for id in 0..n as u64 {
            net.edges.push(Edge {
                from: id,
                to: (id + 1) % n as u64,
                length_m: 100.0 + next() * 900.0,
                speed_kmh: Some(20.0 + next() * 60.0),
                modes: vec![Mode::Drive],
                directed: false,
            });
        }
        for _ in 0..n {
            let a = (next() * n as f64) as u64 % n as u64;
            let b = (next() * n as f64) as u64 % n as u64;
            if a != b {
                net.edges.push(Edge {
                    from: a,
                    to: b,
                    length_m: 100.0 + next() * 2000.0,
                    speed_kmh: None,
                    modes: vec![Mode::Drive],
                    directed: false,
                });
            }
        }
        net
    }

    /// Floyd-Warshall all-pairs oracle.
    pub(crate) fn floyd_warshall(net: &RoadNetwork, policy: ModePolicy) -> Vec<Vec<f64>> {
        let mut ids: Vec<u64> = net.nodes.keys().copied().collect();
        ids.sort_unstable();
        let idx: std::collections::HashMap<u64, usize> =
            ids.iter().enumerate().map(|(i, &id)| (id, i)).collect();
        let n = ids.len();
        let mut d = vec![vec![f64::INFINITY; n]; n];
        for (i, row) in d.iter_mut().enumerate() {
            row[i] = 0.0;
        }
        for e in &net.edges {
            if let Some(t) = crate::transport::network::edge_time_under_policy(e, policy) {
                let (a, b) = (idx[&e.from], idx[&e.to]);
                if t < d[a][b] {
                    d[a][b] = t;
                }
                if !e.directed && t < d[b][a] {
                    d[b][a] = t;
                }
            }
        }
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    let via = d[i][k] + d[k][j];
                    if via < d[i][j] {
                        d[i][j] = via;
                    }
                }
            }
        }
        d
    }

    #[test]
    fn identity_is_zero() {
        let net = grid_network(1, 10);
        assert_eq!(shortest_time(&net, 3, 3, ModePolicy::DriveOnly).unwrap(), 0.0);
    }

    #[test]
    fn single_edge_path() {
        let mut net = RoadNetwork::default();
        net.nodes.insert(1, (0.0, 0.0));
        net.nodes.insert(2, (1000.0, 0.0));
        net.edges.push(Edge {
            from: 1,
            to: 2,
            length_m: 1000.0,
            speed_kmh: None,
            modes: vec![Mode::Walk],
            directed: false,
        });
        let t = shortest_time(&net, 1, 2, ModePolicy::WalkTransit).unwrap();
        assert_eq!(t, 12.0);
    }

    #[test]
    fn unreachable_names_pair() {
        let mut net = RoadNetwork::default();
        net.nodes.insert(1, (0.0, 0.0));
        net.nodes.insert(2, (10.0, 0.0));
        let err = shortest_time(&net, 1, 2, ModePolicy::DriveOnly).unwrap_err();
        assert!(err.to_string().contains('1') && err.to_string().contains('2'));
    }

    #[test]
    fn matches_floyd_warshall_on_random_graphs() {
        for seed in 0..10u64 {
            let net = grid_network(seed, 50);
            let oracle = floyd_warshall(&net, ModePolicy::DriveOnly);
            let mut ids: Vec<u64> = net.nodes.keys().copied().collect();
            ids.sort_unstable();
            let adj = adjacency(&net, ModePolicy::DriveOnly);
            for (i, &src) in ids.iter().enumerate() {
                let dist = dijkstra(&net, &adj, src);
                for (j, &dst) in ids.iter().enumerate() {
                    let got = dist.get(&dst).copied().unwrap_or(f64::INFINITY);
                    assert!(
                        (got - oracle[i][j]).abs() < 1e-9,
                        "seed {seed} {src}->{dst}: {got} vs {}",
                        oracle[i][j]
                    );
                }
            }
        }
    }

    #[test]
    fn adding_admissible_edges_never_slows() {
        // walk+transit time <= walk-only time on the composed graph
        let mut walk_only = grid_network(7, 20);
        for e in walk_only.edges.iter_mut() {
            e.modes = vec![Mode::Walk];
        }
        let mut with_transit = walk_only.clone();
        with_transit.edges.push(Edge {
            from: 0,
            to: 10,
            length_m: 3000.0,
            speed_kmh: Some(40.0),
            modes: vec![Mode::Transit],
            directed: false,
        });
        for target in 1..20u64 {
            let a = shortest_time(&walk_only, 0, target, ModePolicy::WalkTransit).unwrap();
            let b = shortest_time(&with_transit, 0, target, ModePolicy::WalkTransit).unwrap();
            assert!(b <= a + 1e-12);
        }
    }
}
