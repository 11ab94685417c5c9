//! Synthetic cities with known generating law: gravity flows modulated by a
//! log-linear environment effect, sampled through a seeded Poisson draw.

mod sample;

pub use sample::poisson_sample;

use chrono::{Datelike, NaiveDate};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classic::{gravity_flow, ClassicError, GravityParams};
use crate::domain::{
    assemble_city_graph, standardize_features, CityGraph, ClusterFeatures, DomainError, EnvRecord,
    FlowEntry, FlowTable, NeighborhoodFeatures,
};
use crate::transport::{build_cost_matrices, Edge, Mode, ModePolicy, RoadNetwork, TransportError};
use crate::Tensor;

/// Dimension of the PCA-reduced sector-count block in generated clusters.
pub const REDUCED_POI_DIM: usize = 3;
/// Raw environment features the rate law may depend on (visit lag excluded).
pub const ENV_COEF_DIM: usize = 12;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error(transparent)]
    Classic(#[from] ClassicError),
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub seed: u64,
    pub n_clusters: usize,
    pub m_neighborhoods: usize,
    pub days: usize,
    pub start_date: NaiveDate,
    pub gravity: GravityParams,
    /// Log-rate coefficient per raw env feature (weather 5, hazard 4,
    /// stay-at-home, holiday, in that order — 12 values).
    pub env_coefficients: Vec<f64>,
    /// Day offsets flagged as storm-hazard days.
    pub hazard_days: Vec<usize>,
    /// Day offsets under a stay-at-home order.
    pub lockdown_days: Vec<usize>,
    /// 1 = drive only, 2 = drive + walk/transit.
    pub n_modes: usize,
    pub include_visit_lag: bool,
}

impl Default for ScenarioSpec {
    fn default() -> Self {
        ScenarioSpec {
            seed: 7,
            n_clusters: 10,
            m_neighborhoods: 15,
            days: 60,
            start_date: NaiveDate::from_ymd_opt(2019, 1, 1).expect("valid date"),
            gravity: GravityParams { k: 0.02, alpha: 0.6, beta: 0.7, gamma: 1.5 },
            env_coefficients: {
                let mut c = vec![0.0; ENV_COEF_DIM];
                c[8] = -0.8; // hz_storm suppresses visits
                c[9] = -0.5; // stay_at_home
                c[10] = 0.2; // holiday lifts them
                c
            },
            hazard_days: vec![40, 41, 42],
            lockdown_days: vec![50, 51, 52, 53],
            n_modes: 2,
            include_visit_lag: true,
        }
    }
}

impl ScenarioSpec {
    pub fn validate(&self) -> Result<(), SynthError> {
        self.gravity.validate().map_err(|e| SynthError::Invalid(e.to_string()))?;
        if self.n_clusters == 0 || self.m_neighborhoods == 0 {
            return Err(SynthError::Invalid("need at least one cluster and neighborhood".into()));
        }
        if self.days < 9 {
            return Err(SynthError::Invalid(format!(
                "{} days is too short; need at least 9 (LSTM window + 2)",
                self.days
            )));
        }
        if self.env_coefficients.len() != ENV_COEF_DIM {
            return Err(SynthError::Invalid(format!(
                "{} env coefficients, expected {ENV_COEF_DIM}",
                self.env_coefficients.len()
            )));
        }
        if !(1..=2).contains(&self.n_modes) {
            return Err(SynthError::Invalid(format!("n_modes {} not in 1..=2", self.n_modes)));
        }
        if let Some(&d) = self.hazard_days.iter().chain(&self.lockdown_days).find(|&&d| d >= self.days) {
            return Err(SynthError::Invalid(format!("calendar day {d} beyond {} days", self.days)));
        }
        Ok(())
    }
}

/// Everything the generator knew: per-day true rates (n×m) and the masses
/// and costs behind them.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroundTruth {
    pub spec: ScenarioSpec,
    pub origin_masses: Vec<f64>,
    pub dest_masses: Vec<f64>,
    /// Drive-time matrix (m×n) the law used.
    pub costs: Tensor,
    /// Daily n×m rate matrices.
    pub rates: Vec<Tensor>,
}

pub struct Generated {
    pub city: CityGraph,
    pub flows: FlowTable,
    pub truth: GroundTruth,
    pub env_records: Vec<EnvRecord>,
    pub network: RoadNetwork,
}

pub fn generate(spec: &ScenarioSpec) -> Result<Generated, SynthError> {
    spec.validate()?;
    let mut rng = ChaCha20Rng::seed_from_u64(spec.seed);
    let n = spec.n_clusters;
    let m = spec.m_neighborhoods;

    // --- static geography -------------------------------------------------
    let grid = ((n + m).max(16) as f64).sqrt().ceil() as usize;
    let extent = grid as f64 * 500.0;
    let network = random_road_network(grid, spec.n_modes, &mut rng);
    let cluster_xy: Vec<(f64, f64)> =
        (0..n).map(|_| (rng.gen::<f64>() * extent, rng.gen::<f64>() * extent)).collect();
    let neighborhood_xy: Vec<(f64, f64)> =
        (0..m).map(|_| (rng.gen::<f64>() * extent, rng.gen::<f64>() * extent)).collect();

    let policies: Vec<ModePolicy> = if spec.n_modes == 1 {
        vec![ModePolicy::DriveOnly]
    } else {
        vec![ModePolicy::DriveOnly, ModePolicy::WalkTransit]
    };
    let cost_set = build_cost_matrices(&network, &neighborhood_xy, &cluster_xy, &policies)?;

    // --- features ---------------------------------------------------------
    let cluster_feats: Vec<ClusterFeatures> = (0..n).map(|_| random_cluster(&mut rng)).collect();
    let neighborhood_feats: Vec<NeighborhoodFeatures> =
        (0..m).map(|_| random_neighborhood(&mut rng)).collect();
    let dest_masses: Vec<f64> = cluster_feats.iter().map(|c| c.business_count).collect();
    let origin_masses: Vec<f64> = neighborhood_feats.iter().map(|f| f.census[5]).collect();

    // --- environment calendar --------------------------------------------
    let mut env_records = Vec::with_capacity(spec.days);
    for d in 0..spec.days {
        let date = spec.start_date + chrono::Days::new(d as u64);
        let hazard_day = spec.hazard_days.contains(&d);
        let season = (d as f64 / 365.0 * std::f64::consts::TAU).sin();
        env_records.push(EnvRecord {
            date,
            weather: [
                15.0 + 10.0 * season + rng.gen::<f64>() * 4.0 - 2.0,
                6.0 + rng.gen::<f64>() * 6.0 + if hazard_day { 15.0 } else { 0.0 },
                12.0 + rng.gen::<f64>() * 10.0 + if hazard_day { 40.0 } else { 0.0 },
                (rng.gen::<f64>() * 4.0).floor(),
                rng.gen::<f64>() * 8.0 + if hazard_day { 20.0 } else { 0.0 },
            ],
            hazard: [false, hazard_day && rng.gen::<f64>() < 0.5, false, hazard_day],
            stay_at_home: spec.lockdown_days.contains(&d),
            holiday: date.weekday() == chrono::Weekday::Sun,
            total_visits_prev: 0.0, // filled after sampling the previous day
        });
    }

    // --- rates and counts -------------------------------------------------
    let drive_costs = &cost_set.matrices[0]; // m×n
    let mut rates = Vec::with_capacity(spec.days);
    let mut entries = Vec::new();
    let mut prev_total = 0.0f64;
    for record in env_records.iter_mut() {
        record.total_visits_prev = prev_total;
        let raw = record.to_vec(false);
        let modifier: f64 = raw
            .iter()
            .zip(&spec.env_coefficients)
            .map(|(x, c)| x * c)
            .sum::<f64>()
            .exp();
        let mut day_rates = Tensor::zeros(vec![n, m]);
        let mut day_total = 0u64;
        for i in 0..n {
            for j in 0..m {
                let base = gravity_flow(
                    &spec.gravity,
                    origin_masses[j],
                    dest_masses[i],
                    drive_costs.at2(j, i),
                )?;
                let lambda = base * modifier;
                day_rates.set2(i, j, lambda);
                let count = poisson_sample(lambda, &mut rng);
                if count > 0 {
                    entries.push(FlowEntry {
                        date: record.date,
                        neighborhood: j,
                        cluster: i,
                        count,
                    });
                    day_total += count;
                }
            }
        }
        rates.push(day_rates);
        prev_total = day_total as f64;
    }
    let flows = FlowTable::new(entries)?;

    // first day has no observed predecessor; its lag stays at zero

    // --- assemble the standardized city graph -----------------------------
    let cluster_names = ClusterFeatures::feature_names(REDUCED_POI_DIM);
    let cluster_raw =
        Tensor::from_rows(&cluster_feats.iter().map(|c| c.to_vec()).collect::<Vec<_>>())
            .map_err(|e| SynthError::Invalid(e.to_string()))?;
    let (cluster_std, _) = standardize_features(&cluster_raw, &cluster_names, &[])?;
    let neighborhood_names = NeighborhoodFeatures::feature_names();
    let neighborhood_raw =
        Tensor::from_rows(&neighborhood_feats.iter().map(|f| f.to_vec()).collect::<Vec<_>>())
            .map_err(|e| SynthError::Invalid(e.to_string()))?;
    let (neighborhood_std, _) = standardize_features(&neighborhood_raw, &neighborhood_names, &[])?;
    let env_names = EnvRecord::feature_names(spec.include_visit_lag);
    let env_raw = EnvRecord::matrix(&env_records, spec.include_visit_lag)?;
    let (env_std, _) = standardize_features(&env_raw, &env_names, &[])?;

    let city = assemble_city_graph(
        (0..n).map(|i| format!("cluster_{i:03}")).collect(),
        (0..m).map(|j| format!("tract_{j:03}")).collect(),
        cluster_names,
        neighborhood_names,
        env_names,
        cost_set.mode_names.clone(),
        cluster_std,
        neighborhood_std,
        cost_set.matrices.clone(),
        env_records.iter().map(|r| r.date).collect(),
        env_std,
        Some(cluster_xy),
    )?;

    Ok(Generated {
        city,
        flows,
        truth: GroundTruth {
            spec: spec.clone(),
            origin_masses,
            dest_masses,
            costs: drive_costs.clone(),
            rates,
        },
        env_records,
        network,
    })
}

/// Jittered-grid planar road graph: 4-connected lattice (drive+walk) plus a
/// few express transit chords when two modes are requested.
fn random_road_network(grid: usize, n_modes: usize, rng: &mut ChaCha20Rng) -> RoadNetwork {
    let mut net = RoadNetwork::default();
    let cell = 500.0;
    let at = |r: usize, c: usize| (r * grid + c) as u64;
    for r in 0..grid {
        for c in 0..grid {
            let jx = rng.gen::<f64>() * 120.0 - 60.0;
            let jy = rng.gen::<f64>() * 120.0 - 60.0;
            net.nodes.insert(at(r, c), (c as f64 * cell + jx, r as f64 * cell + jy));
        }
    }
    let connect = |a: u64, b: u64, rng: &mut ChaCha20Rng, net: &mut RoadNetwork| {
        let (ax, ay) = net.nodes[&a];
        let (bx, by) = net.nodes[&b];
        let length = ((ax - bx).powi(2) + (ay - by).powi(2)).sqrt() * (1.0 + rng.gen::<f64>() * 0.2);
        net.edges.push(Edge {
            from: a,
            to: b,
            length_m: length,
            speed_kmh: Some(25.0 + rng.gen::<f64>() * 35.0),
            modes: vec![Mode::Drive, Mode::Walk],
            directed: false,
        });
    };
    for r in 0..grid {
        for c in 0..grid {
            if c + 1 < grid {
                connect(at(r, c), at(r, c + 1), rng, &mut net);
            }
            if r + 1 < grid {
                connect(at(r, c), at(r + 1, c), rng, &mut net);
            }
        }
    }
    if n_modes == 2 {
        for r in 0..grid {
            let (ax, ay) = net.nodes[&at(r, 0)];
            let (bx, by) = net.nodes[&at(r, grid - 1)];
            net.edges.push(Edge {
                from: at(r, 0),
                to: at(r, grid - 1),
                length_m: ((ax - bx).powi(2) + (ay - by).powi(2)).sqrt() * 1.05,
                speed_kmh: Some(45.0),
                modes: vec![Mode::Transit],
                directed: false,
            });
        }
    }
    net
}

fn random_cluster(rng: &mut ChaCha20Rng) -> ClusterFeatures {
    let mut morphology = [0.0; 4];
    morphology[(rng.next_u32() % 4) as usize] = 1.0;
    let mut land_use = [0.0; 8];
    let mut total = 0.0;
    for v in land_use.iter_mut() {
        *v = rng.gen::<f64>();
        total += *v;
    }
    for v in land_use.iter_mut() {
        *v /= total;
    }
    let fx = 0.5 + rng.gen::<f64>() * 0.5;
    let fa = (1.0 - fx) * rng.gen::<f64>();
    ClusterFeatures {
        morphology,
        poi_counts_reduced: (0..REDUCED_POI_DIM).map(|_| rng.gen::<f64>() * 4.0 - 2.0).collect(),
        poi_diversity: rng.gen::<f64>() * 3.0,
        chain_ratio: rng.gen::<f64>(),
        land_use,
        bus_stop_count: (rng.gen::<f64>() * 12.0).floor(),
        flood_zone: [fx, fa, 1.0 - fx - fa],
        business_count: 5.0 + (rng.gen::<f64>() * 115.0).floor(),
        total_area: 2_000.0 + rng.gen::<f64>() * 48_000.0,
    }
}

fn random_neighborhood(rng: &mut ChaCha20Rng) -> NeighborhoodFeatures {
    let mut land_use = [0.0; 8];
    let mut total = 0.0;
    for v in land_use.iter_mut() {
        *v = rng.gen::<f64>();
        total += *v;
    }
    for v in land_use.iter_mut() {
        *v /= total;
    }
    let fx = 0.6 + rng.gen::<f64>() * 0.4;
    let fa = (1.0 - fx) * rng.gen::<f64>();
    NeighborhoodFeatures {
        census: [
            25.0 + rng.gen::<f64>() * 30.0,
            rng.gen::<f64>(),
            rng.gen::<f64>() * 0.5,
            rng.gen::<f64>(),
            0.4 + rng.gen::<f64>() * 0.6,
            500.0 + (rng.gen::<f64>() * 4_500.0).floor(),
            rng.gen::<f64>(),
        ],
        land_use,
        accessibility: [
            20.0 + rng.gen::<f64>() * 80.0,
            5.0 + rng.gen::<f64>() * 20.0,
            rng.gen::<f64>() * 20.0,
        ],
        flood_zone: [fx, fa, 1.0 - fx - fa],
    }
}

pub fn write_truth(path: &std::path::Path, truth: &GroundTruth) -> Result<(), SynthError> {
    let mut text = serde_json::to_string_pretty(truth)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

pub fn read_truth(path: &std::path::Path) -> Result<GroundTruth, SynthError> {
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}
