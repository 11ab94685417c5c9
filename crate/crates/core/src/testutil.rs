//! Shared helpers for unit tests.

use chrono::NaiveDate;

use crate::domain::{standardize_features, CityGraph};
use crate::Tensor;

/// A small valid city: standardized feature matrices, random costs, and a
/// contiguous date range. `n` clusters, `m` neighborhoods.
#[allow(clippy::too_many_arguments)]
pub(crate) fn test_city(
    n: usize,
    m: usize,
    days: usize,
    l: usize,
    k: usize,
    s: usize,
    n_modes: usize,
    seed: u64,
) -> CityGraph {
    let mut rng = simple_rng(seed.wrapping_add(0xC17));
    let std_mat = |rows: usize, cols: usize, rng: &mut dyn FnMut() -> f64| {
        let raw = Tensor::matrix(rows, cols, (0..rows * cols).map(|_| rng() * 10.0).collect())
            .unwrap();
        let names: Vec<String> = (0..cols).map(|i| format!("f{i}")).collect();
        standardize_features(&raw, &names, &[]).unwrap().0
    };
    let clusters = std_mat(n, l, &mut rng);
    let neighborhoods = std_mat(m, k, &mut rng);
    let env = std_mat(days, s, &mut rng);
    let costs = (0..n_modes)
        .map(|_| {
            Tensor::matrix(m, n, (0..m * n).map(|_| 2.0 + rng() * 38.0).collect()).unwrap()
        })
        .collect();
    let start = NaiveDate::from_ymd_opt(2019, 1, 1).unwrap();
    let city = CityGraph {
        cluster_ids: (0..n).map(|i| format!("c{i}")).collect(),
        neighborhood_ids: (0..m).map(|i| format!("n{i}")).collect(),
        cluster_feature_names: (0..l).map(|i| format!("cf{i}")).collect(),
        neighborhood_feature_names: (0..k).map(|i| format!("nf{i}")).collect(),
        env_feature_names: (0..s).map(|i| format!("ef{i}")).collect(),
        mode_names: (0..n_modes).map(|i| format!("mode{i}")).collect(),
        clusters,
        neighborhoods,
        costs,
        dates: (0..days as u64).map(|d| start + chrono::Days::new(d)).collect(),
        env,
        cluster_xy: Some((0..n).map(|i| (i as f64 * 500.0, (i % 3) as f64 * 400.0)).collect()),
    };
    city.validate().unwrap();
    city
}

/// Tiny deterministic generator for test data (splitmix64).
pub(crate) fn simple_rng(seed: u64) -> impl FnMut() -> f64 {
    let mut s = seed.wrapping_add(0x9E3779B97F4A7C15);
    move || {
        s = s.wrapping_add(0x9E3779B97F4A7C15);
        let mut z = s;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
        z ^= z >> 31;
        (z >> 11) as f64 / (1u64 << 53) as f64
    }
}
