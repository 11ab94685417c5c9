//! Domain data types: POIs, cluster/neighborhood/environment features, the
//! assembled city graph, and observed flow tables.

mod graph;
pub mod io;
mod pca;
mod standardize;

pub use graph::{assemble_city_graph, CityGraph, FlowEntry, FlowTable};
pub use pca::{pca_reduce, PcaBasis};
pub use standardize::{standardize_features, ColumnStat, ColumnStats};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Minimum travel cost in minutes. Attention scores are divided by cost, so
/// a zero self-distance would be singular.
pub const COST_FLOOR: f64 = 1.0;

#[derive(Debug, Error)]
pub enum DomainError {
    #[error("non-finite value in column {column} (row {row})")]
    NonFinite { column: usize, row: usize },
    #[error("negative value {value} in log-transform column {column}")]
    NegativeInLogColumn { column: usize, value: f64 },
    #[error("PCA requires at least 2 rows, got {rows}")]
    TooFewRows { rows: usize },
    #[error("invalid {what}: {detail}")]
    Invalid { what: &'static str, detail: String },
    #[error("city graph validation failed:\n{}", issues.join("\n"))]
    Validation { issues: Vec<String> },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

/// A point of interest in planar coordinates (meters).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Poi {
    pub id: String,
    pub x: f64,
    pub y: f64,
    pub naics: String,
    pub is_chain: bool,
}

impl Poi {
    pub fn validate(&self) -> Result<(), DomainError> {
        if !(self.x.is_finite() && self.y.is_finite()) {
            return Err(DomainError::Invalid {
                what: "poi",
                detail: format!("poi {} has non-finite coordinates", self.id),
            });
        }
        if self.naics.len() != 6 || !self.naics.bytes().all(|b| b.is_ascii_digit()) {
            return Err(DomainError::Invalid {
                what: "poi",
                detail: format!("poi {} naics {:?} is not 6 digits", self.id, self.naics),
            });
        }
        Ok(())
    }
}

/// Attractiveness features of one business cluster.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClusterFeatures {
    /// One-hot over plaza | street | downtown | mall.
    pub morphology: [f64; 4],
    /// PCA-reduced POI sector counts.
    pub poi_counts_reduced: Vec<f64>,
    /// Shannon entropy over 6-digit industry codes, nats.
    pub poi_diversity: f64,
    pub chain_ratio: f64,
    pub land_use: [f64; 8],
    pub bus_stop_count: f64,
    /// Area proportions in flood zones X, A, V.
    pub flood_zone: [f64; 3],
    pub business_count: f64,
    pub total_area: f64,
}

pub const MORPHOLOGY_NAMES: [&str; 4] = ["morph_plaza", "morph_street", "morph_downtown", "morph_mall"];
pub const LAND_USE_NAMES: [&str; 8] = [
    "lu_commercial",
    "lu_mixed",
    "lu_office",
    "lu_parking",
    "lu_recreation",
    "lu_single_family",
    "lu_multi_family",
    "lu_vacant",
];
pub const FLOOD_ZONE_NAMES: [&str; 3] = ["fldZone_X", "fldZone_A", "fldZone_V"];
pub const CENSUS_NAMES: [&str; 7] = [
    "age",
    "auto_ownership",
    "below_poverty_ratio",
    "education",
    "employment",
    "population",
    "race_white_share",
];
pub const ACCESSIBILITY_NAMES: [&str; 3] = ["intersection_density", "roadway_density", "walkability"];
pub const WEATHER_NAMES: [&str; 5] = [
    "avg_temp",
    "avg_wind",
    "fastest_2min_wind",
    "multiday_precip_days",
    "precip_intensity",
];
pub const HAZARD_NAMES: [&str; 4] = ["hz_coastal_flood", "hz_flood", "hz_others", "hz_storm"];

impl ClusterFeatures {
    pub fn feature_names(reduced_dim: usize) -> Vec<String> {
        let mut names: Vec<String> = MORPHOLOGY_NAMES.iter().map(|s| s.to_string()).collect();
        names.extend((0..reduced_dim).map(|i| format!("poiCounts_pc{i}")));
        names.push("businessDiversity".into());
        names.push("chainRatio".into());
        names.extend(LAND_USE_NAMES.iter().map(|s| s.to_string()));
        names.push("busStopNum".into());
        names.extend(FLOOD_ZONE_NAMES.iter().map(|s| s.to_string()));
        names.push("businessNum".into());
        names.push("totalArea".into());
        names
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = self.morphology.to_vec();
        v.extend_from_slice(&self.poi_counts_reduced);
        v.push(self.poi_diversity);
        v.push(self.chain_ratio);
        v.extend_from_slice(&self.land_use);
        v.push(self.bus_stop_count);
        v.extend_from_slice(&self.flood_zone);
        v.push(self.business_count);
        v.push(self.total_area);
        v
    }

    pub fn validate(&self) -> Result<(), DomainError> {
        let invalid = |detail: String| DomainError::Invalid { what: "cluster features", detail };
        let one_hot: f64 = self.morphology.iter().sum();
        if (one_hot - 1.0).abs() > 1e-12 || self.morphology.iter().any(|&m| m != 0.0 && m != 1.0) {
            return Err(invalid(format!("morphology {:?} is not one-hot", self.morphology)));
        }
        if !(0.0..=1.0).contains(&self.chain_ratio) {
            return Err(invalid(format!("chain_ratio {} outside [0,1]", self.chain_ratio)));
        }
        if self.poi_diversity < 0.0 {
            return Err(invalid(format!("poi_diversity {} negative", self.poi_diversity)));
        }
        if self.land_use.iter().any(|&p| p < 0.0) {
            return Err(invalid(format!("land_use {:?} has negative entry", self.land_use)));
        }
        if self.flood_zone.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
            return Err(invalid(format!("flood_zone {:?} outside [0,1]", self.flood_zone)));
        }
        Ok(())
    }
}

/// Demand and patronage-preference features of one residential neighborhood.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NeighborhoodFeatures {
    pub census: [f64; 7],
    pub land_use: [f64; 8],
    pub accessibility: [f64; 3],
    pub flood_zone: [f64; 3],
}

impl NeighborhoodFeatures {
    pub fn feature_names() -> Vec<String> {
        let mut names: Vec<String> = CENSUS_NAMES.iter().map(|s| s.to_string()).collect();
        names.extend(LAND_USE_NAMES.iter().map(|s| s.to_string()));
        names.extend(ACCESSIBILITY_NAMES.iter().map(|s| s.to_string()));
        names.extend(FLOOD_ZONE_NAMES.iter().map(|s| s.to_string()));
        names
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = self.census.to_vec();
        v.extend_from_slice(&self.land_use);
        v.extend_from_slice(&self.accessibility);
        v.extend_from_slice(&self.flood_zone);
        v
    }
}

/// One day of system-wide environmental conditions.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnvRecord {
    pub date: NaiveDate,
    pub weather: [f64; 5],
    pub hazard: [bool; 4],
    pub stay_at_home: bool,
    pub holiday: bool,
    /// Aggregate system visitation on the previous day.
    pub total_visits_prev: f64,
}

impl EnvRecord {
    pub fn feature_names(include_visit_lag: bool) -> Vec<String> {
        let mut names: Vec<String> = WEATHER_NAMES.iter().map(|s| s.to_string()).collect();
        names.extend(HAZARD_NAMES.iter().map(|s| s.to_string()));
        names.push("stay_at_home".into());
        names.push("holiday".into());
        if include_visit_lag {
            names.push("total_visits_prev".into());
        }
        names
    }

    pub fn to_vec(&self, include_visit_lag: bool) -> Vec<f64> {
        let mut v = self.weather.to_vec();
        v.extend(self.hazard.iter().map(|&b| if b { 1.0 } else { 0.0 }));
        v.push(if self.stay_at_home { 1.0 } else { 0.0 });
        v.push(if self.holiday { 1.0 } else { 0.0 });
        if include_visit_lag {
            v.push(self.total_visits_prev);
        }
        v
    }

    /// Raw env matrix for a contiguous, gap-free run of records.
    pub fn matrix(records: &[EnvRecord], include_visit_lag: bool) -> Result<crate::Tensor, DomainError> {
        if records.is_empty() {
            return Err(DomainError::Invalid {
                what: "env records",
                detail: "empty".into(),
            });
        }
        for w in records.windows(2) {
            if w[1].date != w[0].date.succ_opt().expect("date overflow") {
                return Err(DomainError::Invalid {
                    what: "env records",
                    detail: format!("dates {} and {} are not contiguous", w[0].date, w[1].date),
                });
            }
        }
        let rows: Vec<Vec<f64>> = records.iter().map(|r| r.to_vec(include_visit_lag)).collect();
        crate::Tensor::from_rows(&rows).map_err(|e| DomainError::Invalid {
            what: "env records",
            detail: e.to_string(),
        })
    }
}
