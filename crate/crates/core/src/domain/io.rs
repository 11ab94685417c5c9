//! CSV and JSON formats for domain data.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::{
    CityGraph, ColumnStats, DomainError, EnvRecord, FlowEntry, FlowTable, NeighborhoodFeatures,
    PcaBasis, Poi,
};

pub fn read_pois_csv(path: &Path) -> Result<Vec<Poi>, DomainError> {
    let mut rdr = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for rec in rdr.deserialize::<Poi>() {
        let poi = rec?;
        poi.validate()?;
        out.push(poi);
    }
    let mut ids = std::collections::HashSet::new();
    for p in &out {
        if !ids.insert(&p.id) {
            return Err(DomainError::Invalid {
                what: "pois.csv",
                detail: format!("duplicate poi id {}", p.id),
            });
        }
    }
    Ok(out)
}

pub fn write_pois_csv(path: &Path, pois: &[Poi]) -> Result<(), DomainError> {
    let mut w = csv::Writer::from_path(path)?;
    for p in pois {
        w.serialize(p)?;
    }
    w.flush()?;
    Ok(())
}

/// One row of neighborhoods.csv: a tract id plus the feature columns.
pub fn read_neighborhoods_csv(path: &Path) -> Result<(Vec<String>, Vec<NeighborhoodFeatures>), DomainError> {
    let mut rdr = csv::Reader::from_path(path)?;
    let expected: Vec<String> = {
        let mut h = vec!["id".to_string()];
        h.extend(NeighborhoodFeatures::feature_names());
        h
    };
    let header: Vec<String> = rdr.headers()?.iter().map(|s| s.to_string()).collect();
    if header != expected {
        return Err(DomainError::Invalid {
            what: "neighborhoods.csv",
            detail: format!("header {header:?} does not match expected {expected:?}"),
        });
    }
    let mut ids = Vec::new();
    let mut feats = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        ids.push(rec[0].to_string());
        let vals: Vec<f64> = rec
            .iter()
            .skip(1)
            .map(|s| s.parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| DomainError::Invalid {
                what: "neighborhoods.csv",
                detail: e.to_string(),
            })?;
        if vals.len() != 21 {
            return Err(DomainError::Invalid {
                what: "neighborhoods.csv",
                detail: format!("row has {} feature values, expected 21", vals.len()),
            });
        }
        feats.push(NeighborhoodFeatures {
            census: vals[0..7].try_into().expect("7 census values"),
            land_use: vals[7..15].try_into().expect("8 land-use values"),
            accessibility: vals[15..18].try_into().expect("3 accessibility values"),
            flood_zone: vals[18..21].try_into().expect("3 flood-zone values"),
        });
    }
    Ok((ids, feats))
}

pub fn write_neighborhoods_csv(
    path: &Path,
    ids: &[String],
    feats: &[NeighborhoodFeatures],
) -> Result<(), DomainError> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["id".to_string()];
    header.extend(NeighborhoodFeatures::feature_names());
    w.write_record(&header)?;
    for (id, f) in ids.iter().zip(feats) {
        let mut row = vec![id.clone()];
        row.extend(f.to_vec().iter().map(|v| format_float(*v)));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
struct EnvRow {
    date: NaiveDate,
    avg_temp: f64,
    avg_wind: f64,
    fastest_2min_wind: f64,
    multiday_precip_days: f64,
    precip_intensity: f64,
    hz_coastal_flood: u8,
    hz_flood: u8,
    hz_others: u8,
    hz_storm: u8,
    stay_at_home: u8,
    holiday: u8,
    total_visits_prev: f64,
}

pub fn read_env_csv(path: &Path) -> Result<Vec<EnvRecord>, DomainError> {
    let mut rdr = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for rec in rdr.deserialize::<EnvRow>() {
        let r = rec?;
        out.push(EnvRecord {
            date: r.date,
            weather: [
                r.avg_temp,
                r.avg_wind,
                r.fastest_2min_wind,
                r.multiday_precip_days,
                r.precip_intensity,
            ],
            hazard: [
                r.hz_coastal_flood != 0,
                r.hz_flood != 0,
                r.hz_others != 0,
                r.hz_storm != 0,
            ],
            stay_at_home: r.stay_at_home != 0,
            holiday: r.holiday != 0,
            total_visits_prev: r.total_visits_prev,
        });
    }
    Ok(out)
}

pub fn write_env_csv(path: &Path, records: &[EnvRecord]) -> Result<(), DomainError> {
    let mut w = csv::Writer::from_path(path)?;
    for r in records {
        w.serialize(EnvRow {
            date: r.date,
            avg_temp: r.weather[0],
            avg_wind: r.weather[1],
            fastest_2min_wind: r.weather[2],
            multiday_precip_days: r.weather[3],
            precip_intensity: r.weather[4],
            hz_coastal_flood: r.hazard[0] as u8,
            hz_flood: r.hazard[1] as u8,
            hz_others: r.hazard[2] as u8,
            hz_storm: r.hazard[3] as u8,
            stay_at_home: r.stay_at_home as u8,
            holiday: r.holiday as u8,
            total_visits_prev: r.total_visits_prev,
        })?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
struct FlowRow {
    date: NaiveDate,
    neighborhood_id: String,
    cluster_id: String,
    count: u64,
}

/// Reads flows.csv, resolving string ids against the graph's axes.
pub fn read_flows_csv(path: &Path, graph: &CityGraph) -> Result<FlowTable, DomainError> {
    let mut rdr = csv::Reader::from_path(path)?;
    let mut entries = Vec::new();
    for rec in rdr.deserialize::<FlowRow>() {
        let r = rec?;
        let neighborhood = graph
            .neighborhood_ids
            .iter()
            .position(|id| *id == r.neighborhood_id)
            .ok_or_else(|| DomainError::Invalid {
                what: "flows.csv",
                detail: format!("unknown neighborhood id {}", r.neighborhood_id),
            })?;
        let cluster = graph
            .cluster_ids
            .iter()
            .position(|id| *id == r.cluster_id)
            .ok_or_else(|| DomainError::Invalid {
                what: "flows.csv",
                detail: format!("unknown cluster id {}", r.cluster_id),
            })?;
        entries.push(FlowEntry {
            date: r.date,
            neighborhood,
            cluster,
            count: r.count,
        });
    }
    FlowTable::new(entries)
}

pub fn write_flows_csv(path: &Path, flows: &FlowTable, graph: &CityGraph) -> Result<(), DomainError> {
    let mut w = csv::Writer::from_path(path)?;
    for e in flows.entries() {
        w.serialize(FlowRow {
            date: e.date,
            neighborhood_id: graph.neighborhood_ids[e.neighborhood].clone(),
            cluster_id: graph.cluster_ids[e.cluster].clone(),
            count: e.count,
        })?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_city_json(path: &Path) -> Result<CityGraph, DomainError> {
    let f = File::open(path)?;
    let graph: CityGraph = serde_json::from_reader(BufReader::new(f))?;
    graph.validate()?;
    Ok(graph)
}

pub fn write_city_json(path: &Path, graph: &CityGraph) -> Result<(), DomainError> {
    write_json(path, graph)
}

pub fn read_column_stats_json(path: &Path) -> Result<ColumnStats, DomainError> {
    let f = File::open(path)?;
    Ok(serde_json::from_reader(BufReader::new(f))?)
}

pub fn write_column_stats_json(path: &Path, stats: &ColumnStats) -> Result<(), DomainError> {
    write_json(path, stats)
}

pub fn read_pca_basis_json(path: &Path) -> Result<PcaBasis, DomainError> {
    let f = File::open(path)?;
    Ok(serde_json::from_reader(BufReader::new(f))?)
}

pub fn write_pca_basis_json(path: &Path, basis: &PcaBasis) -> Result<(), DomainError> {
    write_json(path, basis)
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), DomainError> {
    let f = File::create(path)?;
    let mut w = BufWriter::new(f);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

/// Fixed float formatting for CSV output (shortest round-trip form).
fn format_float(v: f64) -> String {
    let mut buf = ryu_format(v);
    if buf.ends_with(".0") {
        buf.truncate(buf.len() - 2);
    }
    buf
}

fn ryu_format(v: f64) -> String {
    // serde/csv both use shortest round-trip formatting; match it
    format!("{v}")
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    #[test]
    fn pois_round_trip_and_duplicate_rejection() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("pois.csv");
        let pois = vec![
            Poi { id: "a".into(), x: 0.0, y: 1.0, naics: "445110".into(), is_chain: true },
            Poi { id: "b".into(), x: 100.0, y: 50.0, naics: "722511".into(), is_chain: false },
        ];
        write_pois_csv(&path, &pois).unwrap();
        let back = read_pois_csv(&path).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back[1].naics, "722511");

        let mut dup = pois.clone();
        dup[1].id = "a".into();
        write_pois_csv(&path, &dup).unwrap();
        assert!(read_pois_csv(&path).is_err());
    }

    #[test]
    fn bad_naics_rejected() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("pois.csv");
        std::fs::write(&path, "id,x,y,naics,is_chain\np1,0,0,44x110,true\n").unwrap();
        assert!(read_pois_csv(&path).is_err());
    }

    #[test]
    fn env_round_trip() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("env.csv");
        let rec = EnvRecord {
            date: NaiveDate::from_ymd_opt(2019, 9, 3).unwrap(),
            weather: [28.0, 12.0, 30.0, 2.0, 14.5],
            hazard: [true, false, false, true],
            stay_at_home: false,
            holiday: false,
            total_visits_prev: 1234.0,
        };
        write_env_csv(&path, &[rec.clone()]).unwrap();
        let back = read_env_csv(&path).unwrap();
        assert_eq!(back[0].date, rec.date);
        assert_eq!(back[0].hazard, rec.hazard);
        assert_eq!(back[0].weather, rec.weather);
    }

    #[test]
    fn neighborhoods_header_is_strict() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("neighborhoods.csv");
        std::fs::write(&path, "id,wrong\nn1,1.0\n").unwrap();
        let err = read_neighborhoods_csv(&path).unwrap_err();
        assert!(err.to_string().contains("header"));
    }
}
