//! Subcommand implementations: thin plumbing around the library modules.

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context};
use chrono::NaiveDate;
use clap::Args;
use serde::de::DeserializeOwned;
use serde::Serialize;

use simgat::classic::io::{write_params, ParamsFile};
use simgat::classic::{fit_gravity as classic_fit_gravity, fit_huff as classic_fit_huff};
use simgat::classic::{FitMethod, GravityData, HuffData};
use simgat::clustering::{
    dbscan, featurize_cluster, merge_clusters, sector_count_matrix, ClusterContext, ClusterRecord,
    ClustersFile, DbscanParams, Label, Morphology,
};
use simgat::domain::io::{read_city_json, read_flows_csv, write_city_json, write_env_csv, write_flows_csv};
use simgat::domain::{pca_reduce, CityGraph, FlowTable};
use simgat::simgat::io::{read_model, write_metrics, write_model, Metrics};
use simgat::simgat::{
    check_gradients, describe as describe_model, eval_loss, grid_search, train as train_model,
    Dataset, Dims, GridSpec, SimGatConfig, SimGatModel,
};
use simgat::synthcity::{generate, read_truth, write_truth, ScenarioSpec};
use simgat::transport::io::{read_network, write_costs, write_network};
use simgat::transport::{build_cost_matrices, ModePolicy};
use simgat::xai::{
    attribute_day, group_contrast as xai_group_contrast, scenario_contrast,
    write_attributions_csv, write_summary_json, AttributionReport,
};
use simgat::Tensor;

use crate::manifest::write_manifest;

fn read_json<T: DeserializeOwned>(path: &Path) -> anyhow::Result<T> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn write_json_pretty<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn ensure_out_dir(dir: &Path) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

/// Mean observed counts per (neighborhood, cluster) pair, m×n.
fn mean_flow_matrix(city: &CityGraph, flows: &FlowTable) -> Tensor {
    let (n, m) = (city.n_clusters(), city.n_neighborhoods());
    let mut mean = Tensor::zeros(vec![m, n]);
    for date in &city.dates {
        let dense = flows.dense_for_date(*date, n, m); // n×m
        for i in 0..n {
            for j in 0..m {
                mean.data_mut()[j * n + i] += dense.at2(i, j) / city.dates.len() as f64;
            }
        }
    }
    mean
}

fn model_dims(city: &CityGraph) -> Dims {
    Dims {
        l: city.clusters.shape()[1],
        k: city.neighborhoods.shape()[1],
        s: city.env.shape()[1],
        n_modes: city.costs.len(),
    }
}

fn parse_dates(dates: &[String]) -> anyhow::Result<Vec<NaiveDate>> {
    dates
        .iter()
        .map(|d| d.parse::<NaiveDate>().with_context(|| format!("bad date {d:?}")))
        .collect()
}

// ---------------------------------------------------------------- synth

#[derive(Debug, Args, Serialize)]
pub struct SynthArgs {
    /// Scenario JSON; omitted = the default benchmark scenario
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Output directory
    #[arg(long)]
    pub out: PathBuf,
}

pub fn synth(args: SynthArgs) -> anyhow::Result<()> {
    let started = Instant::now();
    let spec: ScenarioSpec = match &args.spec {
        Some(path) => read_json(path)?,
        None => ScenarioSpec::default(),
    };
    let g = generate(&spec)?;
    ensure_out_dir(&args.out)?;
    write_city_json(&args.out.join("city.json"), &g.city)?;
    write_flows_csv(&args.out.join("flows.csv"), &g.flows, &g.city)?;
    write_env_csv(&args.out.join("env.csv"), &g.env_records)?;
    write_truth(&args.out.join("truth.json"), &g.truth)?;
    write_network(&g.network, &args.out.join("nodes.csv"), &args.out.join("edges.csv"))?;
    let inputs: Vec<&Path> = args.spec.iter().map(|p| p.as_path()).collect();
    write_manifest(&args.out, "synth", &args, &inputs, Some(spec.seed), started)
}

// -------------------------------------------------------------- cluster

#[derive(Debug, Args, Serialize)]
pub struct ClusterArgs {
    /// POI table: id,x,y,naics,is_chain
    #[arg(long)]
    pub pois: PathBuf,
    /// Neighborhood radius in meters
    #[arg(long, default_value_t = 200.0)]
    pub eps: f64,
    /// Density threshold (the point counts itself)
    #[arg(long, default_value_t = 5)]
    pub min_pts: usize,
    /// Optional manual merge list: CSV with header a,b of cluster-id pairs
    #[arg(long)]
    pub merges: Option<PathBuf>,
    /// Variance fraction the reduced sector counts must retain
    #[arg(long, default_value_t = 0.95)]
    pub pca_variance: f64,
    #[arg(long)]
    pub out: PathBuf,
}

fn read_merges(path: &Path) -> anyhow::Result<Vec<(usize, usize)>> {
    let mut rdr = csv::Reader::from_path(path)?;
    let mut pairs = Vec::new();
    for row in rdr.records() {
        let row = row?;
        if row.len() != 2 {
            bail!("merge row {:?} needs exactly two cluster ids", row);
        }
        pairs.push((row[0].trim().parse()?, row[1].trim().parse()?));
    }
    Ok(pairs)
}

pub fn cluster(args: ClusterArgs) -> anyhow::Result<()> {
    let started = Instant::now();
    let pois = simgat::domain::io::read_pois_csv(&args.pois)?;
    let points: Vec<(f64, f64)> = pois.iter().map(|p| (p.x, p.y)).collect();
    let params = DbscanParams { eps: args.eps, min_pts: args.min_pts };
    let mut assignment = dbscan(&points, params)?;
    if let Some(path) = &args.merges {
        assignment = merge_clusters(&assignment, &read_merges(path)?)?;
    }

    // overlay context is not derivable from the POI table alone; absent
    // inputs mean zero land use / transit / flood coverage
    let context = ClusterContext::default();
    let mut records = Vec::new();
    let mut count_maps = Vec::new();
    for (id, members) in assignment.cluster_members.iter().enumerate() {
        let refs: Vec<&simgat::domain::Poi> = members.iter().map(|&i| &pois[i]).collect();
        let (features, counts) = featurize_cluster(&refs, &context, Morphology::Street)?;
        let cx = refs.iter().map(|p| p.x).sum::<f64>() / refs.len() as f64;
        let cy = refs.iter().map(|p| p.y).sum::<f64>() / refs.len() as f64;
        records.push(ClusterRecord {
            id,
            member_poi_ids: refs.iter().map(|p| p.id.clone()).collect(),
            centroid_xy: (cx, cy),
            features,
        });
        count_maps.push(counts);
    }
    if records.len() >= 2 {
        let (_sector_names, counts) = sector_count_matrix(&count_maps);
        let (reduced, _basis) = pca_reduce(&counts, args.pca_variance)?;
        for (row, record) in records.iter_mut().enumerate() {
            record.features.poi_counts_reduced =
                (0..reduced.shape()[1]).map(|c| reduced.at2(row, c)).collect();
        }
    } else {
        // PCA needs cross-cluster variance; a single cluster gets a zero score
        for record in records.iter_mut() {
            record.features.poi_counts_reduced = vec![0.0];
        }
    }
    let noise_poi_ids: Vec<String> = assignment
        .labels
        .iter()
        .enumerate()
        .filter(|(_, l)| matches!(l, Label::Noise))
        .map(|(i, _)| pois[i].id.clone())
        .collect();

    ensure_out_dir(&args.out)?;
    let file = ClustersFile { params, clusters: records, noise_poi_ids };
    write_json_pretty(&args.out.join("clusters.json"), &file)?;
    let mut inputs: Vec<&Path> = vec![args.pois.as_path()];
    inputs.extend(args.merges.iter().map(|p| p.as_path()));
    write_manifest(&args.out, "cluster", &args, &inputs, None, started)
}

// -------------------------------------------------------------- network

#[derive(Debug, Args, Serialize)]
pub struct NetworkArgs {
    /// Node table: id,x,y
    #[arg(long)]
    pub nodes: PathBuf,
    /// Edge table: from,to,length_m,speed_kmh,modes
    #[arg(long)]
    pub edges: PathBuf,
    /// Neighborhood centroids: id,x,y
    #[arg(long)]
    pub neighborhoods: PathBuf,
    /// Cluster centroids: id,x,y
    #[arg(long)]
    pub clusters: PathBuf,
    /// Comma-separated mode policies: drive, walk_transit
    #[arg(long, value_delimiter = ',', default_value = "drive")]
    pub modes: Vec<String>,
    #[arg(long)]
    pub out: PathBuf,
}

fn read_centroids(path: &Path) -> anyhow::Result<Vec<(f64, f64)>> {
    let mut rdr = csv::Reader::from_path(path)?;
    let mut points = Vec::new();
    for row in rdr.records() {
        let row = row?;
        if row.len() != 3 {
            bail!("centroid row {:?} must be id,x,y", row);
        }
        points.push((row[1].trim().parse()?, row[2].trim().parse()?));
    }
    Ok(points)
}

fn parse_policy(name: &str) -> anyhow::Result<ModePolicy> {
    match name {
        "drive" => Ok(ModePolicy::DriveOnly),
        "walk_transit" => Ok(ModePolicy::WalkTransit),
        other => bail!("unknown mode policy {other:?} (expected drive or walk_transit)"),
    }
}

pub fn network(args: NetworkArgs) -> anyhow::Result<()> {
    let started = Instant::now();
    let net = read_network(&args.nodes, &args.edges)?;
    let neighborhoods = read_centroids(&args.neighborhoods)?;
    let clusters = read_centroids(&args.clusters)?;
    let policies: Vec<ModePolicy> =
        args.modes.iter().map(|m| parse_policy(m)).collect::<anyhow::Result<_>>()?;
    let set = build_cost_matrices(&net, &neighborhoods, &clusters, &policies)?;
    ensure_out_dir(&args.out)?;
    write_costs(&set, &args.out.join("costs.json"))?;
    let inputs = [
        args.nodes.as_path(),
        args.edges.as_path(),
        args.neighborhoods.as_path(),
        args.clusters.as_path(),
    ];
    write_manifest(&args.out, "network", &args, &inputs, None, started)
}

// -------------------------------------------------- fit-gravity / fit-huff

#[derive(Debug, Args, Serialize)]
pub struct FitGravityArgs {
    /// Ground truth with masses and the cost matrix
    #[arg(long)]
    pub truth: PathBuf,
    #[arg(long)]
    pub city: PathBuf,
    #[arg(long)]
    pub flows: PathBuf,
    /// poisson or log-ols
    #[arg(long, default_value = "poisson")]
    pub method: String,
    #[arg(long)]
    pub intercept_only: bool,
    #[arg(long)]
    pub out: PathBuf,
}

fn parse_method(name: &str) -> anyhow::Result<FitMethod> {
    match name {
        "poisson" => Ok(FitMethod::Poisson),
        "log-ols" => Ok(FitMethod::LogOls),
        other => bail!("unknown fit method {other:?} (expected poisson or log-ols)"),
    }
}

pub fn fit_gravity(args: FitGravityArgs) -> anyhow::Result<()> {
    let started = Instant::now();
    let city = read_city_json(&args.city)?;
    let flows = read_flows_csv(&args.flows, &city)?;
    let truth = read_truth(&args.truth)?;
    let mean = mean_flow_matrix(&city, &flows);
    let data = GravityData::from_matrices(
        &mean,
        &truth.origin_masses,
        &truth.dest_masses,
        &truth.costs,
    )?;
    let fit = classic_fit_gravity(&data, parse_method(&args.method)?, args.intercept_only)?;
    ensure_out_dir(&args.out)?;
    write_params(&args.out.join("params.json"), &ParamsFile::from(fit))?;
    let inputs = [args.truth.as_path(), args.city.as_path(), args.flows.as_path()];
    write_manifest(&args.out, "fit-gravity", &args, &inputs, None, started)
}

#[derive(Debug, Args, Serialize)]
pub struct FitHuffArgs {
    #[arg(long)]
    pub truth: PathBuf,
    #[arg(long)]
    pub city: PathBuf,
    #[arg(long)]
    pub flows: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn fit_huff(args: FitHuffArgs) -> anyhow::Result<()> {
    let started = Instant::now();
    let city = read_city_json(&args.city)?;
    let flows = read_flows_csv(&args.flows, &city)?;
    let truth = read_truth(&args.truth)?;
    let data = HuffData {
        counts: mean_flow_matrix(&city, &flows),
        attractiveness: truth.dest_masses.clone(),
        costs: truth.costs.clone(),
    };
    let fit = classic_fit_huff(&data)?;
    ensure_out_dir(&args.out)?;
    write_params(&args.out.join("params.json"), &ParamsFile::from(fit))?;
    let inputs = [args.truth.as_path(), args.city.as_path(), args.flows.as_path()];
    write_manifest(&args.out, "fit-huff", &args, &inputs, None, started)
}

// ----------------------------------------------------------- train / grid

#[derive(Debug, Args, Serialize)]
pub struct TrainArgs {
    #[arg(long)]
    pub city: PathBuf,
    #[arg(long)]
    pub flows: PathBuf,
    /// Config JSON; omitted = library defaults
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

fn load_config(path: &Option<PathBuf>) -> anyhow::Result<SimGatConfig> {
    match path {
        Some(p) => read_json(p),
        None => Ok(SimGatConfig::default()),
    }
}

/// Validation losses of the intercept-only, GCN and GraphSAGE baselines on
/// the same split the main model used.
fn baseline_losses(
    city: &CityGraph,
    dataset: &Dataset,
    config: &SimGatConfig,
    report: &simgat::simgat::TrainReport,
) -> anyhow::Result<std::collections::BTreeMap<String, f64>> {
    let all_days = dataset.usable_days(config.lstm_window);
    let train_set: Vec<(usize, Tensor)> = all_days
        .iter()
        .filter(|(d, _)| report.train_days.contains(d))
        .cloned()
        .collect();
    let val_set: Vec<(usize, Tensor)> = all_days
        .iter()
        .filter(|(d, _)| report.val_days.contains(d))
        .cloned()
        .collect();

    let mut losses = std::collections::BTreeMap::new();

    // constant-rate Poisson MLE: the global mean train count
    let cells = (city.n_clusters() * city.n_neighborhoods()) as f64;
    let mean_count = train_set
        .iter()
        .map(|(_, y)| y.data().iter().sum::<f64>() / cells)
        .sum::<f64>()
        / train_set.len() as f64;
    let lam = Tensor::new(
        vec![city.n_clusters(), city.n_neighborhoods()],
        vec![mean_count; city.n_clusters() * city.n_neighborhoods()],
    )?;
    let intercept = val_set
        .iter()
        .map(|(_, y)| simgat::simgat::poisson_loss_value(&lam, y))
        .sum::<f64>()
        / val_set.len() as f64;
    losses.insert("intercept".to_string(), intercept);

    if city.cluster_xy.is_some() {
        let (_, gcn) = simgat::simgat::baseline_gcn(city, &train_set, &val_set, config)?;
        let (_, sage) = simgat::simgat::baseline_graphsage(city, &train_set, &val_set, config)?;
        losses.insert("gcn".to_string(), gcn);
        losses.insert("graph_sage".to_string(), sage);
    }
    Ok(losses)
}

pub fn train(args: TrainArgs) -> anyhow::Result<()> {
    let started = Instant::now();
    let city = read_city_json(&args.city)?;
    let flows = read_flows_csv(&args.flows, &city)?;
    let config = load_config(&args.config)?;
    let model = SimGatModel::new(config, model_dims(&city))?;
    let dataset = Dataset { city: &city, flows: &flows };
    let (best, report) = train_model(&model, &dataset)?;

    let baselines = baseline_losses(&city, &dataset, &config, &report)?;
    let train_loss = report
        .epochs
        .iter()
        .find(|e| e.epoch == report.best_epoch)
        .map(|e| e.train_loss)
        .unwrap_or(f64::NAN);
    let metrics = Metrics {
        train_loss,
        val_loss: report.best_val_loss,
        best_epoch: report.best_epoch,
        n_params: best.n_parameters(),
        baselines,
    };
    ensure_out_dir(&args.out)?;
    write_model(&args.out.join("model.json"), &best, Some(&report))?;
    write_metrics(&args.out.join("metrics.json"), &metrics)?;
    let mut inputs: Vec<&Path> = vec![args.city.as_path(), args.flows.as_path()];
    inputs.extend(args.config.iter().map(|p| p.as_path()));
    write_manifest(&args.out, "train", &args, &inputs, Some(config.seed), started)
}

#[derive(Debug, Args, Serialize)]
pub struct GridArgs {
    #[arg(long)]
    pub city: PathBuf,
    #[arg(long)]
    pub flows: PathBuf,
    /// Grid axes JSON: learning_rates, batch_sizes, hidden_dims
    #[arg(long)]
    pub grid: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn grid(args: GridArgs) -> anyhow::Result<()> {
    let started = Instant::now();
    let city = read_city_json(&args.city)?;
    let flows = read_flows_csv(&args.flows, &city)?;
    let base = load_config(&args.config)?;
    let spec: GridSpec = read_json(&args.grid)?;
    let dataset = Dataset { city: &city, flows: &flows };
    let (winner, report, results) = grid_search(&base, model_dims(&city), &spec, &dataset)?;
    ensure_out_dir(&args.out)?;
    write_model(&args.out.join("model.json"), &winner, Some(&report))?;
    write_json_pretty(&args.out.join("grid_results.json"), &results)?;
    let mut inputs: Vec<&Path> =
        vec![args.city.as_path(), args.flows.as_path(), args.grid.as_path()];
    inputs.extend(args.config.iter().map(|p| p.as_path()));
    write_manifest(&args.out, "grid", &args, &inputs, Some(base.seed), started)
}

// ------------------------------------------------------------------ eval

#[derive(Debug, Args, Serialize)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub city: PathBuf,
    #[arg(long)]
    pub flows: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Serialize)]
struct EvalReport {
    poisson_loss: f64,
    n_days: usize,
    n_params: usize,
}

pub fn eval(args: EvalArgs) -> anyhow::Result<()> {
    let started = Instant::now();
    let (model, _) = read_model(&args.model)?;
    let city = read_city_json(&args.city)?;
    let flows = read_flows_csv(&args.flows, &city)?;
    let dataset = Dataset { city: &city, flows: &flows };
    let days = dataset.usable_days(model.config.lstm_window);
    let loss = eval_loss(&model, &city, &days)?;
    ensure_out_dir(&args.out)?;
    let report = EvalReport { poisson_loss: loss, n_days: days.len(), n_params: model.n_parameters() };
    write_json_pretty(&args.out.join("eval.json"), &report)?;
    let inputs = [args.model.as_path(), args.city.as_path(), args.flows.as_path()];
    write_manifest(&args.out, "eval", &args, &inputs, None, started)
}

// ------------------------------------------------------------- attribute

#[derive(Debug, Args, Serialize)]
pub struct AttributeArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub city: PathBuf,
    /// Comma-separated dates (YYYY-MM-DD) to attribute
    #[arg(long, value_delimiter = ',', required = true)]
    pub dates: Vec<String>,
    /// Neighborhood attribute for a top-k vs bottom-k contrast
    #[arg(long)]
    pub group_by: Option<String>,
    /// Group size for --group-by
    #[arg(long, default_value_t = 3)]
    pub k: usize,
    /// Pin softmax nodes at their reference values
    #[arg(long)]
    pub frozen_softmax: bool,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn attribute(args: AttributeArgs) -> anyhow::Result<()> {
    let started = Instant::now();
    let (model, _) = read_model(&args.model)?;
    let city = read_city_json(&args.city)?;
    let dates = parse_dates(&args.dates)?;

    let mut merged: Option<AttributionReport> = None;
    for date in &dates {
        let day = city
            .date_index(*date)
            .with_context(|| format!("no environment record for {date}"))?;
        let report = attribute_day(&model, &city, day, args.frozen_softmax)?;
        match &mut merged {
            Some(m) => m.attributions.extend(report.attributions),
            None => merged = Some(report),
        }
    }
    let merged = merged.expect("at least one date");

    ensure_out_dir(&args.out)?;
    write_attributions_csv(&args.out.join("attributions.csv"), &city, &merged)?;
    match &args.group_by {
        Some(attr) => {
            if dates.len() != 1 {
                bail!("--group-by needs exactly one date, got {}", dates.len());
            }
            let contrast =
                xai_group_contrast(&model, &city, dates[0], attr, args.k, args.frozen_softmax)?;
            write_summary_json(&args.out.join("summaries.json"), &contrast)?;
        }
        None => {
            let labelled: Vec<(String, NaiveDate)> =
                dates.iter().map(|d| (d.to_string(), *d)).collect();
            let contrast = scenario_contrast(&model, &city, &labelled, args.frozen_softmax)?;
            write_summary_json(&args.out.join("summaries.json"), &contrast)?;
        }
    }
    let inputs = [args.model.as_path(), args.city.as_path()];
    write_manifest(&args.out, "attribute", &args, &inputs, None, started)
}

// ------------------------------------------------------------- gradcheck

#[derive(Debug, Args, Serialize)]
pub struct GradcheckArgs {
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn gradcheck(args: GradcheckArgs) -> anyhow::Result<()> {
    let started = Instant::now();
    let spec = ScenarioSpec {
        seed: args.seed,
        n_clusters: 4,
        m_neighborhoods: 6,
        days: 14,
        hazard_days: vec![9],
        lockdown_days: vec![11, 12],
        ..ScenarioSpec::default()
    };
    let g = generate(&spec)?;
    let config = SimGatConfig { seed: args.seed, ..SimGatConfig::default() };
    let model = SimGatModel::new(config, model_dims(&g.city))?;
    let dataset = Dataset { city: &g.city, flows: &g.flows };
    let days = dataset.usable_days(config.lstm_window);
    let report = check_gradients(&model, &g.city, &days, 1e-5, 1e-4)?;

    ensure_out_dir(&args.out)?;
    write_json_pretty(&args.out.join("gradcheck.json"), &report)?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    write_manifest(&args.out, "gradcheck", &args, &[], Some(args.seed), started)?;
    if !report.pass {
        bail!("gradient check failed: max relative error {}", report.max_rel_err);
    }
    Ok(())
}

// -------------------------------------------------------------- describe

#[derive(Debug, Args, Serialize)]
pub struct DescribeArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn describe(args: DescribeArgs) -> anyhow::Result<()> {
    let started = Instant::now();
    let (model, _) = read_model(&args.model)?;
    let inventory = describe_model(&model);
    ensure_out_dir(&args.out)?;
    write_json_pretty(&args.out.join("inventory.json"), &inventory)?;
    println!("{}", serde_json::to_string_pretty(&inventory)?);
    write_manifest(&args.out, "describe", &args, &[args.model.as_path()], None, started)
}
