//! Subcommand implementations.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use clap::Args;
use purc_core::baselines::{self, BaselineKind};
use purc_core::estimation::{self, CovKind, EmpiricalFlow, SelectionPolicy};
use purc_core::network::assemble_features;
use purc_core::preprocess::{self, TrimDirection};
use purc_core::simulate::{self, SimulationPlan};
use purc_core::solver::{solve_flow, SolverOptions};
use purc_core::validation;
use purc_core::{
    trip, CoreError, DemandSpec, FeatureMatrix, Network, Perturbation, Result, Trip,
};
use rayon::prelude::*;
use serde::Deserialize;

use crate::config::{parse_float_list, parse_od, ModelConfig, PlanConfig};
use crate::output::{
    ensure_out_dir, read_flows_csv, write_flows_csv, write_json, ManifestBuilder,
};

fn thread_pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CoreError::InvalidArgument(format!("thread pool: {e}")))
}

/// Loads the model config (or falls back to the raw CSV columns) and
/// assembles the feature matrix.
fn resolve_model(
    net: &Network,
    model_path: Option<&PathBuf>,
) -> Result<(ModelConfig, FeatureMatrix)> {
    let config = match model_path {
        Some(path) => ModelConfig::load(path)?,
        None => ModelConfig::raw_columns(net),
    };
    let z = assemble_features(net, &config.features)?;
    Ok((config, z))
}

fn resolve_beta(
    cli_beta: Option<&String>,
    config: &ModelConfig,
    z: &FeatureMatrix,
) -> Result<Vec<f64>> {
    let beta = match (cli_beta, &config.beta) {
        (Some(raw), _) => parse_float_list(raw)?,
        (None, Some(beta)) => beta.clone(),
        (None, None) => {
            return Err(CoreError::InvalidArgument(
                "no parameters given: pass --beta or set `beta` in the model config".into(),
            ))
        }
    };
    if beta.len() != z.n_features() {
        return Err(CoreError::DimensionMismatch {
            what: "beta",
            expected: z.n_features(),
            got: beta.len(),
        });
    }
    Ok(beta)
}

/// Travel time per link in minutes when a `pace` column exists (pace times
/// length), otherwise the link length as a distance proxy.
fn time_per_link(net: &Network) -> Vec<f64> {
    match net.feature_names().iter().position(|n| n == "pace") {
        Some(k) => net
            .links()
            .iter()
            .map(|l| l.features[k] * l.length_km)
            .collect(),
        None => net.lengths(),
    }
}

/// Groups trips by OD in first-appearance order.
fn group_trips(trips: Vec<Trip>) -> Vec<((String, String), Vec<Trip>)> {
    let mut order: Vec<(String, String)> = Vec::new();
    let mut groups: HashMap<(String, String), Vec<Trip>> = HashMap::new();
    for trip in trips {
        let key = (trip.origin.clone(), trip.destination.clone());
        if !groups.contains_key(&key) {
            order.push(key.clone());
        }
        groups.entry(key).or_default().push(trip);
    }
    order
        .into_iter()
        .map(|key| {
            let bucket = groups.remove(&key).expect("grouped");
            (key, bucket)
        })
        .collect()
}

// ---------------------------------------------------------------------------
// solve
// ---------------------------------------------------------------------------

#[derive(Args)]
pub struct SolveArgs {
    #[arg(long)]
    network: PathBuf,
    /// Origin and destination node ids, e.g. `O,D`.
    #[arg(long)]
    od: String,
    /// Model config with features, perturbation, and optional beta.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Comma-separated parameters overriding the model config.
    #[arg(long, allow_hyphen_values = true)]
    beta: Option<String>,
    /// Perturbation override (`modified_entropy` or `quadratic`).
    #[arg(long)]
    perturbation: Option<Perturbation>,
    #[arg(long)]
    out: PathBuf,
}

pub fn run_solve(args: SolveArgs, jobs: usize) -> Result<()> {
    let out = ensure_out_dir(&args.out)?;
    let net = Network::from_csv_path(&args.network)?;
    let (config, z) = resolve_model(&net, args.model.as_ref())?;
    let beta = resolve_beta(args.beta.as_ref(), &config, &z)?;
    let pert = args.perturbation.unwrap_or(config.perturbation);
    let (origin, destination) = parse_od(&args.od)?;
    let demand = DemandSpec::new(&net, &origin, &destination)?;
    let u = z.utilities(&net, &beta)?;

    let sol = solve_flow(&net, &u, &demand, pert, &SolverOptions::default())?;
    write_flows_csv(&out.join("flows.csv"), &net, &sol)?;
    write_json(
        &out.join("solution.json"),
        &serde_json::json!({
            "origin": origin,
            "destination": destination,
            "objective": sol.objective,
            "kkt_residual": sol.kkt_residual,
            "active_links": sol.n_active(),
            "iterations": sol.iterations,
        }),
    )?;

    let mut manifest = ManifestBuilder::new("solve")
        .file(&args.network)
        .arg("od", &args.od)
        .arg("beta", format!("{beta:?}"))
        .arg("perturbation", pert)
        .jobs(jobs);
    if let Some(model) = &args.model {
        manifest = manifest.file(model);
    }
    manifest.write(&out)
}

// ---------------------------------------------------------------------------
// estimate
// ---------------------------------------------------------------------------

#[derive(Args)]
pub struct EstimateArgs {
    #[arg(long)]
    network: PathBuf,
    /// Observed trips as JSON lines.
    #[arg(long)]
    trips: PathBuf,
    #[arg(long)]
    model: Option<PathBuf>,
    /// Perturbation override.
    #[arg(long)]
    perturbation: Option<Perturbation>,
    /// Keep only links with at least this many traversals per OD.
    #[arg(long)]
    min_traversals: Option<u64>,
    /// Cluster the robust covariance by OD instead of HC1.
    #[arg(long)]
    cluster_by_od: bool,
    /// Keep ODs whose trips all used identical links.
    #[arg(long)]
    keep_uniform_ods: bool,
    #[arg(long)]
    out: PathBuf,
}

pub fn run_estimate(args: EstimateArgs, jobs: usize) -> Result<()> {
    let out = ensure_out_dir(&args.out)?;
    let net = Network::from_csv_path(&args.network)?;
    let (config, z) = resolve_model(&net, args.model.as_ref())?;
    let pert = args.perturbation.unwrap_or(config.perturbation);
    let trips = trip::read_trips_path(&args.trips)?;

    let (trips, dropped_ods) = if args.keep_uniform_ods {
        (trips, Vec::new())
    } else {
        preprocess::drop_degenerate_ods(&trips)
    };

    let groups = group_trips(trips);
    let mut flows = Vec::with_capacity(groups.len());
    for ((origin, destination), bucket) in &groups {
        let demand = DemandSpec::new(&net, origin, destination)?;
        flows.push(EmpiricalFlow::from_trips(&net, &demand, bucket)?);
    }

    let policy = match args.min_traversals {
        Some(k) => SelectionPolicy::MinTraversals(k),
        None => SelectionPolicy::Positive,
    };
    let cov = if args.cluster_by_od {
        CovKind::ClusterByOd
    } else {
        CovKind::Hc1
    };

    // Per-OD transformation fans out across the pool; rows are stacked in
    // OD order, so the result is independent of the thread count.
    let pool = thread_pool(jobs)?;
    let per_od: Result<Vec<_>> = pool.install(|| {
        flows
            .par_iter()
            .map(|x| estimation::build_od_rows(&net, &z, x, pert, policy))
            .collect()
    });
    let per_od = per_od?;

    let mut sys = estimation::RegressionSystem {
        feature_names: z.names.clone(),
        rows: Vec::new(),
    };
    let mut diagnostics = Vec::with_capacity(per_od.len());
    for (rows, diag) in per_od {
        sys.rows.extend(rows);
        diagnostics.push(diag);
    }
    let fit = estimation::ols_fit(&sys, cov)?;

    write_json(
        &out.join("fit.json"),
        &serde_json::json!({
            "fit": fit,
            "perturbation": pert,
            "per_od": diagnostics,
            "dropped_uniform_ods": dropped_ods,
        }),
    )?;

    let mut manifest = ManifestBuilder::new("estimate")
        .file(&args.network)
        .file(&args.trips)
        .arg("perturbation", pert)
        .arg("cluster_by_od", args.cluster_by_od)
        .arg("min_traversals", format!("{:?}", args.min_traversals))
        .jobs(jobs);
    if let Some(model) = &args.model {
        manifest = manifest.file(model);
    }
    manifest.write(&out)
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

#[derive(Args)]
pub struct SimulateArgs {
    #[arg(long)]
    network: PathBuf,
    /// Simulation plan (seed, beta, ODs, trips per OD).
    #[arg(long)]
    plan: PathBuf,
    /// Seed override.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

pub fn run_simulate(args: SimulateArgs, jobs: usize) -> Result<()> {
    let out = ensure_out_dir(&args.out)?;
    let net = Network::from_csv_path(&args.network)?;
    let plan_config = PlanConfig::load(&args.plan)?;
    let z = assemble_features(&net, &plan_config.features)?;
    let seed = args.seed.unwrap_or(plan_config.seed);

    let mut ods = Vec::with_capacity(plan_config.od.len());
    for od in &plan_config.od {
        ods.push(DemandSpec::new(&net, &od.origin, &od.destination)?);
    }
    let plan = SimulationPlan {
        ods: ods.clone(),
        trips_per_od: plan_config.trips_per_od,
        beta: plan_config.beta.clone(),
        seed,
    };
    let opts = SolverOptions::default();
    let trips = simulate::simulate_dataset(&net, &z, &plan, plan_config.perturbation, &opts)?;

    let file = File::create(out.join("trips.jsonl"))?;
    trip::write_trips_jsonl(BufWriter::new(file), &trips)?;

    // Per-OD summary of the solved flows underlying the sample.
    let u = z.utilities(&net, &plan.beta)?;
    let mut unique: Vec<DemandSpec> = Vec::new();
    for od in &ods {
        if !unique.contains(od) {
            unique.push(*od);
        }
    }
    let solutions: Result<Vec<_>> = unique
        .iter()
        .map(|od| solve_flow(&net, &u, od, plan_config.perturbation, &opts))
        .collect();
    let stats = simulate::summarize_solution_stats(&net, &solutions?, &time_per_link(&net))?;
    let mut w = BufWriter::new(File::create(out.join("solution_stats.csv"))?);
    writeln!(w, "origin,destination,active_links,expected_time")?;
    for s in &stats {
        writeln!(
            w,
            "{},{},{},{}",
            s.origin, s.destination, s.active_links, s.expected_time
        )?;
    }
    drop(w);

    ManifestBuilder::new("simulate")
        .file(&args.network)
        .file(&args.plan)
        .arg("seed", seed)
        .seed(seed)
        .jobs(jobs)
        .write(&out)
}

// ---------------------------------------------------------------------------
// validate
// ---------------------------------------------------------------------------

#[derive(Deserialize)]
struct FitFile {
    fit: FitFileInner,
}

#[derive(Deserialize)]
struct FitFileInner {
    beta: Vec<f64>,
}

#[derive(Args)]
pub struct ValidateArgs {
    #[arg(long)]
    network: PathBuf,
    #[arg(long)]
    trips: PathBuf,
    /// `fit.json` from `purc estimate`; alternative to --beta.
    #[arg(long)]
    fit: Option<PathBuf>,
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long, allow_hyphen_values = true)]
    beta: Option<String>,
    #[arg(long)]
    perturbation: Option<Perturbation>,
    #[arg(long)]
    out: PathBuf,
}

pub fn run_validate(args: ValidateArgs, jobs: usize) -> Result<()> {
    let out = ensure_out_dir(&args.out)?;
    let net = Network::from_csv_path(&args.network)?;
    let (config, z) = resolve_model(&net, args.model.as_ref())?;
    let pert = args.perturbation.unwrap_or(config.perturbation);
    let trips = trip::read_trips_path(&args.trips)?;

    let beta = match (&args.beta, &args.fit) {
        (Some(raw), _) => parse_float_list(raw)?,
        (None, Some(path)) => {
            let raw = std::fs::read_to_string(path)?;
            let fit: FitFile = serde_json::from_str(&raw).map_err(|e| CoreError::Parse {
                path: path.display().to_string(),
                record: 0,
                message: e.to_string(),
            })?;
            fit.fit.beta
        }
        (None, None) => resolve_beta(None, &config, &z)?,
    };

    let report = validation::validate(&net, &z, &beta, &trips, pert, &SolverOptions::default())?;
    write_json(&out.join("report.json"), &report)?;

    let mut w = BufWriter::new(File::create(out.join("flows_scatter.csv"))?);
    writeln!(w, "link_id,observed,predicted")?;
    for (e, link) in net.links().iter().enumerate() {
        writeln!(w, "{},{},{}", link.id, report.observed[e], report.predicted[e])?;
    }
    drop(w);

    let mut shares = report.outside_utility_shares.clone();
    shares.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut w = BufWriter::new(File::create(out.join("outside_cdf.csv"))?);
    writeln!(w, "outside_share,cumulative_fraction")?;
    for (i, s) in shares.iter().enumerate() {
        writeln!(w, "{},{}", s, (i + 1) as f64 / shares.len() as f64)?;
    }
    drop(w);

    let mut manifest = ManifestBuilder::new("validate")
        .file(&args.network)
        .file(&args.trips)
        .arg("beta", format!("{beta:?}"))
        .arg("perturbation", pert)
        .jobs(jobs);
    if let Some(model) = &args.model {
        manifest = manifest.file(model);
    }
    if let Some(fit) = &args.fit {
        manifest = manifest.file(fit);
    }
    manifest.write(&out)
}

// ---------------------------------------------------------------------------
// trim
// ---------------------------------------------------------------------------

#[derive(Args)]
pub struct TrimArgs {
    #[arg(long)]
    network: PathBuf,
    #[arg(long)]
    trips: PathBuf,
    #[arg(long)]
    n_origins: usize,
    #[arg(long)]
    n_destinations: usize,
    #[arg(long)]
    out: PathBuf,
}

pub fn run_trim(args: TrimArgs, jobs: usize) -> Result<()> {
    let out = ensure_out_dir(&args.out)?;
    let net = Network::from_csv_path(&args.network)?;
    let trips = trip::read_trips_path(&args.trips)?;

    let origins = preprocess::select_trim_nodes(&net, &trips, args.n_origins, TrimDirection::Origin)?;
    let destinations =
        preprocess::select_trim_nodes(&net, &trips, args.n_destinations, TrimDirection::Destination)?;
    let result = preprocess::trim_trips(
        &net,
        &trips,
        &origins.iter().copied().collect(),
        &destinations.iter().copied().collect(),
    )?;

    trip::write_trips_jsonl(BufWriter::new(File::create(out.join("kept.jsonl"))?), &result.kept)?;
    trip::write_trips_jsonl(
        BufWriter::new(File::create(out.join("discarded.jsonl"))?),
        &result.discarded,
    )?;
    write_json(
        &out.join("summary.json"),
        &serde_json::json!({
            "origins": result.origins,
            "destinations": result.destinations,
            "kept": result.kept.len(),
            "discarded": result.discarded_count(),
        }),
    )?;

    ManifestBuilder::new("trim")
        .file(&args.network)
        .file(&args.trips)
        .arg("n_origins", args.n_origins)
        .arg("n_destinations", args.n_destinations)
        .jobs(jobs)
        .write(&out)
}

// ---------------------------------------------------------------------------
// filter
// ---------------------------------------------------------------------------

#[derive(Args)]
pub struct FilterArgs {
    #[arg(long)]
    network: PathBuf,
    #[arg(long)]
    trips: PathBuf,
    /// Screening parameters (comma-separated, aligned with the model
    /// features; a single value with the default pace-only model).
    #[arg(long, allow_hyphen_values = true)]
    screen_beta: String,
    /// Minimum share of trip utility inside the predicted active set.
    #[arg(long, default_value_t = 0.95)]
    threshold: f64,
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    perturbation: Option<Perturbation>,
    #[arg(long)]
    out: PathBuf,
}

pub fn run_filter(args: FilterArgs, jobs: usize) -> Result<()> {
    let out = ensure_out_dir(&args.out)?;
    let net = Network::from_csv_path(&args.network)?;
    let (config, z) = resolve_model(&net, args.model.as_ref())?;
    let pert = args.perturbation.unwrap_or(config.perturbation);
    let trips = trip::read_trips_path(&args.trips)?;
    let screen_beta = parse_float_list(&args.screen_beta)?;

    let result = preprocess::filter_nonsensical(
        &net,
        &z,
        &screen_beta,
        args.threshold,
        pert,
        &trips,
        &SolverOptions::default(),
    )?;

    trip::write_trips_jsonl(BufWriter::new(File::create(out.join("kept.jsonl"))?), &result.kept)?;
    trip::write_trips_jsonl(
        BufWriter::new(File::create(out.join("discarded.jsonl"))?),
        &result.discarded,
    )?;
    let fully_covered = result.coverages.iter().filter(|&&c| c >= 1.0).count();
    write_json(
        &out.join("summary.json"),
        &serde_json::json!({
            "kept": result.kept.len(),
            "discarded": result.discarded.len(),
            "threshold": args.threshold,
            "screen_beta": screen_beta,
            "fully_covered": fully_covered,
        }),
    )?;

    ManifestBuilder::new("filter")
        .file(&args.network)
        .file(&args.trips)
        .arg("screen_beta", &args.screen_beta)
        .arg("threshold", args.threshold)
        .jobs(jobs)
        .write(&out)
}

// ---------------------------------------------------------------------------
// baseline
// ---------------------------------------------------------------------------

#[derive(Args)]
pub struct BaselineArgs {
    /// Baseline family: `mnl` or `psl`.
    #[arg(long)]
    model: String,
    #[arg(long)]
    network: PathBuf,
    #[arg(long)]
    od: String,
    /// Parameters for the link utilities (comma-separated, one per raw
    /// network feature column).
    #[arg(long, allow_hyphen_values = true)]
    beta: String,
    /// Utility coefficient of the logit; ignored when calibrating.
    #[arg(long, default_value_t = 1.0)]
    beta_u: f64,
    /// Path-size coefficient (PSL only); ignored when calibrating.
    #[arg(long, default_value_t = 1.0)]
    beta_ps: f64,
    /// Calibrate the logit parameters against a `link_id,flow` CSV.
    #[arg(long)]
    calibrate_to: Option<PathBuf>,
    #[arg(long, default_value_t = 10_000)]
    max_routes: usize,
    #[arg(long)]
    out: PathBuf,
}

pub fn run_baseline(args: BaselineArgs, jobs: usize) -> Result<()> {
    let out = ensure_out_dir(&args.out)?;
    let net = Network::from_csv_path(&args.network)?;
    let kind = match args.model.as_str() {
        "mnl" => BaselineKind::Mnl,
        "psl" => BaselineKind::Psl,
        other => {
            return Err(CoreError::InvalidArgument(format!(
                "unknown baseline `{other}` (expected `mnl` or `psl`)"
            )))
        }
    };
    let beta = parse_float_list(&args.beta)?;
    let u = net.link_utilities(&beta)?;
    let (origin, destination) = parse_od(&args.od)?;
    let demand = DemandSpec::new(&net, &origin, &destination)?;
    let routes = baselines::enumerate_routes(&net, &u, &demand, args.max_routes)?;

    let (params, sse) = match &args.calibrate_to {
        Some(path) => {
            let target = read_flows_csv(path, &net)?;
            let cal = baselines::calibrate_to_flows(&net, &routes, kind, &target)?;
            (cal.params, Some(cal.sse))
        }
        None => match kind {
            BaselineKind::Mnl => (vec![args.beta_u], None),
            BaselineKind::Psl => (vec![args.beta_u, args.beta_ps], None),
        },
    };
    let choice = match kind {
        BaselineKind::Mnl => baselines::mnl_probabilities(&net, &routes, params[0]),
        BaselineKind::Psl => baselines::psl_probabilities(&net, &routes, params[0], params[1]),
    };

    let mut w = BufWriter::new(File::create(out.join("baseline_flows.csv"))?);
    writeln!(w, "link_id,flow")?;
    for (e, link) in net.links().iter().enumerate() {
        writeln!(w, "{},{}", link.id, choice.link_flows[e])?;
    }
    drop(w);
    write_json(
        &out.join("baseline.json"),
        &serde_json::json!({
            "model": args.model,
            "params": params,
            "routes": routes.len(),
            "calibration_sse": sse,
        }),
    )?;

    let mut manifest = ManifestBuilder::new("baseline")
        .file(&args.network)
        .arg("model", &args.model)
        .arg("od", &args.od)
        .arg("beta", &args.beta)
        .jobs(jobs);
    if let Some(path) = &args.calibrate_to {
        manifest = manifest.file(path);
    }
    manifest.write(&out)
}

// ---------------------------------------------------------------------------
// sweep
// ---------------------------------------------------------------------------

#[derive(Args)]
pub struct SweepArgs {
    #[arg(long)]
    network: PathBuf,
    /// Single OD (`O,D`); alternative to --demand.
    #[arg(long)]
    od: Option<String>,
    /// `origin,destination,trip_count` CSV with the ODs to sweep.
    #[arg(long)]
    demand: Option<PathBuf>,
    /// Grid of scalar parameters, e.g. `-3,-2.5,-2,-1.5,-1,-0.5`.
    #[arg(long, allow_hyphen_values = true)]
    betas: String,
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    perturbation: Option<Perturbation>,
    #[arg(long)]
    out: PathBuf,
}

pub fn run_sweep(args: SweepArgs, jobs: usize) -> Result<()> {
    let out = ensure_out_dir(&args.out)?;
    let net = Network::from_csv_path(&args.network)?;
    let (config, z) = resolve_model(&net, args.model.as_ref())?;
    if z.n_features() != 1 {
        return Err(CoreError::InvalidArgument(
            "sweep requires a single-feature model (one scalar per grid point)".into(),
        ));
    }
    let pert = args.perturbation.unwrap_or(config.perturbation);
    let betas = parse_float_list(&args.betas)?;

    let mut demands: Vec<DemandSpec> = Vec::new();
    if let Some(raw) = &args.od {
        let (o, d) = parse_od(raw)?;
        demands.push(DemandSpec::new(&net, &o, &d)?);
    }
    if let Some(path) = &args.demand {
        for row in purc_core::network::load_demands_csv(path)? {
            demands.push(DemandSpec::new(&net, &row.origin, &row.destination)?);
        }
    }
    if demands.is_empty() {
        return Err(CoreError::InvalidArgument(
            "pass --od or --demand to select ODs".into(),
        ));
    }

    let opts = SolverOptions::default();
    let time = time_per_link(&net);
    let mut summary = BufWriter::new(File::create(out.join("sweep_summary.csv"))?);
    writeln!(
        summary,
        "beta,origin,destination,active_links,expected_time,objective"
    )?;
    let mut flows_out = BufWriter::new(File::create(out.join("sweep_flows.csv"))?);
    writeln!(flows_out, "beta,origin,destination,link_id,flow")?;
    for &beta in &betas {
        let u = z.utilities(&net, &[beta])?;
        for demand in &demands {
            let sol = solve_flow(&net, &u, demand, pert, &opts)?;
            let expected: f64 = sol.flows.iter().zip(&time).map(|(x, t)| x * t).sum();
            let (o, d) = (net.node_id(demand.origin), net.node_id(demand.destination));
            writeln!(
                summary,
                "{},{},{},{},{},{}",
                beta,
                o,
                d,
                sol.n_active(),
                expected,
                sol.objective
            )?;
            for (e, link) in net.links().iter().enumerate() {
                if sol.flows[e] > 0.0 {
                    writeln!(flows_out, "{},{},{},{},{}", beta, o, d, link.id, sol.flows[e])?;
                }
            }
        }
    }
    drop(summary);
    drop(flows_out);

    let mut manifest = ManifestBuilder::new("sweep")
        .file(&args.network)
        .arg("betas", &args.betas)
        .arg("perturbation", pert)
        .jobs(jobs);
    if let Some(raw) = &args.od {
        manifest = manifest.arg("od", raw);
    }
    if let Some(path) = &args.demand {
        manifest = manifest.file(path);
    }
    manifest.write(&out)
}
