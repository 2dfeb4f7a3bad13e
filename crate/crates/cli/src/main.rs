use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use milpenv::bench::{bench_features, bench_overhead, BenchInstance};
use milpenv::engine::SolverParams;
use milpenv::envs::{apply_params, ParamMapping, ParamValue};
use milpenv::features::ObservationKind;
use milpenv::instgen::{Family, GeneratorConfig, GraphModel, Size, FAMILIES};
use milpenv::lp_format::{read_lp_file, write_lp_string};
use milpenv::policies::PolicyKind;
use milpenv::problem::Problem;
use milpenv::rewards::RewardExpr;
use milpenv::rollout::{rollout, EnvKind, EpisodeSummary, RolloutConfig};

/// Instance generation, episode rollouts and benchmarks for the milpenv
/// branch-and-bound environments.
#[derive(Debug, Parser)]
#[command(name = "milpenv", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write generated instances as LP files plus a manifest.
    Generate(GenerateArgs),
    /// Run one episode per instance and write JSON traces.
    Rollout(RolloutArgs),
    /// Compare environment-driven and direct solves.
    BenchOverhead(BenchOverheadArgs),
    /// Time observation extraction.
    BenchFeatures(BenchFeaturesArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Graph {
    ErdosRenyi,
    BarabasiAlbert,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Toggle {
    On,
    Off,
}

/// Family parameters. Unset values come from the size preset.
#[derive(Debug, Args)]
struct FamilyArgs {
    /// set_cover rows.
    #[arg(long)]
    rows: Option<usize>,
    /// set_cover columns.
    #[arg(long)]
    cols: Option<usize>,
    /// set_cover matrix density.
    #[arg(long)]
    density: Option<f64>,
    /// set_cover maximum column cost.
    #[arg(long)]
    max_cost: Option<u32>,
    /// comb_auction items.
    #[arg(long)]
    items: Option<usize>,
    /// comb_auction bids.
    #[arg(long)]
    bids: Option<usize>,
    /// comb_auction probability of each extra bundle item.
    #[arg(long)]
    extra_item_prob: Option<f64>,
    /// cap_facility customers.
    #[arg(long)]
    customers: Option<usize>,
    /// cap_facility facilities.
    #[arg(long)]
    facilities: Option<usize>,
    /// cap_facility total capacity over total demand.
    #[arg(long)]
    capacity_ratio: Option<f64>,
    /// indep_set graph nodes.
    #[arg(long)]
    nodes: Option<usize>,
    /// indep_set graph model.
    #[arg(long, value_enum)]
    graph: Option<Graph>,
    /// Edge probability for the Erdos-Renyi model.
    #[arg(long)]
    edge_prob: Option<f64>,
    /// Edges per new node for the Barabasi-Albert model.
    #[arg(long)]
    affinity: Option<usize>,
}

#[derive(Debug, Args)]
struct GenerateArgs {
    /// set_cover, comb_auction, cap_facility or indep_set.
    #[arg(long, value_parser = parse_family_name)]
    family: String,
    #[arg(long, default_value = "default")]
    size: Size,
    #[command(flatten)]
    params: FamilyArgs,
    #[arg(long, default_value_t = 1)]
    count: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct LimitArgs {
    #[arg(long)]
    node_limit: Option<u64>,
    /// Seconds.
    #[arg(long)]
    time_limit: Option<f64>,
    #[arg(long)]
    gap_tol: Option<f64>,
    /// best_bound or dfs.
    #[arg(long)]
    node_selection: Option<String>,
}

#[derive(Debug, Args)]
struct RolloutArgs {
    /// LP files or directories of LP files.
    #[arg(required = true)]
    instances: Vec<PathBuf>,
    #[arg(long, default_value = "branching")]
    env: EnvKind,
    #[arg(long, default_value = "first_candidate")]
    policy: PolicyKind,
    #[arg(long, default_value = "nothing")]
    obs: ObservationKind,
    #[arg(long, value_enum, default_value = "on")]
    cache: Toggle,
    /// Reward expression, e.g. "lp_iterations ^ 2" or "-nnodes".
    #[arg(long, default_value = "lp_iterations", value_parser = parse_reward, allow_hyphen_values = true)]
    reward: RewardExpr,
    #[command(flatten)]
    limits: LimitArgs,
    /// JSON parameter mapping used as the configuring action.
    #[arg(long, default_value = "{}", value_parser = parse_mapping)]
    config: ParamMapping,
    /// Seeds the random policy.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Directory for traces and summary.json. Without it the summary goes to stdout.
    #[arg(long)]
    trace_out: Option<PathBuf>,
    #[arg(long)]
    store_observations: bool,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Debug, Args)]
struct BenchSet {
    /// Comma-separated family names.
    #[arg(long, value_delimiter = ',', default_values_t = FAMILIES.map(String::from), value_parser = parse_family_name)]
    families: Vec<String>,
    /// Instances per family.
    #[arg(long, default_value_t = 13)]
    count: u64,
    #[arg(long, default_value = "small")]
    size: Size,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 100)]
    node_limit: u64,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct BenchOverheadArgs {
    #[command(flatten)]
    set: BenchSet,
    /// Timing repetitions per instance; the fastest is kept.
    #[arg(long, default_value_t = 3)]
    reps: usize,
}

#[derive(Debug, Args)]
struct BenchFeaturesArgs {
    #[command(flatten)]
    set: BenchSet,
    #[arg(long, default_value = "node_bipartite")]
    obs: ObservationKind,
    #[arg(long, value_enum, default_value = "on")]
    cache: Toggle,
}

#[derive(Debug, Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{context}: {source}")]
    Io { context: String, source: std::io::Error },
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    fn runtime(e: impl std::fmt::Display) -> Self {
        CliError::Runtime(e.to_string())
    }

    fn io(context: impl std::fmt::Display, source: std::io::Error) -> Self {
        CliError::Io { context: context.to_string(), source }
    }
}

fn parse_family_name(s: &str) -> Result<String, String> {
    if FAMILIES.contains(&s) {
        Ok(s.to_string())
    } else {
        Err(format!("unknown family '{s}' ({})", FAMILIES.join(", ")))
    }
}

fn parse_reward(s: &str) -> Result<RewardExpr, String> {
    s.parse().map_err(|e: milpenv::rewards::ParseError| e.to_string())
}

fn parse_mapping(s: &str) -> Result<ParamMapping, String> {
    serde_json::from_str(s).map_err(|e| format!("expected a JSON object of parameters: {e}"))
}

fn family_config(name: &str, size: Size, a: &FamilyArgs) -> Result<Family, CliError> {
    let given: Vec<&str> = [
        ("rows", a.rows.is_some()),
        ("cols", a.cols.is_some()),
        ("density", a.density.is_some()),
        ("max-cost", a.max_cost.is_some()),
        ("items", a.items.is_some()),
        ("bids", a.bids.is_some()),
        ("extra-item-prob", a.extra_item_prob.is_some()),
        ("customers", a.customers.is_some()),
        ("facilities", a.facilities.is_some()),
        ("capacity-ratio", a.capacity_ratio.is_some()),
        ("nodes", a.nodes.is_some()),
        ("graph", a.graph.is_some()),
        ("edge-prob", a.edge_prob.is_some()),
        ("affinity", a.affinity.is_some()),
    ]
    .into_iter()
    .filter_map(|(flag, set)| set.then_some(flag))
    .collect();
    let mut family = Family::preset(name, size).expect("family names are validated by the parser");
    let own: &[&str] = match &mut family {
        Family::SetCover(p) => {
            p.rows = a.rows.unwrap_or(p.rows);
            p.cols = a.cols.unwrap_or(p.cols);
            p.density = a.density.unwrap_or(p.density);
            p.max_cost = a.max_cost.unwrap_or(p.max_cost);
            &["rows", "cols", "density", "max-cost"]
        }
        Family::CombAuction(p) => {
            p.items = a.items.unwrap_or(p.items);
            p.bids = a.bids.unwrap_or(p.bids);
            p.extra_item_prob = a.extra_item_prob.unwrap_or(p.extra_item_prob);
            &["items", "bids", "extra-item-prob"]
        }
        Family::CapFacility(p) => {
            p.customers = a.customers.unwrap_or(p.customers);
            p.facilities = a.facilities.unwrap_or(p.facilities);
            p.capacity_ratio = a.capacity_ratio.unwrap_or(p.capacity_ratio);
            &["customers", "facilities", "capacity-ratio"]
        }
        Family::IndepSet(p) => {
            p.nodes = a.nodes.unwrap_or(p.nodes);
            let erdos_renyi = match a.graph {
                Some(g) => matches!(g, Graph::ErdosRenyi),
                None => matches!(p.graph, GraphModel::ErdosRenyi { .. }),
            };
            if erdos_renyi && a.affinity.is_some() {
                return Err(CliError::Usage("--affinity applies to the barabasi-albert graph model".into()));
            }
            if !erdos_renyi && a.edge_prob.is_some() {
                return Err(CliError::Usage("--edge-prob applies to the erdos-renyi graph model".into()));
            }
            p.graph = match (erdos_renyi, &p.graph) {
                (true, GraphModel::ErdosRenyi { edge_prob }) => GraphModel::ErdosRenyi { edge_prob: a.edge_prob.unwrap_or(*edge_prob) },
                (true, _) => GraphModel::ErdosRenyi { edge_prob: a.edge_prob.unwrap_or(0.1) },
                (false, GraphModel::BarabasiAlbert { affinity }) => {
                    GraphModel::BarabasiAlbert { affinity: a.affinity.unwrap_or(*affinity) }
                }
                (false, _) => GraphModel::BarabasiAlbert { affinity: a.affinity.unwrap_or(4) },
            };
            &["nodes", "graph", "edge-prob", "affinity"]
        }
    };
    if let Some(flag) = given.iter().find(|f| !own.contains(f)) {
        return Err(CliError::Usage(format!("--{flag} does not apply to {name}")));
    }
    family.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(family)
}

fn write_file(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| CliError::io(path.display(), e))
}

fn to_json<T: Serialize>(v: &T) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(v).expect("reports serialize to JSON");
    out.push(b'\n');
    out
}

#[derive(Serialize)]
struct ManifestEntry {
    file: String,
    sha256: String,
}

#[derive(Serialize)]
struct Manifest {
    config: GeneratorConfig,
    count: u64,
    instances: Vec<ManifestEntry>,
}

fn cmd_generate(a: GenerateArgs) -> Result<(), CliError> {
    let family = family_config(&a.family, a.size, &a.params)?;
    let config = GeneratorConfig::new(family, a.seed);
    fs::create_dir_all(&a.out).map_err(|e| CliError::io(a.out.display(), e))?;
    let mut instances = Vec::new();
    for k in 0..a.count {
        let problem = config.generate(k).map_err(|e| CliError::Usage(e.to_string()))?;
        let text = write_lp_string(&problem).map_err(CliError::runtime)?;
        let file = format!("{}.lp", config.instance_name(k));
        write_file(&a.out.join(&file), text.as_bytes())?;
        instances.push(ManifestEntry { file, sha256: sha256_hex(text.as_bytes()) });
    }
    let manifest = Manifest { config, count: a.count, instances };
    write_file(&a.out.join("manifest.json"), &to_json(&manifest))
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn solver_params(l: &LimitArgs) -> Result<SolverParams, CliError> {
    let mut m = ParamMapping::new();
    if let Some(v) = l.node_limit {
        m.insert("node_limit".into(), ParamValue::Int(v.min(i64::MAX as u64) as i64));
    }
    if let Some(v) = l.time_limit {
        m.insert("time_limit".into(), ParamValue::Float(v));
    }
    if let Some(v) = l.gap_tol {
        m.insert("gap_tol".into(), ParamValue::Float(v));
    }
    if let Some(v) = &l.node_selection {
        m.insert("node_selection".into(), ParamValue::Text(v.clone()));
    }
    apply_params(&SolverParams::default(), &m).map_err(|e| CliError::Usage(e.to_string()))
}

fn expand_instances(paths: &[PathBuf]) -> Result<Vec<PathBuf>, CliError> {
    let mut files = Vec::new();
    for p in paths {
        if p.is_dir() {
            let mut inside: Vec<PathBuf> = fs::read_dir(p)
                .map_err(|e| CliError::io(p.display(), e))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.extension().is_some_and(|x| x == "lp"))
                .collect();
            inside.sort();
            files.extend(inside);
        } else {
            files.push(p.clone());
        }
    }
    if files.is_empty() {
        return Err(CliError::Usage("no .lp instances found".into()));
    }
    Ok(files)
}

fn load(path: &Path) -> Result<Problem, CliError> {
    read_lp_file(path).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}

#[derive(Serialize)]
struct RolloutSummary {
    env: EnvKind,
    policy: Option<PolicyKind>,
    observation_function: ObservationKind,
    reward_expr: String,
    concurrent: bool,
    episodes: Vec<EpisodeSummary>,
}

fn cmd_rollout(a: RolloutArgs) -> Result<(), CliError> {
    let params = solver_params(&a.limits)?;
    apply_params(&params, &a.config).map_err(|e| CliError::Usage(format!("--config: {e}")))?;
    let cfg = RolloutConfig {
        env: a.env,
        policy: a.policy,
        observation: a.obs,
        cache: matches!(a.cache, Toggle::On),
        reward: a.reward.clone(),
        params,
        configuring_action: a.config.clone(),
        seed: a.seed,
        store_observations: a.store_observations,
    };
    let files = expand_instances(&a.instances)?;
    if let Some(dir) = &a.trace_out {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir.display(), e))?;
    }
    let run = |path: &PathBuf| -> Result<EpisodeSummary, CliError> {
        let problem = Arc::new(load(path)?);
        let (record, summary) = rollout(problem, &cfg).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
        if let Some(dir) = &a.trace_out {
            write_file(&dir.join(format!("{}.json", record.instance)), &to_json(&record))?;
        }
        Ok(summary)
    };
    let episodes: Vec<EpisodeSummary> = if a.jobs > 1 {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(a.jobs).build().map_err(CliError::runtime)?;
        pool.install(|| files.par_iter().map(run).collect::<Result<_, _>>())?
    } else {
        files.iter().map(run).collect::<Result<_, _>>()?
    };
    let summary = RolloutSummary {
        env: a.env,
        policy: (a.env == EnvKind::Branching).then_some(a.policy),
        observation_function: a.obs,
        reward_expr: a.reward.to_string(),
        concurrent: a.jobs > 1,
        episodes,
    };
    match &a.trace_out {
        Some(dir) => write_file(&dir.join("summary.json"), &to_json(&summary)),
        None => emit(None, &summary),
    }
}

fn bench_instances(s: &BenchSet) -> Result<Vec<BenchInstance>, CliError> {
    let mut out = Vec::new();
    for name in &s.families {
        let family = Family::preset(name, s.size).expect("family names are validated by the parser");
        let config = GeneratorConfig::new(family, s.seed);
        for k in 0..s.count {
            let problem = config.generate(k).map_err(|e| CliError::Usage(e.to_string()))?;
            out.push(BenchInstance { family: name.clone(), problem: Arc::new(problem) });
        }
    }
    Ok(out)
}

fn emit<T: Serialize>(out: Option<&PathBuf>, report: &T) -> Result<(), CliError> {
    match out {
        Some(path) => write_file(path, &to_json(report)),
        None => std::io::stdout().write_all(&to_json(report)).map_err(|e| CliError::io("stdout", e)),
    }
}

fn cmd_bench_overhead(a: BenchOverheadArgs) -> Result<(), CliError> {
    let instances = bench_instances(&a.set)?;
    let report = bench_overhead(&instances, a.set.node_limit, a.reps, a.set.jobs).map_err(CliError::runtime)?;
    eprintln!(
        "{} instances, nodes equal: {}, objectives equal: {}, mean ratio {:.4} (sd {:.4}, p {:.3})",
        report.rows.len(),
        report.all_nodes_equal,
        report.all_objectives_equal,
        report.ratio_test.mean,
        report.ratio_test.sd,
        report.ratio_test.p_value,
    );
    emit(a.set.out.as_ref(), &report)
}

fn cmd_bench_features(a: BenchFeaturesArgs) -> Result<(), CliError> {
    let instances = bench_instances(&a.set)?;
    let cache = matches!(a.cache, Toggle::On);
    let report = bench_features(&instances, a.obs, cache, a.set.node_limit, a.set.jobs).map_err(CliError::runtime)?;
    let per_family: BTreeMap<_, _> = report.families.iter().map(|f| (f.family.as_str(), (f.mean, f.sd))).collect();
    for (family, (mean, sd)) in per_family {
        eprintln!("{family:<14} {:>10.3} ms +- {:.3}", mean * 1e3, sd * 1e3);
    }
    emit(a.set.out.as_ref(), &report)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate(a) => cmd_generate(a),
        Command::Rollout(a) => cmd_rollout(a),
        Command::BenchOverhead(a) => cmd_bench_overhead(a),
        Command::BenchFeatures(a) => cmd_bench_features(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if matches!(e, CliError::Usage(_)) { 2 } else { 1 })
        }
    }
}
