use std::fs;
use std::path::{Path, PathBuf};

use coopoffload_core::netgraph::{read_trace_csv, IngestOptions};
use coopoffload_core::oracle::OracleConfig;
use coopoffload_core::scenarios::{hot_direct_instance, two_relay_instance};
use coopoffload_core::seed::derive_seed;
use coopoffload_core::simulator::{
    generate_tasks, simulate_distributed_logged, validate_path, write_event_log_csv,
    write_results_csv, write_summary_csv, write_validation_csv, SimOptions,
};
use coopoffload_core::{
    brute_force_optimal, generate_synthetic, ingest_trace, plan_offload, simulate_strategy_with,
    Error, EstimatorOptions, Network, NodeId, PairContactParams, PathSpec, Result, Strategy,
    SyntheticConfig,
};

use crate::config::{ExperimentConfig, NetworkSource};
use crate::{Command, Method, Scenario};

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::Generate {
            config,
            seed,
            nodes,
            scenario,
            out,
        } => generate(config, seed, nodes, scenario, out),
        Command::Fit {
            trace,
            rate,
            warmup,
            min_contacts,
            out,
        } => fit(&trace, rate, warmup, min_contacts, out),
        Command::Estimate {
            network,
            source,
            size,
            deadline,
            out,
        } => estimate(&network, source, size, deadline, out),
        Command::Plan {
            network,
            source,
            size,
            deadline,
            method,
            granularity,
            out,
        } => plan(&network, source, size, deadline, method, granularity, out),
        Command::Simulate {
            config,
            seed,
            runs,
            out,
        } => simulate(&config, seed, runs, out),
        Command::Validate {
            network,
            route,
            hop,
            sizes,
            deadlines,
            runs,
            seed,
            out,
        } => validate(network, &route, &hop, &sizes, &deadlines, runs, seed, out),
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

/// Write to `out`, or to stdout without one.
fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).map_err(|e| Error::Io(format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn load_network(path: &Path) -> Result<Network> {
    Network::from_json(&read(path)?)
}

fn generate(
    config: Option<PathBuf>,
    seed: Option<u64>,
    nodes: Option<usize>,
    scenario: Option<Scenario>,
    out: Option<PathBuf>,
) -> Result<()> {
    let network = match scenario {
        Some(Scenario::TwoRelay) => {
            let inst = two_relay_instance()?;
            eprintln!(
                "source {} size {} deadline {}",
                inst.source, inst.size, inst.deadline
            );
            inst.network
        }
        Some(Scenario::HotDirect) => hot_direct_instance()?,
        None => {
            let mut cfg: SyntheticConfig = match &config {
                Some(p) => {
                    serde_json::from_str(&read(p)?).map_err(|e| Error::Config(e.to_string()))?
                }
                None => SyntheticConfig::default(),
            };
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(n) = nodes {
                cfg.n = n;
            }
            generate_synthetic(&cfg)?
        }
    };
    emit(out.as_deref(), &network.to_json())
}

fn fit(
    trace: &Path,
    rate: f64,
    warmup: f64,
    min_contacts: usize,
    out: Option<PathBuf>,
) -> Result<()> {
    let file = fs::File::open(trace).map_err(|e| Error::Io(format!("{}: {e}", trace.display())))?;
    let records = read_trace_csv(file)?;
    let opts = IngestOptions {
        min_contacts,
        ..IngestOptions::new(warmup, rate)
    };
    let ingested = ingest_trace(&records, &opts)?;
    eprintln!(
        "kept {} nodes and {} pairs; infrastructure is trace node {}",
        ingested.network.node_count(),
        ingested.network.edge_count(),
        ingested.original_ids[ingested.network.infrastructure().0]
    );
    emit(out.as_deref(), &ingested.network.to_json())
}

fn estimate(
    network: &Path,
    source: usize,
    size: f64,
    deadline: f64,
    out: Option<PathBuf>,
) -> Result<()> {
    let net = load_network(network)?;
    let plan = plan_offload(&net, NodeId(source), size, deadline)?;
    let text = format!(
        "individual {}\ncooperative {}\noffloaded {}\n{}",
        plan.direct_probability,
        plan.joint_probability.max(plan.direct_probability),
        plan.offloaded,
        plan.to_json()
    );
    emit(out.as_deref(), &text)
}

fn plan(
    network: &Path,
    source: usize,
    size: f64,
    deadline: f64,
    method: Method,
    granularity: Option<f64>,
    out: Option<PathBuf>,
) -> Result<()> {
    let net = load_network(network)?;
    let plan = match method {
        Method::Heuristic => {
            if granularity.is_some() {
                return Err(Error::Config(
                    "--granularity applies to the oracle only".into(),
                ));
            }
            plan_offload(&net, NodeId(source), size, deadline)?
        }
        Method::Oracle => {
            let cfg = OracleConfig {
                size_granularity: granularity,
                ..OracleConfig::default()
            };
            brute_force_optimal(&net, NodeId(source), size, deadline, &cfg)?
        }
    };
    emit(out.as_deref(), &plan.to_json())
}

fn experiment_network(source: &NetworkSource) -> Result<Network> {
    match source {
        NetworkSource::Synthetic(cfg) => generate_synthetic(cfg),
        NetworkSource::File(p) => load_network(p),
        NetworkSource::Trace {
            path,
            rate,
            warmup_fraction,
        } => {
            let file =
                fs::File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
            let records = read_trace_csv(file)?;
            Ok(ingest_trace(&records, &IngestOptions::new(*warmup_fraction, *rate))?.network)
        }
    }
}

fn csv_text(write: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<String> {
    let mut buf = Vec::new();
    write(&mut buf)?;
    String::from_utf8(buf).map_err(|e| Error::Format(e.to_string()))
}

fn simulate(
    config: &Path,
    seed: Option<u64>,
    runs: Option<u64>,
    out: Option<PathBuf>,
) -> Result<()> {
    let mut cfg = ExperimentConfig::from_json(&read(config)?)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(r) = runs {
        cfg.runs = r;
    }
    cfg.validate()?;
    let network = experiment_network(&cfg.network)?;

    let mut tasks = Vec::new();
    for run in 0..cfg.runs {
        let offset = tasks.len();
        for mut t in generate_tasks(&network, &cfg.tasks, derive_seed(cfg.seed, run))? {
            t.id += offset;
            tasks.push(t);
        }
    }
    let opts = SimOptions {
        heuristic_shortcuts: cfg.heuristic_shortcuts,
        ..SimOptions::default()
    };
    let mut strategies = cfg.strategies.clone();
    strategies.sort();
    strategies.dedup();
    let results = strategies
        .iter()
        .map(|s| simulate_strategy_with(&network, &tasks, *s, cfg.seed, &opts))
        .collect::<Result<Vec<_>>>()?;

    let results_csv = csv_text(|b| write_results_csv(b, &results))?;
    let summary_csv = csv_text(|b| write_summary_csv(b, &results))?;
    if let Some(dir) = &out {
        fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
    }
    let target = |explicit: &Option<PathBuf>, name: &str| {
        explicit
            .clone()
            .or_else(|| out.as_ref().map(|d| d.join(name)))
    };
    if let Some(p) = target(&cfg.output.results, "results.csv") {
        emit(Some(&p), &results_csv)?;
    }
    match target(&cfg.output.summary, "summary.csv") {
        Some(p) => emit(Some(&p), &summary_csv)?,
        None => emit(None, &summary_csv)?,
    }
    if let Some(p) = &cfg.output.event_log {
        let mut events = Vec::new();
        for t in &tasks {
            events.extend(simulate_distributed_logged(&network, t, cfg.seed, &opts)?.1);
        }
        emit(Some(p), &csv_text(|b| write_event_log_csv(b, &events))?)?;
    }
    for r in &results {
        if !r.sweeps.is_clean() {
            return Err(Error::Contract(format!(
                "{} run violated its invariants: {:?}",
                r.strategy, r.sweeps
            )));
        }
    }
    if strategies.contains(&Strategy::Distributed) || cfg.output.event_log.is_some() {
        eprintln!("protocol invariant sweeps: clean");
    }
    Ok(())
}

fn parse_hop(text: &str) -> Result<PairContactParams> {
    let parts: Vec<f64> = text
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|e| Error::Config(format!("hop '{text}': {e}")))
        })
        .collect::<Result<_>>()?;
    match parts[..] {
        [lambda, alpha, beta, rate] => PairContactParams::new(lambda, alpha, beta, rate),
        _ => Err(Error::Config(format!(
            "hop '{text}' needs lambda,alpha,beta,rate"
        ))),
    }
}

#[allow(clippy::too_many_arguments)]
fn validate(
    network: Option<PathBuf>,
    route: &[usize],
    hops: &[String],
    sizes: &[f64],
    deadlines: &[f64],
    runs: u64,
    seed: u64,
    out: Option<PathBuf>,
) -> Result<()> {
    if runs < 1000 {
        return Err(Error::Config(format!(
            "validation needs at least 1000 runs, got {runs}"
        )));
    }
    let path = match network {
        Some(p) => {
            let net = load_network(&p)?;
            let ids: Vec<NodeId> = route.iter().map(|i| NodeId(*i)).collect();
            let params = net.route_params(&ids).ok_or_else(|| {
                Error::Config(format!("route {route:?} is not a path in the network"))
            })?;
            PathSpec::new(params)?
        }
        None => PathSpec::new(hops.iter().map(|h| parse_hop(h)).collect::<Result<_>>()?)?,
    };
    let points: Vec<(f64, f64)> = sizes
        .iter()
        .flat_map(|s| deadlines.iter().map(move |t| (*s, *t)))
        .collect();
    let rows = validate_path(&path, &points, runs, seed, &EstimatorOptions::default())?;
    let worst = rows.iter().map(|r| r.abs_diff()).fold(0.0, f64::max);
    eprintln!(
        "{} points, max |estimated - simulated| = {worst}",
        rows.len()
    );
    emit(
        out.as_deref(),
        &csv_text(|b| write_validation_csv(b, &rows))?,
    )
}
