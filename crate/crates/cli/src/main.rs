//! Command line driver for circuit analysis, placement, scheduling traces
//! and full experiments.
//!
//! Exit codes: 0 success, 2 configuration error, 3 infeasible workload,
//! 4 internal invariant violation.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use log::info;
use qcloud::analysis::{circuit_depth, AnalyzedCircuit, MetricTerms};
use qcloud::baselines::place;
use qcloud::cloud::{CloudTopology, TopologyParams};
use qcloud::experiment::{
    bench_means, bench_placement, compare_with_dir, load_entry, load_manifest, replay, run_experiment, write_bundle,
    ExperimentConfig, MethodSpec, ReportError,
};
use qcloud::placement::{verify_placement, BatchOrder, PlacementMethod};
use qcloud::qasm::{generate_circuit, Family, GenParams};
use qcloud::scheduler::{build_remote_dag, Policy};
use qcloud::sim::{self, verify_trace, MultihopModel, SimConfig, SimError};
use qcloud::workload::Mix;
use serde_json::json;

#[derive(Debug)]
enum Failure {
    Config(String),
    Infeasible(String),
    Invariant(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Infeasible(_) => 3,
            Failure::Invariant(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Config(m) | Failure::Infeasible(m) | Failure::Invariant(m) => m,
        }
    }
}

impl From<SimError> for Failure {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Infeasible(_) | SimError::DeadlockDetected { .. } => Failure::Infeasible(e.to_string()),
            SimError::Invariant(_) => Failure::Invariant(e.to_string()),
            SimError::BadConfig(_) | SimError::EmptyRun => Failure::Config(e.to_string()),
        }
    }
}

impl From<ReportError> for Failure {
    fn from(e: ReportError) -> Self {
        match e {
            ReportError::ReplayMismatch(_) => Failure::Invariant(e.to_string()),
            _ => Failure::Config(e.to_string()),
        }
    }
}

type Res<T> = Result<T, Failure>;

fn config<E: std::fmt::Display>(e: E) -> Failure {
    Failure::Config(e.to_string())
}

#[derive(Parser)]
#[command(name = "qcloud", version, about = "Multi-tenant quantum circuit placement and EPR scheduling simulator")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Gate counts, depth, DAG and interaction-graph statistics.
    Analyze {
        #[command(flatten)]
        circuit: CircuitArgs,
    },
    /// k-way balanced partition of the interaction graph.
    Partition {
        #[command(flatten)]
        circuit: CircuitArgs,
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = 0.1)]
        alpha: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Places one circuit on an idle cloud.
    Place {
        #[command(flatten)]
        circuit: CircuitArgs,
        #[command(flatten)]
        topo: TopoArgs,
        #[arg(long, default_value = "cloudqc")]
        method: PlacementMethod,
        #[arg(long, default_value_t = 0.3)]
        p_epr: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Simulates jobs on one topology and checks the execution trace.
    Schedule {
        /// Benchmark names or .qasm paths.
        #[arg(required = true)]
        circuits: Vec<String>,
        #[command(flatten)]
        topo: TopoArgs,
        #[arg(long, default_value = "cloudqc")]
        policy: Policy,
        #[arg(long, default_value = "cloudqc")]
        method: PlacementMethod,
        #[arg(long, default_value = "descending")]
        batching: BatchOrder,
        #[arg(long, default_value = "serial")]
        multihop: MultihopModel,
        #[arg(long, default_value_t = 0.3)]
        p_epr: f64,
        #[arg(long, env = "QCLOUD_SEED", default_value_t = 0)]
        seed: u64,
        /// Writes the full trace as JSON.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Runs an experiment and writes its report bundle.
    Simulate {
        /// JSON experiment configuration; defaults apply without one.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "results")]
        out: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Single-circuit placement comparison across methods.
    Bench {
        #[arg(required = true)]
        circuits: Vec<String>,
        #[arg(long, default_value_t = 10)]
        trials: usize,
        #[arg(long, env = "QCLOUD_SEED", default_value_t = 0)]
        seed: u64,
        #[arg(long, value_delimiter = ',')]
        methods: Vec<PlacementMethod>,
        #[command(flatten)]
        topo: TopoArgs,
    },
    /// Reruns a manifest and checks the outputs byte for byte.
    Replay {
        manifest: PathBuf,
        /// Writes the replayed bundle here.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Directory to compare against; defaults to the manifest's own.
        #[arg(long)]
        check: Option<PathBuf>,
    },
}

#[derive(Args)]
struct CircuitArgs {
    /// Benchmark name (qft_n63) or .qasm path.
    circuit: Option<String>,
    #[arg(long, conflicts_with = "circuit", requires = "n")]
    family: Option<Family>,
    #[arg(long)]
    n: Option<usize>,
    /// Bernstein-Vazirani secret as a bit string.
    #[arg(long)]
    secret: Option<String>,
    #[arg(long)]
    qasm_dir: Option<PathBuf>,
}

impl CircuitArgs {
    fn load(&self) -> Res<AnalyzedCircuit> {
        match (&self.circuit, self.family, self.n) {
            (Some(c), _, _) => load_entry(c, self.qasm_dir.as_deref()).map_err(Failure::Config),
            (None, Some(f), Some(n)) => {
                let mut p = GenParams::default();
                if let Some(s) = &self.secret {
                    p = p.with_secret_str(s).map_err(config)?;
                }
                Ok(AnalyzedCircuit::new(generate_circuit(f, n, &p).map_err(config)?))
            }
            _ => Err(Failure::Config("give a circuit name, a .qasm path, or --family with --n".into())),
        }
    }
}

#[derive(Args)]
struct TopoArgs {
    /// Topology JSON file; overrides the random-topology flags.
    #[arg(long)]
    topology: Option<PathBuf>,
    #[arg(long, default_value_t = 20)]
    qpus: usize,
    #[arg(long, default_value_t = 0.3)]
    edge_prob: f64,
    #[arg(long, default_value_t = 20)]
    comp_qubits: usize,
    #[arg(long, default_value_t = 5)]
    comm_qubits: usize,
    /// Cap on quantum links per QPU; unlimited when absent.
    #[arg(long)]
    max_degree: Option<usize>,
    #[arg(long, default_value_t = 0)]
    topo_seed: u64,
}

impl TopoArgs {
    fn params(&self) -> TopologyParams {
        TopologyParams {
            num_qpus: self.qpus,
            edge_prob: self.edge_prob,
            comp_qubits: self.comp_qubits,
            comm_qubits: self.comm_qubits,
            max_degree: self.max_degree,
        }
    }

    fn build(&self) -> Res<CloudTopology> {
        match &self.topology {
            Some(p) => CloudTopology::load(p).map_err(config),
            None => CloudTopology::random(&self.params(), self.topo_seed).map_err(config),
        }
    }
}

#[derive(Args, Default)]
struct Overrides {
    #[arg(long, env = "QCLOUD_SEED")]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    batches: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    mix: Option<Mix>,
    /// Benchmark names or .qasm paths replacing the configured list.
    #[arg(long, value_delimiter = ',')]
    circuits: Vec<String>,
    #[arg(long)]
    p_epr: Option<f64>,
    #[arg(long)]
    epsilon: Option<u64>,
    /// Batch-metric weights as three comma-separated numbers.
    #[arg(long, value_delimiter = ',')]
    lambda: Vec<f64>,
    /// Score weights for time and communication.
    #[arg(long, value_delimiter = ',')]
    score: Vec<f64>,
    /// Methods as placement:policy:batching triples.
    #[arg(long, value_delimiter = ',')]
    methods: Vec<String>,
    #[arg(long)]
    workers: Option<usize>,
}

impl Overrides {
    fn apply(&self, cfg: &mut ExperimentConfig) -> Res<()> {
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.trials {
            cfg.trials = v;
        }
        if let Some(v) = self.batches {
            cfg.workload.batches = v;
        }
        if let Some(v) = self.batch_size {
            cfg.workload.batch_size = Some(v);
        }
        if let Some(m) = self.mix {
            cfg.workload.mix = Some(m);
        }
        if !self.circuits.is_empty() {
            cfg.workload.circuits = self.circuits.clone();
            if self.mix.is_none() {
                cfg.workload.mix = None;
            }
        }
        if let Some(v) = self.p_epr {
            cfg.p_epr = v;
        }
        if let Some(v) = self.epsilon {
            cfg.placement.epsilon = Some(v);
        }
        match self.lambda[..] {
            [] => {}
            [a, b, c] => cfg.batch_weights = qcloud::analysis::BatchWeights::new(a, b, c),
            _ => return Err(Failure::Config("lambda: expected three comma-separated weights".into())),
        }
        match self.score[..] {
            [] => {}
            [t, c] => {
                cfg.placement.score.time = t;
                cfg.placement.score.comm = c;
            }
            _ => return Err(Failure::Config("score: expected two comma-separated weights".into())),
        }
        if !self.methods.is_empty() {
            cfg.methods = self.methods.iter().map(|s| parse_method(s)).collect::<Res<_>>()?;
        }
        if let Some(v) = self.workers {
            cfg.workers = v;
        }
        Ok(())
    }
}

fn parse_method(s: &str) -> Res<MethodSpec> {
    let parts: Vec<&str> = s.split(':').collect();
    let bad = |e: String| Failure::Config(format!("methods: '{s}': {e}"));
    let placement = parts[0].parse::<PlacementMethod>().map_err(|e| bad(e.to_string()))?;
    let policy = parts.get(1).map_or(Ok(Policy::Cloudqc), |p| p.parse()).map_err(|e: String| bad(e))?;
    let batching = parts.get(2).map_or(Ok(BatchOrder::Descending), |p| p.parse()).map_err(|e: String| bad(e))?;
    if parts.len() > 3 {
        return Err(bad("expected placement[:policy[:batching]]".into()));
    }
    Ok(MethodSpec::new(placement, policy, batching))
}

fn print_json(v: &serde_json::Value) {
    println!("{}", serde_json::to_string_pretty(v).expect("serializable"));
}

fn analyze(args: &CircuitArgs) -> Res<()> {
    let ac = args.load()?;
    let c = &ac.circuit;
    let terms = MetricTerms::of(c);
    print_json(&json!({
        "name": ac.name(),
        "qubits": c.num_qubits,
        "gates": c.gates.len(),
        "two_qubit_gates": c.num_two_qubit_gates(),
        "depth": circuit_depth(c),
        "dag_nodes": ac.dag.len(),
        "dag_edges": ac.dag.num_edges(),
        "interaction_edges": ac.graph.num_edges(),
        "interaction_weight": ac.graph.total_weight(),
        "batch_terms": terms,
    }));
    Ok(())
}

fn partition(args: &CircuitArgs, k: usize, alpha: f64, seed: u64) -> Res<()> {
    let ac = args.load()?;
    let r = ac.partition(k, alpha, seed).map_err(config)?;
    print_json(&serde_json::to_value(&*r).expect("serializable"));
    Ok(())
}

fn place_cmd(args: &CircuitArgs, topo: &TopoArgs, method: PlacementMethod, p_epr: f64, seed: u64) -> Res<()> {
    let ac = args.load()?;
    let t = topo.build()?;
    let mut mc = qcloud::baselines::MethodConfig::default();
    mc.placement.p_epr = p_epr;
    mc.placement.validate().map_err(config)?;
    let p = place(method, &ac, &t, &mc, seed, None).map_err(|e| match e {
        qcloud::placement::PlacementError::NoFeasibleAssignment(_) => Failure::Infeasible(e.to_string()),
        _ => config(e),
    })?;
    verify_placement(&p, &ac.graph, &t).map_err(Failure::Invariant)?;
    let remote = build_remote_dag(&ac.dag, &ac.circuit, &p.qubit_map, &t).map_err(|e| Failure::Invariant(e.to_string()))?;
    print_json(&json!({
        "placement": p,
        "remote_dag_nodes": remote.len(),
        "remote_dag_arcs": remote.num_arcs(),
    }));
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn schedule(
    circuits: &[String],
    topo: &TopoArgs,
    policy: Policy,
    method: PlacementMethod,
    batching: BatchOrder,
    multihop: MultihopModel,
    p_epr: f64,
    seed: u64,
    trace_path: Option<&Path>,
) -> Res<()> {
    let jobs: Vec<Arc<AnalyzedCircuit>> = circuits
        .iter()
        .map(|c| load_entry(c, None).map(Arc::new).map_err(Failure::Config))
        .collect::<Res<_>>()?;
    let t = topo.build()?;
    let cfg = SimConfig { p_epr, policy, seed, batch_order: batching, method, multihop, trace: true, ..Default::default() };
    let out = sim::run(&jobs, &t, &cfg)?;
    let trace = out.trace.as_ref().expect("trace requested");
    verify_trace(trace, policy).map_err(Failure::Invariant)?;
    if let Some(p) = trace_path {
        let text = serde_json::to_string(trace).expect("serializable");
        std::fs::write(p, text).map_err(|e| Failure::Config(format!("{}: {e}", p.display())))?;
        info!("trace written to {}", p.display());
    }
    let metrics = sim::compute_metrics(&out.records, t.total_computing_capacity())?;
    print_json(&json!({
        "records": out.records,
        "metrics": {
            "mean_jct": metrics.mean_jct,
            "median_jct": metrics.median_jct,
            "p80_jct": metrics.p80_jct,
            "makespan": metrics.makespan,
            "utilization": metrics.utilization,
            "total_remote_ops": metrics.total_remote_ops,
        },
        "rounds": out.rounds,
        "events": out.events,
        "trace_verified": true,
    }));
    Ok(())
}

fn simulate(config_path: Option<&Path>, out: &Path, overrides: &Overrides) -> Res<()> {
    let mut cfg = match config_path {
        Some(p) => ExperimentConfig::load(p).map_err(config)?,
        None => ExperimentConfig::default(),
    };
    // the flag, bound to the same variable, wins over the file
    cfg.apply_env().map_err(config)?;
    overrides.apply(&mut cfg)?;
    let bundle = run_experiment(&cfg)?;
    write_bundle(&bundle, out)?;
    for m in &bundle.summary.methods {
        println!(
            "{:<32} jobs {:>5}  failed cells {:>3}  mean JCT {:>12}  p80 JCT {:>12}  remote ops {:>8}",
            m.method,
            m.jobs,
            m.failed_cells,
            m.mean_jct.map_or("-".into(), |v| format!("{v:.1}")),
            m.p80_jct.map_or("-".into(), |v| format!("{v:.1}")),
            m.total_remote_ops
        );
    }
    info!("bundle written to {}", out.display());
    let failed: usize = bundle.summary.methods.iter().map(|m| m.failed_cells).sum();
    if failed > 0 && failed == bundle.cells.len() {
        return Err(Failure::Infeasible(format!("every cell failed; first error: {}", first_error(&bundle))));
    }
    Ok(())
}

fn first_error(b: &qcloud::experiment::Bundle) -> String {
    b.summary.cells.iter().find_map(|c| c.error.clone()).unwrap_or_default()
}

fn bench(circuits: &[String], trials: usize, seed: u64, methods: &[PlacementMethod], topo: &TopoArgs) -> Res<()> {
    let jobs: Vec<Arc<AnalyzedCircuit>> = circuits
        .iter()
        .map(|c| load_entry(c, None).map(Arc::new).map_err(Failure::Config))
        .collect::<Res<_>>()?;
    let cfg = ExperimentConfig { seed, trials, topology: topo.params(), ..Default::default() };
    if trials == 0 {
        return Err(Failure::Config("trials: must be at least 1".into()));
    }
    let methods = if methods.is_empty() { PlacementMethod::ALL.to_vec() } else { methods.to_vec() };
    let rows = bench_placement(&jobs, &methods, &cfg)?;
    println!("{:<20} {:<12} {:>12}", "circuit", "method", "remote ops");
    for (c, m, mean) in bench_means(&rows) {
        println!("{c:<20} {:<12} {mean:>12.1}", m.as_str());
    }
    Ok(())
}

fn replay_cmd(manifest: &Path, out: Option<&Path>, check: Option<&Path>) -> Res<()> {
    let m = load_manifest(manifest).map_err(config)?;
    let bundle = replay(&m)?;
    if let Some(o) = out {
        write_bundle(&bundle, o)?;
    }
    let dir = check.map(Path::to_path_buf).unwrap_or_else(|| manifest.parent().unwrap_or(Path::new(".")).to_path_buf());
    let diff = compare_with_dir(&bundle, &dir);
    if !diff.is_empty() {
        return Err(ReportError::ReplayMismatch(diff.join(", ")).into());
    }
    println!("replay identical: {} files", bundle.files.len());
    Ok(())
}

fn dispatch(cli: Cli) -> Res<()> {
    match cli.cmd {
        Cmd::Analyze { circuit } => analyze(&circuit),
        Cmd::Partition { circuit, k, alpha, seed } => partition(&circuit, k, alpha, seed),
        Cmd::Place { circuit, topo, method, p_epr, seed } => place_cmd(&circuit, &topo, method, p_epr, seed),
        Cmd::Schedule { circuits, topo, policy, method, batching, multihop, p_epr, seed, trace } => {
            schedule(&circuits, &topo, policy, method, batching, multihop, p_epr, seed, trace.as_deref())
        }
        Cmd::Simulate { config, out, overrides } => simulate(config.as_deref(), &out, &overrides),
        Cmd::Bench { circuits, trials, seed, methods, topo } => bench(&circuits, trials, seed, &methods, &topo),
        Cmd::Replay { manifest, out, check } => replay_cmd(&manifest, out.as_deref(), check.as_deref()),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
