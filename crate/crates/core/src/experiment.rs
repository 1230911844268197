//! Experiment driver: configuration, the (trial × batch × method) cell
//! matrix, report bundles and manifest replay.
//!
//! A bundle is built entirely in memory and written afterwards, so a replay
//! can be compared byte for byte against the original files.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{AnalyzedCircuit, BatchWeights};
use crate::baselines::{place, AnnealConfig, GaConfig, MethodConfig};
use crate::cloud::{CloudTopology, TopologyParams};
use crate::placement::{BatchOrder, PlacementConfig, PlacementMethod};
use crate::qasm::parse_qasm;
use crate::scheduler::Policy;
use crate::seed;
use crate::sim::{self, compute_metrics, metrics::cdf_points, JobRecord, Mode, MultihopModel, SimConfig, SimError};
use crate::workload::{load_benchmark, Mix};

pub const SEED_ENV: &str = "QCLOUD_SEED";
const MANIFEST_VERSION: u32 = 1;

const TAG_TOPOLOGY: u64 = 0x7090;
const TAG_BATCH: u64 = 0xba7c;
const TAG_SIM: u64 = 0x5111;
const TAG_PLACE: u64 = 0x91ace;

#[derive(Debug, Clone, PartialEq, Error)]
#[error("{path}: {msg}")]
pub struct ConfigError {
    /// Dotted path of the offending field, `$` for the document itself.
    pub path: String,
    pub msg: String,
}

impl ConfigError {
    pub fn new(path: impl Into<String>, msg: impl Into<String>) -> Self {
        ConfigError { path: path.into(), msg: msg.into() }
    }
}

#[derive(Debug, Error)]
pub enum ReportError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("no records to summarize")]
    Empty,
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("replay differs from the recorded bundle: {0}")]
    ReplayMismatch(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ReportError + '_ {
    move |source| ReportError::Io { path: path.to_path_buf(), source }
}

/// Circuits of an experiment: a named mix, explicit entries, or both.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorkloadSpec {
    pub mix: Option<Mix>,
    /// Benchmark names (`qft_n63`) or paths to `.qasm` files.
    pub circuits: Vec<String>,
    /// Directory whose `<name>.qasm` files replace synthesized benchmarks.
    pub qasm_dir: Option<PathBuf>,
    /// Jobs per batch drawn with replacement from the pool; `None` runs the
    /// pool itself as one batch.
    pub batch_size: Option<usize>,
    pub batches: usize,
}

impl WorkloadSpec {
    pub fn pool(&self) -> Vec<String> {
        let mut out: Vec<String> = self.mix.map(|m| m.circuits().iter().map(|s| s.to_string()).collect()).unwrap_or_default();
        out.extend(self.circuits.iter().cloned());
        out
    }
}

/// One column of the method matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MethodSpec {
    /// Output directory name; derived from the other fields when empty.
    pub label: String,
    pub placement: PlacementMethod,
    pub policy: Policy,
    pub batching: BatchOrder,
}

impl Default for MethodSpec {
    fn default() -> Self {
        MethodSpec {
            label: String::new(),
            placement: PlacementMethod::Cloudqc,
            policy: Policy::Cloudqc,
            batching: BatchOrder::Descending,
        }
    }
}

impl MethodSpec {
    pub fn new(placement: PlacementMethod, policy: Policy, batching: BatchOrder) -> Self {
        MethodSpec { label: String::new(), placement, policy, batching }
    }

    pub fn label(&self) -> String {
        if !self.label.is_empty() {
            return self.label.clone();
        }
        format!("{}-{}-{}", self.placement, self.policy, batch_name(self.batching))
    }
}

fn batch_name(b: BatchOrder) -> &'static str {
    match b {
        BatchOrder::Descending => "descending",
        BatchOrder::Ascending => "ascending",
        BatchOrder::Fifo => "fifo",
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub seed: u64,
    pub trials: usize,
    pub topology: TopologyParams,
    pub workload: WorkloadSpec,
    pub methods: Vec<MethodSpec>,
    pub p_epr: f64,
    pub mode: Mode,
    pub multihop: MultihopModel,
    pub aging: u32,
    pub batch_weights: BatchWeights,
    pub placement: PlacementConfig,
    pub anneal: AnnealConfig,
    pub ga: GaConfig,
    /// Concurrent cells; 0 uses every core.
    pub workers: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let sim = SimConfig::default();
        ExperimentConfig {
            name: "experiment".into(),
            seed: 0,
            trials: 1,
            topology: TopologyParams::default(),
            workload: WorkloadSpec { batches: 1, ..Default::default() },
            methods: vec![MethodSpec::default()],
            p_epr: sim.p_epr,
            mode: sim.mode,
            multihop: sim.multihop,
            aging: sim.aging,
            batch_weights: sim.batch_weights,
            placement: PlacementConfig::default(),
            anneal: AnnealConfig::default(),
            ga: GaConfig::default(),
            workers: 1,
        }
    }
}

impl ExperimentConfig {
    /// Parses JSON, reporting the field path of the first error.
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let path = if path == "." { "$".to_string() } else { path };
            ConfigError::new(path, e.into_inner().to_string())
        })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::new("$", format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Replaces the seed with `QCLOUD_SEED` when set.
    pub fn apply_env(&mut self) -> Result<(), ConfigError> {
        if let Ok(v) = std::env::var(SEED_ENV) {
            self.seed = v.trim().parse().map_err(|_| ConfigError::new("seed", format!("{SEED_ENV}='{v}' is not an unsigned integer")))?;
        }
        Ok(())
    }

    pub fn method_config(&self) -> MethodConfig {
        MethodConfig {
            placement: PlacementConfig { p_epr: self.p_epr, ..self.placement.clone() },
            anneal: self.anneal,
            ga: self.ga,
        }
    }

    pub fn sim_config(&self, m: &MethodSpec, seed: u64) -> SimConfig {
        SimConfig {
            p_epr: self.p_epr,
            policy: m.policy,
            seed,
            mode: self.mode,
            batch_order: m.batching,
            batch_weights: self.batch_weights,
            method: m.placement,
            methods: self.method_config(),
            multihop: self.multihop,
            aging: self.aging,
            trace: false,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.trials == 0 {
            return Err(ConfigError::new("trials", "must be at least 1"));
        }
        if self.workload.batches == 0 {
            return Err(ConfigError::new("workload.batches", "must be at least 1"));
        }
        if self.workload.batch_size == Some(0) {
            return Err(ConfigError::new("workload.batch_size", "must be at least 1"));
        }
        if self.workload.pool().is_empty() {
            return Err(ConfigError::new("workload", "names no circuits"));
        }
        for (i, c) in self.workload.circuits.iter().enumerate() {
            if c.ends_with(".qasm") && !Path::new(c).is_file() {
                return Err(ConfigError::new(format!("workload.circuits[{i}]"), format!("file '{c}' does not exist")));
            }
        }
        if let Some(d) = &self.workload.qasm_dir {
            if !d.is_dir() {
                return Err(ConfigError::new("workload.qasm_dir", format!("'{}' is not a directory", d.display())));
            }
        }
        if self.methods.is_empty() {
            return Err(ConfigError::new("methods", "must list at least one method"));
        }
        let mut seen = std::collections::BTreeSet::new();
        for (i, m) in self.methods.iter().enumerate() {
            let l = m.label();
            if l.contains(['/', '\\']) || l.starts_with('.') {
                return Err(ConfigError::new(format!("methods[{i}].label"), format!("'{l}' is not a valid directory name")));
            }
            if !seen.insert(l.clone()) {
                return Err(ConfigError::new(format!("methods[{i}].label"), format!("duplicate label '{l}'")));
            }
        }
        let t = &self.topology;
        if t.num_qpus == 0 || t.comp_qubits == 0 || t.comm_qubits == 0 {
            return Err(ConfigError::new("topology", "QPU count and qubit capacities must be positive"));
        }
        if !(0.0..=1.0).contains(&t.edge_prob) {
            return Err(ConfigError::new("topology.edge_prob", "must lie in [0, 1]"));
        }
        if !(self.p_epr > 0.0 && self.p_epr <= 1.0) {
            return Err(ConfigError::new("p_epr", "must lie in (0, 1]"));
        }
        self.method_config().placement.validate().map_err(|e| ConfigError::new("placement", e.to_string()))?;
        self.anneal.validate().map_err(|e| ConfigError::new("anneal", e.to_string()))?;
        self.ga.validate().map_err(|e| ConfigError::new("ga", e.to_string()))?;
        self.sim_config(&self.methods[0], 0).validate().map_err(|e| ConfigError::new("$", e.to_string()))
    }
}

/// Loads one pool entry, either a benchmark name or a `.qasm` path.
pub fn load_entry(entry: &str, qasm_dir: Option<&Path>) -> Result<AnalyzedCircuit, String> {
    let c = if entry.ends_with(".qasm") {
        let text = std::fs::read_to_string(entry).map_err(|e| format!("{entry}: {e}"))?;
        let mut c = parse_qasm(&text).map_err(|e| format!("{entry}: {e}"))?;
        c.name = Path::new(entry).file_stem().and_then(|s| s.to_str()).unwrap_or(entry).to_string();
        c
    } else {
        load_benchmark(entry, qasm_dir).map_err(|e| format!("{entry}: {e}"))?
    };
    Ok(AnalyzedCircuit::new(c))
}

/// Pool indices of batch `b`.
pub fn batch_members(cfg: &ExperimentConfig, b: usize) -> Vec<usize> {
    let n = cfg.workload.pool().len();
    match cfg.workload.batch_size {
        None => (0..n).collect(),
        Some(s) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed::derive_all(cfg.seed, &[TAG_BATCH, b as u64]));
            (0..s).map(|_| rng.gen_range(0..n)).collect()
        }
    }
}

pub fn topology_seed(cfg: &ExperimentConfig, trial: usize) -> u64 {
    seed::derive_all(cfg.seed, &[TAG_TOPOLOGY, trial as u64])
}

/// Simulation seed of a (trial, batch) pair; every method shares it.
pub fn sim_seed(cfg: &ExperimentConfig, trial: usize, batch: usize) -> u64 {
    seed::derive_all(cfg.seed, &[TAG_SIM, trial as u64, batch as u64])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub trial: usize,
    pub batch: usize,
    pub method: String,
    pub topology_seed: u64,
    pub sim_seed: u64,
    pub outcome: Result<Vec<JobRecord>, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: String,
    pub cells: usize,
    pub failed_cells: usize,
    pub jobs: usize,
    pub mean_jct: Option<f64>,
    pub median_jct: Option<f64>,
    pub p80_jct: Option<f64>,
    pub mean_makespan: Option<f64>,
    pub total_remote_ops: u64,
    pub total_comm_cost: u64,
    pub total_attempts: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub trial: usize,
    pub batch: usize,
    pub method: String,
    pub jobs: usize,
    pub mean_jct: Option<f64>,
    pub makespan: Option<f64>,
    pub remote_ops: u64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub name: String,
    pub methods: Vec<MethodSummary>,
    pub cells: Vec<CellSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    pub config: ExperimentConfig,
    /// Resolved per-cell seeds, for inspection; replay rederives them.
    pub topology_seeds: Vec<u64>,
    pub batches: Vec<Vec<String>>,
    pub files: Vec<String>,
}

/// Everything an experiment writes, keyed by relative path.
#[derive(Debug, Clone, PartialEq)]
pub struct Bundle {
    pub summary: Summary,
    pub cells: Vec<CellResult>,
    pub files: BTreeMap<String, Vec<u8>>,
}

/// Runs every (trial, batch, method) cell and assembles the bundle.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Bundle, ReportError> {
    cfg.validate()?;
    let pool_names = cfg.workload.pool();
    let qdir = cfg.workload.qasm_dir.as_deref();
    let mut pool = Vec::with_capacity(pool_names.len());
    for (i, entry) in pool_names.iter().enumerate() {
        let path = if i < cfg.workload.mix.map_or(0, |m| m.circuits().len()) {
            "workload.mix".to_string()
        } else {
            format!("workload.circuits[{}]", i - cfg.workload.mix.map_or(0, |m| m.circuits().len()))
        };
        pool.push(Arc::new(load_entry(entry, qdir).map_err(|e| ConfigError::new(path, e))?));
    }
    let mut topologies = Vec::with_capacity(cfg.trials);
    for trial in 0..cfg.trials {
        let t = CloudTopology::random(&cfg.topology, topology_seed(cfg, trial)).map_err(|e| ConfigError::new("topology", e.to_string()))?;
        topologies.push(t);
    }
    let batches: Vec<Vec<usize>> = (0..cfg.workload.batches).map(|b| batch_members(cfg, b)).collect();
    let keys: Vec<(usize, usize, usize)> = (0..cfg.trials)
        .flat_map(|t| (0..batches.len()).flat_map(move |b| (0..cfg.methods.len()).map(move |m| (t, b, m))))
        .collect();
    let run_cell = |&(trial, batch, m): &(usize, usize, usize)| {
        let spec = &cfg.methods[m];
        let jobs: Vec<Arc<AnalyzedCircuit>> = batches[batch].iter().map(|&i| Arc::clone(&pool[i])).collect();
        let s = sim_seed(cfg, trial, batch);
        let outcome = sim::run(&jobs, &topologies[trial], &cfg.sim_config(spec, s)).map(|o| o.records).map_err(|e| e.to_string());
        CellResult { trial, batch, method: spec.label(), topology_seed: topology_seed(cfg, trial), sim_seed: s, outcome }
    };
    let mut cells: Vec<CellResult> = if cfg.workers == 1 {
        keys.iter().map(run_cell).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.workers)
            .build()
            .map_err(|e| ConfigError::new("workers", e.to_string()))?;
        pool.install(|| keys.par_iter().map(run_cell).collect())
    };
    cells.sort_by(|a, b| (a.method.as_str(), a.trial, a.batch).cmp(&(b.method.as_str(), b.trial, b.batch)));
    build_bundle(cfg, &pool_names, &batches, cells)
}

fn build_bundle(cfg: &ExperimentConfig, pool: &[String], batches: &[Vec<usize>], cells: Vec<CellResult>) -> Result<Bundle, ReportError> {
    let capacity = cfg.topology.num_qpus * cfg.topology.comp_qubits;
    let mut files = BTreeMap::new();
    let mut methods = Vec::new();
    let mut cell_rows = Vec::new();
    for spec in &cfg.methods {
        let label = spec.label();
        let mine: Vec<&CellResult> = cells.iter().filter(|c| c.method == label).collect();
        let mut records_csv = String::from(
            "trial,batch,job,name,qubits,arrival,start,completion,jct,remote_ops,comm_cost,attempts,pairs\n",
        );
        let mut all: Vec<JobRecord> = Vec::new();
        let mut makespans = Vec::new();
        let mut failed = 0;
        for c in &mine {
            match &c.outcome {
                Ok(records) => {
                    for r in records {
                        writeln!(
                            records_csv,
                            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
                            c.trial, c.batch, r.id, r.name, r.qubits, r.arrival, r.start, r.completion, r.jct, r.remote_ops,
                            r.comm_cost, r.attempts, r.pairs
                        )
                        .expect("write to string");
                    }
                    let m = compute_metrics(records, capacity).ok();
                    if let Some(m) = &m {
                        makespans.push(m.makespan.as_cx());
                    }
                    cell_rows.push(CellSummary {
                        trial: c.trial,
                        batch: c.batch,
                        method: label.clone(),
                        jobs: records.len(),
                        mean_jct: m.as_ref().map(|m| m.mean_jct),
                        makespan: m.as_ref().map(|m| m.makespan.as_cx()),
                        remote_ops: records.iter().map(|r| r.remote_ops).sum(),
                        error: None,
                    });
                    all.extend(records.iter().cloned());
                }
                Err(e) => {
                    failed += 1;
                    cell_rows.push(CellSummary {
                        trial: c.trial,
                        batch: c.batch,
                        method: label.clone(),
                        jobs: 0,
                        mean_jct: None,
                        makespan: None,
                        remote_ops: 0,
                        error: Some(e.clone()),
                    });
                }
            }
        }
        files.insert(format!("{label}/records.csv"), records_csv.into_bytes());
        let jct: Vec<f64> = all.iter().map(|r| r.jct.as_cx()).collect();
        if !jct.is_empty() {
            files.insert(format!("{label}/cdf.csv"), cdf_csv(&jct)?.into_bytes());
        }
        let m = compute_metrics(&all, capacity).ok();
        methods.push(MethodSummary {
            method: label,
            cells: mine.len(),
            failed_cells: failed,
            jobs: all.len(),
            mean_jct: m.as_ref().map(|m| m.mean_jct),
            median_jct: m.as_ref().map(|m| m.median_jct),
            p80_jct: m.as_ref().map(|m| m.p80_jct),
            mean_makespan: (!makespans.is_empty()).then(|| makespans.iter().sum::<f64>() / makespans.len() as f64),
            total_remote_ops: all.iter().map(|r| r.remote_ops).sum(),
            total_comm_cost: all.iter().map(|r| r.comm_cost).sum(),
            total_attempts: all.iter().map(|r| r.attempts).sum(),
        });
    }
    let summary = Summary { name: cfg.name.clone(), methods, cells: cell_rows };
    files.insert("summary.json".into(), json_bytes(&summary));
    let mut listed: Vec<String> = files.keys().cloned().collect();
    listed.push("manifest.json".into());
    listed.sort();
    let manifest = Manifest {
        version: MANIFEST_VERSION,
        config: cfg.clone(),
        topology_seeds: (0..cfg.trials).map(|t| topology_seed(cfg, t)).collect(),
        batches: batches.iter().map(|b| b.iter().map(|&i| pool[i].clone()).collect()).collect(),
        files: listed,
    };
    files.insert("manifest.json".into(), json_bytes(&manifest));
    Ok(Bundle { summary, cells, files })
}

fn json_bytes<T: Serialize>(v: &T) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(v).expect("serializable");
    out.push(b'\n');
    out
}

/// Two-column `jct,fraction` CSV of the empirical CDF.
pub fn cdf_csv(jct: &[f64]) -> Result<String, ReportError> {
    if jct.is_empty() {
        return Err(ReportError::Empty);
    }
    let mut out = String::from("jct,fraction\n");
    for (x, f) in cdf_points(jct) {
        writeln!(out, "{x},{f}").expect("write to string");
    }
    Ok(out)
}

/// Writes the CDF of the records' JCTs to `path`.
pub fn emit_cdf(records: &[JobRecord], path: &Path) -> Result<(), ReportError> {
    let jct: Vec<f64> = records.iter().map(|r| r.jct.as_cx()).collect();
    let text = cdf_csv(&jct)?;
    std::fs::write(path, text).map_err(io_err(path))
}

pub fn write_bundle(bundle: &Bundle, dir: &Path) -> Result<(), ReportError> {
    for (rel, bytes) in &bundle.files {
        let path = dir.join(rel);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(io_err(parent))?;
        }
        std::fs::write(&path, bytes).map_err(io_err(&path))?;
    }
    Ok(())
}

pub fn load_manifest(path: &Path) -> Result<Manifest, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::new("$", format!("{}: {e}", path.display())))?;
    let de = &mut serde_json::Deserializer::from_str(&text);
    serde_path_to_error::deserialize(de).map_err(|e| ConfigError::new(e.path().to_string(), e.into_inner().to_string()))
}

/// Reruns the manifest's configuration.
pub fn replay(manifest: &Manifest) -> Result<Bundle, ReportError> {
    if manifest.version != MANIFEST_VERSION {
        return Err(ConfigError::new("version", format!("unsupported manifest version {}", manifest.version)).into());
    }
    run_experiment(&manifest.config)
}

/// Files in `dir` that differ from the bundle, or are missing.
pub fn compare_with_dir(bundle: &Bundle, dir: &Path) -> Vec<String> {
    bundle
        .files
        .iter()
        .filter(|(rel, bytes)| std::fs::read(dir.join(rel)).map_or(true, |b| &b != *bytes))
        .map(|(rel, _)| rel.clone())
        .collect()
}

/// Remote-op and communication-cost row of a single-circuit placement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub circuit: String,
    pub method: PlacementMethod,
    pub trial: usize,
    pub remote_ops: Option<u64>,
    pub comm_cost: Option<u64>,
    pub est_time: Option<f64>,
    pub error: Option<String>,
}

/// Places each circuit alone on fresh topologies with every method.
pub fn bench_placement(
    circuits: &[Arc<AnalyzedCircuit>],
    methods: &[PlacementMethod],
    cfg: &ExperimentConfig,
) -> Result<Vec<BenchRow>, ReportError> {
    let mc = cfg.method_config();
    let mut rows = Vec::new();
    for trial in 0..cfg.trials {
        let t = CloudTopology::random(&cfg.topology, topology_seed(cfg, trial)).map_err(|e| ConfigError::new("topology", e.to_string()))?;
        for ac in circuits {
            for &method in methods {
                let s = seed::derive_all(cfg.seed, &[TAG_PLACE, trial as u64]);
                let row = match place(method, ac, &t, &mc, s, None) {
                    Ok(p) => BenchRow {
                        circuit: ac.name().to_string(),
                        method,
                        trial,
                        remote_ops: Some(p.remote_ops),
                        comm_cost: Some(p.comm_cost),
                        est_time: Some(p.est_time),
                        error: None,
                    },
                    Err(e) => BenchRow {
                        circuit: ac.name().to_string(),
                        method,
                        trial,
                        remote_ops: None,
                        comm_cost: None,
                        est_time: None,
                        error: Some(e.to_string()),
                    },
                };
                rows.push(row);
            }
        }
    }
    Ok(rows)
}

/// Mean remote ops per (circuit, method) over successful trials.
pub fn bench_means(rows: &[BenchRow]) -> Vec<(String, PlacementMethod, f64)> {
    let mut acc: BTreeMap<(String, &str), (PlacementMethod, u64, usize)> = BTreeMap::new();
    for r in rows {
        if let Some(v) = r.remote_ops {
            let e = acc.entry((r.circuit.clone(), r.method.as_str())).or_insert((r.method, 0, 0));
            e.1 += v;
            e.2 += 1;
        }
    }
    acc.into_iter().map(|((c, _), (m, s, n))| (c, m, s as f64 / n as f64)).collect()
}

/// Maps a simulation error to the experiment exit class.
pub fn is_infeasible(e: &SimError) -> bool {
    matches!(e, SimError::Infeasible(_) | SimError::DeadlockDetected { .. })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ExperimentConfig {
        ExperimentConfig {
            workload: WorkloadSpec { circuits: vec!["ghz_n20".into()], batches: 1, ..Default::default() },
            ..Default::default()
        }
    }

    #[test]
    fn one_ghz_job() {
        let b = run_experiment(&small()).unwrap();
        assert_eq!(b.cells.len(), 1);
        assert_eq!(b.cells[0].outcome.as_ref().unwrap().len(), 1);
        assert_eq!(b.summary.methods[0].jobs, 1);
        let label = MethodSpec::default().label();
        for f in ["summary.json", "manifest.json", &format!("{label}/records.csv"), &format!("{label}/cdf.csv")] {
            assert!(b.files.contains_key(f), "{f}");
        }
    }

    #[test]
    fn arithmetic_mix() {
        let w = WorkloadSpec { mix: Some(Mix::Arithmetic), ..Default::default() };
        assert_eq!(w.pool(), vec!["adder_n64", "adder_n118", "multiplier_n45", "multiplier_n75"]);
    }

    #[test]
    fn cdf_rows() {
        assert_eq!(cdf_csv(&[1.0, 2.0, 2.0, 4.0]).unwrap(), "jct,fraction\n1,0.25\n2,0.75\n4,1\n");
        assert_eq!(cdf_csv(&[16.0]).unwrap(), "jct,fraction\n16,1\n");
        assert!(matches!(cdf_csv(&[]), Err(ReportError::Empty)));
    }

    #[test]
    fn config_errors_carry_paths() {
        let e = ExperimentConfig::from_json(r#"{"methods":[{"placement":"magic"}]}"#).unwrap_err();
        assert_eq!(e.path, "methods[0].placement");
        let e = ExperimentConfig::from_json(r#"{"topology":{"num_qpus":"x"}}"#).unwrap_err();
        assert_eq!(e.path, "topology.num_qpus");
        let e = ExperimentConfig::from_json(r#"{"trials":0}"#).unwrap().validate().unwrap_err();
        assert_eq!(e.path, "trials");
        let mut c = small();
        c.workload.circuits.push("/no/such/file.qasm".into());
        assert_eq!(c.validate().unwrap_err().path, "workload.circuits[1]");
    }

    #[test]
    fn summary_cross_checks_records() {
        let mut c = small();
        c.trials = 2;
        c.workload.circuits = vec!["ghz_n30".into(), "qugan_n39".into()];
        let b = run_experiment(&c).unwrap();
        let from_records: u64 = b.cells.iter().flat_map(|c| c.outcome.as_ref().unwrap()).map(|r| r.remote_ops).sum();
        assert_eq!(b.summary.methods[0].total_remote_ops, from_records);
    }

    #[test]
    fn partial_failure_is_recorded() {
        let mut c = small();
        c.topology = TopologyParams { num_qpus: 2, comp_qubits: 5, ..Default::default() };
        c.workload.circuits = vec!["ghz_n30".into()];
        let b = run_experiment(&c).unwrap();
        assert_eq!(b.summary.methods[0].failed_cells, 1);
        assert!(b.summary.cells[0].error.is_some());
    }

    #[test]
    fn replay_identical() {
        let mut c = small();
        c.workload = WorkloadSpec { mix: Some(Mix::Qugan), batch_size: Some(3), batches: 2, ..Default::default() };
        c.methods = vec![
            MethodSpec::new(PlacementMethod::Cloudqc, Policy::Cloudqc, BatchOrder::Descending),
            MethodSpec::new(PlacementMethod::Random, Policy::Greedy, BatchOrder::Fifo),
        ];
        let a = run_experiment(&c).unwrap();
        let m: Manifest = serde_json::from_slice(&a.files["manifest.json"]).unwrap();
        let b = replay(&m).unwrap();
        assert_eq!(a.files, b.files);
    }
}
