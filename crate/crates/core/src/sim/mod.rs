//! Seedable discrete-event simulation of multi-tenant execution.
//!
//! Local gates finish after their fixed latency. A remote gate waits in the
//! front layer until the scheduler grants it EPR pairs; each round holds the
//! granted communication qubits on both endpoint QPUs for `h · t_iep` and
//! then succeeds or fails at random. On success the gate finishes
//! `t_2q + t_ms` later, on failure it re-enters arbitration.

pub mod metrics;
pub mod trace;

use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{AnalyzedCircuit, BatchWeights};
use crate::baselines::{place, MethodConfig};
use crate::cloud::CloudTopology;
use crate::placement::{order_batch, remote_loads, BatchItem, BatchOrder, Placement, PlacementError, PlacementMethod};
use crate::scheduler::{allocate_round, attempt_success_probability, build_remote_dag, Policy, RemoteDag, Request};
use crate::seed;
use crate::time::Ticks;

pub use metrics::{compute_metrics, Metrics};
pub use trace::{verify_trace, Trace};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("deadlock at t={time}: {unfinished} jobs unfinished with no runnable event")]
    DeadlockDetected { time: Ticks, unfinished: usize },
    #[error("infeasible workload: {0}")]
    Infeasible(String),
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error("invalid simulation config: {0}")]
    BadConfig(String),
    #[error("no job records")]
    EmptyRun,
}

/// Inter-arrival law in incoming mode, in CX units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "lowercase")]
pub enum Arrivals {
    Fixed { interval: f64 },
    Exponential { mean: f64 },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Mode {
    /// Every job arrives at t = 0 and the batch manager orders them.
    #[default]
    Batch,
    /// Jobs arrive one by one and are served first-in first-out.
    Incoming { arrivals: Arrivals },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MultihopModel {
    /// One attempt spans all hops and succeeds with `p^h`.
    #[default]
    Serial,
    /// Each hop is retried independently; finished hops are kept.
    Parallel,
}

impl std::str::FromStr for MultihopModel {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "serial" => Ok(MultihopModel::Serial),
            "parallel" => Ok(MultihopModel::Parallel),
            _ => Err(format!("unknown multihop model '{s}'")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub p_epr: f64,
    pub policy: Policy,
    pub seed: u64,
    pub mode: Mode,
    pub batch_order: BatchOrder,
    pub batch_weights: BatchWeights,
    pub method: PlacementMethod,
    pub methods: MethodConfig,
    pub multihop: MultihopModel,
    /// Rounds without pairs before a node is promoted to top priority.
    pub aging: u32,
    pub trace: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            p_epr: 0.3,
            policy: Policy::Cloudqc,
            seed: 0,
            mode: Mode::Batch,
            batch_order: BatchOrder::Descending,
            batch_weights: BatchWeights::default(),
            method: PlacementMethod::Cloudqc,
            methods: MethodConfig::default(),
            multihop: MultihopModel::Serial,
            aging: 5,
            trace: false,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.p_epr > 0.0 && self.p_epr <= 1.0) {
            return Err(SimError::BadConfig(format!("p_epr {} outside (0, 1]", self.p_epr)));
        }
        if self.aging == 0 {
            return Err(SimError::BadConfig("aging threshold must be positive".into()));
        }
        if let Mode::Incoming { arrivals } = self.mode {
            let v = match arrivals {
                Arrivals::Fixed { interval } => interval,
                Arrivals::Exponential { mean } => mean,
            };
            if !(v.is_finite() && v >= 0.0) {
                return Err(SimError::BadConfig(format!("arrival parameter {v} must be non-negative")));
            }
        }
        let mut pc = self.methods.placement.clone();
        pc.p_epr = self.p_epr;
        pc.validate().map_err(|e| SimError::BadConfig(e.to_string()))?;
        self.methods.anneal.validate().map_err(|e| SimError::BadConfig(e.to_string()))?;
        self.methods.ga.validate().map_err(|e| SimError::BadConfig(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobRecord {
    pub id: usize,
    pub name: String,
    pub qubits: usize,
    pub arrival: Ticks,
    pub start: Ticks,
    pub completion: Ticks,
    pub jct: Ticks,
    pub remote_ops: u64,
    pub comm_cost: u64,
    /// EPR rounds over all remote gates.
    pub attempts: u64,
    /// EPR pairs consumed over all rounds.
    pub pairs: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimOutput {
    pub records: Vec<JobRecord>,
    pub placements: Vec<Placement>,
    pub events: u64,
    pub rounds: u64,
    pub trace: Option<Trace>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Event {
    Arrival(usize),
    GateDone(usize, usize),
    RoundDone(usize, usize),
    JobDone(usize),
}

#[derive(Debug, Clone, Default)]
struct RemoteState {
    ready: Option<Ticks>,
    first_attempt: Option<Ticks>,
    rounds: u32,
    unserved: u32,
    pairs: usize,
    stages_left: u32,
}

struct Running {
    placement: Placement,
    remote: RemoteDag,
    rid_of: Vec<u32>,
    waiting: Vec<u32>,
    done: usize,
    start: Ticks,
    attempts: u64,
    pairs: u64,
    nodes: Vec<RemoteState>,
}

const NOT_REMOTE: u32 = u32::MAX;

struct Engine<'a> {
    cfg: &'a SimConfig,
    methods: MethodConfig,
    circuits: &'a [Arc<AnalyzedCircuit>],
    topo: CloudTopology,
    heap: BinaryHeap<Reverse<(Ticks, u64, Event)>>,
    seq: u64,
    now: Ticks,
    rng: ChaCha8Rng,
    arrival: Vec<Ticks>,
    pending: Vec<usize>,
    running: Vec<Option<Running>>,
    records: Vec<Option<JobRecord>>,
    placements: Vec<Option<Placement>>,
    active: BTreeSet<(usize, usize)>,
    place_dirty: bool,
    alloc_dirty: bool,
    events: u64,
    rounds: u64,
    trace: Option<Trace>,
}

/// Arrival times of `n` jobs under `mode`.
pub fn arrival_times(n: usize, mode: &Mode, seed: u64) -> Vec<Ticks> {
    match mode {
        Mode::Batch => vec![Ticks::ZERO; n],
        Mode::Incoming { arrivals: Arrivals::Fixed { interval } } => {
            (0..n).map(|i| Ticks::from_cx(interval * i as f64)).collect()
        }
        Mode::Incoming { arrivals: Arrivals::Exponential { mean } } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(seed, 0xa11));
            let mut t = 0.0;
            let mut out = vec![Ticks::ZERO; n];
            if *mean > 0.0 {
                let exp = Exp::new(1.0 / mean).expect("positive rate");
                for slot in out.iter_mut().skip(1) {
                    t += exp.sample(&mut rng);
                    *slot = Ticks::from_cx(t);
                }
            }
            out
        }
    }
}

/// Pairs beyond which a round's success probability no longer changes.
pub fn useful_pairs(hops: u32, p: f64) -> usize {
    let q = 1.0 - p.powi(hops as i32);
    if q <= 0.0 {
        return 1;
    }
    // smallest x with q^x below 1e-12
    ((1e-12f64).ln() / q.ln()).ceil().max(1.0) as usize
}

/// Simulates the jobs on a fresh copy of `topology`.
pub fn run(circuits: &[Arc<AnalyzedCircuit>], topology: &CloudTopology, cfg: &SimConfig) -> Result<SimOutput, SimError> {
    cfg.validate()?;
    let mut topo = topology.clone();
    topo.reset();
    let capacity = topo.total_computing_capacity();
    if let Some(c) = circuits.iter().find(|c| c.num_qubits() > capacity) {
        return Err(SimError::Infeasible(format!(
            "{} needs {} qubits, cloud holds {capacity}",
            c.name(),
            c.num_qubits()
        )));
    }
    let mut methods = cfg.methods.clone();
    methods.placement.p_epr = cfg.p_epr;
    let n = circuits.len();
    let trace = cfg.trace.then(|| Trace {
        computing_capacity: topo.qpus().iter().map(|q| q.computing_capacity).collect(),
        comm_capacity: topo.qpus().iter().map(|q| q.comm_capacity).collect(),
        ..Trace::default()
    });
    let mut e = Engine {
        cfg,
        methods,
        circuits,
        topo,
        heap: BinaryHeap::new(),
        seq: 0,
        now: Ticks::ZERO,
        rng: ChaCha8Rng::seed_from_u64(seed::derive(cfg.seed, 0xe9)),
        arrival: arrival_times(n, &cfg.mode, cfg.seed),
        pending: Vec::new(),
        running: (0..n).map(|_| None).collect(),
        records: vec![None; n],
        placements: vec![None; n],
        active: BTreeSet::new(),
        place_dirty: false,
        alloc_dirty: false,
        events: 0,
        rounds: 0,
        trace,
    };
    for j in 0..n {
        e.push(e.arrival[j], Event::Arrival(j));
    }
    e.run_loop()?;
    let records: Vec<JobRecord> = e.records.into_iter().map(|r| r.expect("every job completes")).collect();
    let placements = e.placements.into_iter().map(|p| p.expect("every job placed")).collect();
    Ok(SimOutput { records, placements, events: e.events, rounds: e.rounds, trace: e.trace })
}

impl Engine<'_> {
    fn push(&mut self, t: Ticks, ev: Event) {
        self.heap.push(Reverse((t, self.seq, ev)));
        self.seq += 1;
    }

    fn run_loop(&mut self) -> Result<(), SimError> {
        while let Some(&Reverse((t, _, _))) = self.heap.peek() {
            if t < self.now {
                return Err(SimError::Invariant(format!("clock moved back from {} to {t}", self.now)));
            }
            self.now = t;
            loop {
                while let Some(&Reverse((t2, _, ev))) = self.heap.peek() {
                    if t2 != self.now {
                        break;
                    }
                    self.heap.pop();
                    self.events += 1;
                    self.handle(ev)?;
                }
                if self.place_dirty {
                    self.place_dirty = false;
                    self.place_pending()?;
                }
                if self.heap.peek().is_none_or(|&Reverse((t2, _, _))| t2 != self.now) {
                    break;
                }
            }
            if self.alloc_dirty {
                self.alloc_dirty = false;
                self.allocate()?;
            }
        }
        let unfinished = self.records.iter().filter(|r| r.is_none()).count();
        if unfinished > 0 {
            if !self.active.is_empty() || self.running.iter().any(Option::is_some) {
                return Err(SimError::DeadlockDetected { time: self.now, unfinished });
            }
            return Err(SimError::Infeasible(format!("{unfinished} jobs could never be placed")));
        }
        Ok(())
    }

    fn handle(&mut self, ev: Event) -> Result<(), SimError> {
        match ev {
            Event::Arrival(j) => {
                self.pending.push(j);
                self.place_dirty = true;
            }
            Event::GateDone(j, node) => self.gate_done(j, node)?,
            Event::RoundDone(j, rid) => self.round_done(j, rid)?,
            Event::JobDone(j) => self.job_done(j)?,
        }
        Ok(())
    }

    fn place_pending(&mut self) -> Result<(), SimError> {
        if self.pending.is_empty() {
            return Ok(());
        }
        let items: Vec<BatchItem> = self
            .pending
            .iter()
            .map(|&j| BatchItem { id: j, qubits: self.circuits[j].num_qubits(), terms: self.circuits[j].terms })
            .collect();
        let order = match self.cfg.mode {
            Mode::Batch => self.cfg.batch_order,
            Mode::Incoming { .. } => BatchOrder::Fifo,
        };
        let decision = order_batch(&items, &self.cfg.batch_weights, order, self.topo.total_computing_free())
            .map_err(SimError::Invariant)?;
        let mut started = false;
        for j in decision.order {
            let ac = Arc::clone(&self.circuits[j]);
            // selection is re-evaluated as earlier placements consume capacity
            if ac.num_qubits() > self.topo.total_computing_free() {
                continue;
            }
            let load = self.methods.placement.epsilon.map(|_| self.remote_load());
            match place(self.cfg.method, &ac, &self.topo, &self.methods, seed::derive(self.cfg.seed, j as u64), load.as_deref()) {
                Ok(p) => {
                    self.start_job(j, p)?;
                    started = true;
                }
                Err(PlacementError::NoFeasibleAssignment(_)) => {}
                Err(e) => return Err(SimError::BadConfig(e.to_string())),
            }
        }
        if !started && self.running.iter().all(Option::is_none) && !self.pending.is_empty() {
            let names: Vec<&str> = self.pending.iter().map(|&j| self.circuits[j].name()).collect();
            return Err(SimError::Infeasible(format!("cannot place {} on an idle cloud", names.join(", "))));
        }
        Ok(())
    }

    fn remote_load(&self) -> Vec<u64> {
        let mut total = vec![0; self.topo.num_qpus()];
        for (j, r) in self.running.iter().enumerate() {
            if let Some(r) = r {
                let l = remote_loads(&self.circuits[j].graph, &r.placement.qubit_map, self.topo.num_qpus());
                for (t, v) in total.iter_mut().zip(l) {
                    *t += v;
                }
            }
        }
        total
    }

    fn start_job(&mut self, j: usize, p: Placement) -> Result<(), SimError> {
        let ac = Arc::clone(&self.circuits[j]);
        for (q, &n) in p.qpu_loads(self.topo.num_qpus()).iter().enumerate() {
            if n > 0 {
                self.topo.reserve(q, n).map_err(|e| SimError::Invariant(e.to_string()))?;
            }
        }
        let remote = build_remote_dag(&ac.dag, &ac.circuit, &p.qubit_map, &self.topo)
            .map_err(|e| SimError::Invariant(e.to_string()))?;
        let mut rid_of = vec![NOT_REMOTE; ac.dag.len()];
        for (rid, node) in remote.nodes.iter().enumerate() {
            rid_of[node.gate] = rid as u32;
        }
        let waiting: Vec<u32> = (0..ac.dag.len()).map(|v| ac.dag.in_degree(v) as u32).collect();
        let nodes = vec![RemoteState::default(); remote.len()];
        self.pending.retain(|&x| x != j);
        if let Some(tr) = self.trace.as_mut() {
            let loads = p.qpu_loads(self.topo.num_qpus());
            tr.jobs.push(trace::JobSpan {
                job: j,
                start: self.now,
                completion: self.now,
                loads: loads.iter().enumerate().filter(|(_, &n)| n > 0).map(|(q, &n)| (q, n)).collect(),
                arcs: remote.arcs().collect(),
            });
        }
        self.placements[j] = Some(p.clone());
        self.running[j] = Some(Running {
            placement: p,
            remote,
            rid_of,
            waiting,
            done: 0,
            start: self.now,
            attempts: 0,
            pairs: 0,
            nodes,
        });
        if ac.dag.is_empty() {
            self.push(self.now, Event::JobDone(j));
        }
        for v in 0..ac.dag.len() {
            if ac.dag.in_degree(v) == 0 {
                self.make_ready(j, v);
            }
        }
        Ok(())
    }

    fn make_ready(&mut self, j: usize, v: usize) {
        let now = self.now;
        let run = self.running[j].as_mut().expect("running job");
        let rid = run.rid_of[v];
        if rid == NOT_REMOTE {
            let ac = &self.circuits[j];
            let lat = &self.cfg.methods.placement.latency;
            let d = if ac.circuit.gates[ac.dag.gate_index(v)].is_two_qubit() { lat.t_2q } else { lat.t_1q };
            self.push(now + d, Event::GateDone(j, v));
        } else {
            let rid = rid as usize;
            let hops = run.remote.nodes[rid].hops;
            let st = &mut run.nodes[rid];
            st.ready = Some(now);
            st.stages_left = hops;
            self.active.insert((j, rid));
            self.alloc_dirty = true;
        }
    }

    fn gate_done(&mut self, j: usize, v: usize) -> Result<(), SimError> {
        let ac = Arc::clone(&self.circuits[j]);
        let run = self.running[j].as_mut().expect("running job");
        run.done += 1;
        let mut ready = Vec::new();
        for &s in ac.dag.succs(v) {
            run.waiting[s] -= 1;
            if run.waiting[s] == 0 {
                ready.push(s);
            }
        }
        let finished = run.done == ac.dag.len();
        let rid = run.rid_of[v];
        if rid != NOT_REMOTE {
            let st = &run.nodes[rid as usize];
            if let Some(tr) = self.trace.as_mut() {
                tr.nodes.push(trace::NodeTrace {
                    job: j,
                    node: rid as usize,
                    ready: st.ready.expect("ready"),
                    first_attempt: st.first_attempt.expect("attempted"),
                    completed: self.now,
                    rounds: st.rounds,
                });
            }
        }
        for s in ready {
            self.make_ready(j, s);
        }
        if finished {
            self.push(self.now, Event::JobDone(j));
        }
        Ok(())
    }

    fn round_done(&mut self, j: usize, rid: usize) -> Result<(), SimError> {
        let run = self.running[j].as_mut().expect("running job");
        let node = run.remote.nodes[rid];
        let x = std::mem::take(&mut run.nodes[rid].pairs);
        for q in [node.qpus.0, node.qpus.1] {
            self.topo.release_comm(q, x).map_err(|e| SimError::Invariant(e.to_string()))?;
        }
        self.alloc_dirty = true;
        let success = match self.cfg.multihop {
            MultihopModel::Serial => self.rng.gen_bool(attempt_success_probability(x, node.hops, self.cfg.p_epr)),
            MultihopModel::Parallel => {
                let p = attempt_success_probability(x, 1, self.cfg.p_epr);
                let st = &mut run.nodes[rid];
                let mut left = st.stages_left;
                for _ in 0..st.stages_left {
                    if self.rng.gen_bool(p) {
                        left -= 1;
                    }
                }
                st.stages_left = left;
                left == 0
            }
        };
        if success {
            let post = self.cfg.methods.placement.latency.remote_post_epr();
            self.push(self.now + post, Event::GateDone(j, node.gate));
        } else {
            self.active.insert((j, rid));
        }
        Ok(())
    }

    fn job_done(&mut self, j: usize) -> Result<(), SimError> {
        let run = self.running[j].take().expect("running job");
        for (q, &n) in run.placement.qpu_loads(self.topo.num_qpus()).iter().enumerate() {
            if n > 0 {
                self.topo.release(q, n).map_err(|e| SimError::Invariant(e.to_string()))?;
            }
        }
        if let Some(span) = self.trace.as_mut().and_then(|tr| tr.jobs.iter_mut().find(|s| s.job == j)) {
            span.completion = self.now;
        }
        self.records[j] = Some(JobRecord {
            id: j,
            name: self.circuits[j].name().to_string(),
            qubits: self.circuits[j].num_qubits(),
            arrival: self.arrival[j],
            start: run.start,
            completion: self.now,
            jct: self.now - self.arrival[j],
            remote_ops: run.placement.remote_ops,
            comm_cost: run.placement.comm_cost,
            attempts: run.attempts,
            pairs: run.pairs,
        });
        self.place_dirty = true;
        Ok(())
    }

    fn allocate(&mut self) -> Result<(), SimError> {
        if self.active.is_empty() {
            return Ok(());
        }
        self.rounds += 1;
        let keys: Vec<(usize, usize)> = self.active.iter().copied().collect();
        let base: Vec<u32> = keys
            .iter()
            .map(|&(j, rid)| self.running[j].as_ref().expect("running job").remote.priority(rid))
            .collect();
        let top = base.iter().copied().max().unwrap_or(0);
        let reqs: Vec<Request> = keys
            .iter()
            .zip(&base)
            .map(|(&(j, rid), &p)| {
                let run = self.running[j].as_ref().expect("running job");
                let aged = run.nodes[rid].unserved >= self.cfg.aging;
                Request {
                    key: ((j as u64) << 32) | rid as u64,
                    priority: if aged { top + 1 } else { p },
                    qpus: run.remote.nodes[rid].qpus,
                }
            })
            .collect();
        let mut budgets: Vec<usize> = self.topo.qpus().iter().map(|q| q.comm_free).collect();
        let before = budgets.clone();
        let mut x = allocate_round(&reqs, &mut budgets, self.cfg.policy, &mut self.rng);
        for (xi, r) in x.iter_mut().zip(&reqs) {
            let (j, rid) = ((r.key >> 32) as usize, (r.key & 0xffff_ffff) as usize);
            *xi = (*xi).min(useful_pairs(self.running[j].as_ref().expect("running job").remote.nodes[rid].hops, self.cfg.p_epr));
        }
        let t_iep = self.cfg.methods.placement.latency.t_iep;
        let mut grants = Vec::new();
        for (i, &(j, rid)) in keys.iter().enumerate() {
            let run = self.running[j].as_mut().expect("running job");
            let node = run.remote.nodes[rid];
            let until = self.now + t_iep * node.hops as u64;
            if self.trace.is_some() {
                grants.push(trace::Grant {
                    job: j,
                    node: rid,
                    qpus: node.qpus,
                    base_priority: base[i],
                    priority: reqs[i].priority,
                    pairs: x[i],
                    until,
                });
            }
            let st = &mut run.nodes[rid];
            if x[i] == 0 {
                st.unserved += 1;
                continue;
            }
            st.unserved = 0;
            st.pairs = x[i];
            st.rounds += 1;
            st.first_attempt.get_or_insert(self.now);
            run.attempts += 1;
            run.pairs += x[i] as u64;
            for q in [node.qpus.0, node.qpus.1] {
                self.topo.reserve_comm(q, x[i]).map_err(|e| SimError::Invariant(e.to_string()))?;
            }
            self.active.remove(&(j, rid));
            self.push(until, Event::RoundDone(j, rid));
        }
        if let Some(tr) = self.trace.as_mut() {
            tr.rounds.push(trace::RoundTrace { time: self.now, budgets: before, grants });
        }
        Ok(())
    }
}
