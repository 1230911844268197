//! Circuit placement: candidate partitions over an (α, k) sweep, community
//! based QPU selection, scoring, and the cost evaluators shared with the
//! baselines.

pub mod batch;
pub mod community;
pub mod mapping;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{AnalyzedCircuit, GateDag, InteractionGraph};
use crate::cloud::CloudTopology;
use crate::partition::{PartitionError, PartitionResult};
use crate::qasm::Circuit;
use crate::seed;
use crate::time::LatencyModel;

pub use batch::{order_batch, BatchDecision, BatchItem, BatchOrder};
pub use community::{detect_communities, CommunityProfile, WeightMode};
pub use mapping::{find_placement, find_placement_bfs};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlacementError {
    #[error("no feasible assignment: {0}")]
    NoFeasibleAssignment(String),
    #[error(transparent)]
    Partition(#[from] PartitionError),
    #[error("invalid placement parameters: {0}")]
    BadParams(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlacementMethod {
    Cloudqc,
    CloudqcBfs,
    Random,
    Sa,
    Ga,
}

impl PlacementMethod {
    pub const ALL: [PlacementMethod; 5] = [
        PlacementMethod::Cloudqc,
        PlacementMethod::CloudqcBfs,
        PlacementMethod::Random,
        PlacementMethod::Sa,
        PlacementMethod::Ga,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PlacementMethod::Cloudqc => "cloudqc",
            PlacementMethod::CloudqcBfs => "cloudqc-bfs",
            PlacementMethod::Random => "random",
            PlacementMethod::Sa => "sa",
            PlacementMethod::Ga => "ga",
        }
    }
}

impl std::str::FromStr for PlacementMethod {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        PlacementMethod::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown placement method '{s}'"))
    }
}

impl std::fmt::Display for PlacementMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Placement {
    pub circuit: String,
    pub method: PlacementMethod,
    /// QPU of every logical qubit.
    pub qubit_map: Vec<usize>,
    /// Distinct QPUs used, ascending.
    pub parts_used: Vec<usize>,
    pub k: usize,
    pub alpha: Option<f64>,
    /// `Σ D_ij · hops(π(i), π(j))`.
    pub comm_cost: u64,
    /// Number of two-qubit gates split across QPUs.
    pub remote_ops: u64,
    /// Estimated completion time in CX units.
    pub est_time: f64,
    pub score: f64,
}

impl Placement {
    /// Placement from a qubit map, with costs computed from `g` and `t`.
    pub fn from_map(
        circuit: &str,
        method: PlacementMethod,
        qubit_map: Vec<usize>,
        g: &InteractionGraph,
        t: &CloudTopology,
    ) -> Placement {
        let mut parts_used = qubit_map.clone();
        parts_used.sort_unstable();
        parts_used.dedup();
        Placement {
            circuit: circuit.to_string(),
            method,
            k: parts_used.len(),
            comm_cost: comm_cost(g, &qubit_map, t),
            remote_ops: remote_ops(g, &qubit_map),
            qubit_map,
            parts_used,
            alpha: None,
            est_time: 0.0,
            score: 0.0,
        }
    }

    /// Qubits assigned to each QPU.
    pub fn qpu_loads(&self, num_qpus: usize) -> Vec<usize> {
        let mut loads = vec![0; num_qpus];
        for &q in &self.qubit_map {
            loads[q] += 1;
        }
        loads
    }
}

pub fn comm_cost(g: &InteractionGraph, qubit_map: &[usize], t: &CloudTopology) -> u64 {
    g.edges()
        .map(|(a, b, w)| w * t.distance(qubit_map[a], qubit_map[b]) as u64)
        .sum()
}

pub fn remote_ops(g: &InteractionGraph, qubit_map: &[usize]) -> u64 {
    g.edges()
        .filter(|&(a, b, _)| qubit_map[a] != qubit_map[b])
        .map(|(_, _, w)| w)
        .sum()
}

/// Per-QPU count of remote gates with an endpoint on that QPU.
pub fn remote_loads(g: &InteractionGraph, qubit_map: &[usize], num_qpus: usize) -> Vec<u64> {
    let mut load = vec![0; num_qpus];
    for (a, b, w) in g.edges() {
        let (qa, qb) = (qubit_map[a], qubit_map[b]);
        if qa != qb {
            load[qa] += w;
            load[qb] += w;
        }
    }
    load
}

/// `R(V_j)` summed over several placed circuits.
pub fn remote_load(placed: &[(&InteractionGraph, &[usize])], qpu: usize) -> u64 {
    placed
        .iter()
        .map(|(g, map)| {
            g.edges()
                .filter(|&(a, b, _)| map[a] != map[b] && (map[a] == qpu || map[b] == qpu))
                .map(|(_, _, w)| w)
                .sum::<u64>()
        })
        .sum()
}

/// Checks the map against current free capacity and the stored costs.
pub fn verify_placement(p: &Placement, g: &InteractionGraph, t: &CloudTopology) -> Result<(), String> {
    if p.qubit_map.len() != g.num_vertices() {
        return Err(format!("map covers {} of {} qubits", p.qubit_map.len(), g.num_vertices()));
    }
    if let Some(&q) = p.qubit_map.iter().find(|&&q| q >= t.num_qpus()) {
        return Err(format!("unknown QPU {q}"));
    }
    for (q, &load) in p.qpu_loads(t.num_qpus()).iter().enumerate() {
        if load > t.qpu(q).computing_free {
            return Err(format!("QPU {q} gets {load} qubits but has {} free", t.qpu(q).computing_free));
        }
    }
    let c = comm_cost(g, &p.qubit_map, t);
    if c != p.comm_cost {
        return Err(format!("stored comm_cost {} differs from recomputed {c}", p.comm_cost));
    }
    let r = remote_ops(g, &p.qubit_map);
    if r != p.remote_ops {
        return Err(format!("stored remote_ops {} differs from recomputed {r}", p.remote_ops));
    }
    Ok(())
}

/// Critical path in CX units. Local gates cost their latency; a remote gate
/// spanning `h` hops costs `h · t_iep / p^h + t_2q + t_ms`.
pub fn estimate_time(
    dag: &GateDag,
    circuit: &Circuit,
    qubit_map: &[usize],
    hops: impl Fn(usize, usize) -> u32,
    latency: &LatencyModel,
    p_epr: f64,
) -> f64 {
    let mut finish = vec![0.0f64; dag.len()];
    let mut longest = 0.0f64;
    for node in 0..dag.len() {
        let gate = &circuit.gates[dag.gate_index(node)];
        let cost = match gate.pair() {
            Some((a, b)) if qubit_map[a] != qubit_map[b] => {
                let h = hops(qubit_map[a], qubit_map[b]);
                let q = p_epr.powi(h as i32);
                h as f64 * latency.t_iep.0 as f64 / q + latency.remote_post_epr().0 as f64
            }
            Some(_) => latency.t_2q.0 as f64,
            None => latency.t_1q.0 as f64,
        };
        let start = dag.preds(node).iter().map(|&p| finish[p]).fold(0.0, f64::max);
        finish[node] = start + cost;
        longest = longest.max(finish[node]);
    }
    longest / crate::time::TICKS_PER_CX as f64
}

/// Estimate from a bare partition: every cut gate is one hop.
pub fn estimate_time_parts(
    dag: &GateDag,
    circuit: &Circuit,
    parts: &PartitionResult,
    latency: &LatencyModel,
    p_epr: f64,
) -> f64 {
    estimate_time(dag, circuit, &parts.assignment, |_, _| 1, latency, p_epr)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreWeights {
    pub time: f64,
    pub comm: f64,
}

impl Default for ScoreWeights {
    fn default() -> Self {
        ScoreWeights { time: 1.0, comm: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlacementConfig {
    pub alpha_list: Vec<f64>,
    pub score: ScoreWeights,
    /// Per-QPU remote-load ceiling; `None` disables the filter.
    pub epsilon: Option<u64>,
    pub latency: LatencyModel,
    pub p_epr: f64,
    pub weight_mode: WeightMode,
    pub seed: u64,
}

impl Default for PlacementConfig {
    fn default() -> Self {
        PlacementConfig {
            alpha_list: vec![0.03, 0.1, 0.3],
            score: ScoreWeights::default(),
            epsilon: None,
            latency: LatencyModel::default(),
            p_epr: 0.3,
            weight_mode: WeightMode::Resource,
            seed: 0,
        }
    }
}

impl PlacementConfig {
    pub fn validate(&self) -> Result<(), PlacementError> {
        if self.alpha_list.is_empty() || self.alpha_list.iter().any(|a| !(a.is_finite() && *a >= 0.0)) {
            return Err(PlacementError::BadParams("alpha_list must hold non-negative values".into()));
        }
        if !(self.p_epr > 0.0 && self.p_epr <= 1.0) {
            return Err(PlacementError::BadParams(format!("p_epr {} outside (0, 1]", self.p_epr)));
        }
        if self.score.time < 0.0 || self.score.comm < 0.0 {
            return Err(PlacementError::BadParams("score weights must be non-negative".into()));
        }
        self.latency.validate().map_err(PlacementError::BadParams)
    }
}

/// One evaluated (α, k) candidate.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub alpha: f64,
    pub k: usize,
    pub qubit_map: Vec<usize>,
    pub comm_cost: u64,
    pub remote_ops: u64,
    pub est_time: f64,
}

/// `S = w_t / (1 + T') + w_c / (1 + C')` with `T'`, `C'` min-max normalized
/// over the candidates.
pub fn score_candidates(cands: &[Candidate], w: &ScoreWeights) -> Vec<f64> {
    let norm = |vals: Vec<f64>| -> Vec<f64> {
        let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        vals.iter().map(|v| if hi > lo { (v - lo) / (hi - lo) } else { 0.0 }).collect()
    };
    let t = norm(cands.iter().map(|c| c.est_time).collect());
    let c = norm(cands.iter().map(|c| c.comm_cost as f64).collect());
    (0..cands.len()).map(|i| w.time / (1.0 + t[i]) + w.comm / (1.0 + c[i])).collect()
}

/// Highest score; ties to lower comm_cost, then lower k, then first found.
pub fn best_candidate(cands: &[Candidate], scores: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for i in 0..cands.len() {
        best = match best {
            None => Some(i),
            Some(b) => {
                let better = if (scores[i] - scores[b]).abs() > 1e-12 {
                    scores[i] > scores[b]
                } else {
                    (cands[i].comm_cost, cands[i].k) < (cands[b].comm_cost, cands[b].k)
                };
                Some(if better { i } else { b })
            }
        };
    }
    best
}

/// Feasible QPU with the least surplus for a whole circuit, ties to lowest id.
pub fn best_fit_qpu(t: &CloudTopology, n: usize) -> Option<usize> {
    (0..t.num_qpus())
        .filter(|&q| t.qpu(q).computing_free >= n)
        .min_by_key(|&q| (t.qpu(q).computing_free - n, q))
}

/// CloudQC placement with community-based QPU selection.
pub fn place_circuit(ac: &AnalyzedCircuit, t: &CloudTopology, cfg: &PlacementConfig) -> Result<Placement, PlacementError> {
    place_circuit_with(ac, t, cfg, PlacementMethod::Cloudqc, None)
}

/// Full pipeline for `Cloudqc` or `CloudqcBfs`. `existing_load` holds the
/// per-QPU remote load of circuits already running, used by the ε filter.
pub fn place_circuit_with(
    ac: &AnalyzedCircuit,
    t: &CloudTopology,
    cfg: &PlacementConfig,
    method: PlacementMethod,
    existing_load: Option<&[u64]>,
) -> Result<Placement, PlacementError> {
    cfg.validate()?;
    if !matches!(method, PlacementMethod::Cloudqc | PlacementMethod::CloudqcBfs) {
        return Err(PlacementError::BadParams(format!("{method} is not a pipeline method")));
    }
    let n = ac.num_qubits();
    let name = ac.name();
    let time_of = |map: &[usize]| {
        estimate_time(&ac.dag, &ac.circuit, map, |a, b| t.distance(a, b), &cfg.latency, cfg.p_epr)
    };

    if let Some(q) = best_fit_qpu(t, n) {
        let mut p = Placement::from_map(name, method, vec![q; n], &ac.graph, t);
        p.est_time = time_of(&p.qubit_map);
        p.score = cfg.score.time + cfg.score.comm;
        return Ok(p);
    }
    if t.total_computing_free() < n {
        return Err(PlacementError::NoFeasibleAssignment(format!(
            "{name} needs {n} qubits, {} free",
            t.total_computing_free()
        )));
    }

    let profile = match method {
        PlacementMethod::Cloudqc => Some(detect_communities(t, cfg.weight_mode)),
        _ => None,
    };
    let max_free = t.max_computing_free();
    let k_lo = n.div_ceil(max_free).max(2);
    // parts may share a QPU, so allow up to two per QPU
    let k_hi = (2 * t.num_qpus()).min(n.div_ceil(2)).max(k_lo).min(n);

    let evaluate = |alpha_idx: usize, k: usize| -> Option<Candidate> {
        let alpha = cfg.alpha_list[alpha_idx];
        let s = seed::derive_all(cfg.seed, &[k as u64, alpha_idx as u64]);
        let parts = ac.partition(k, alpha, s).ok()?;
        let part_qpu = match &profile {
            Some(pr) => find_placement(&parts, &ac.graph, t, pr),
            None => find_placement_bfs(&parts, &ac.graph, t),
        }
        .ok()?;
        let qubit_map: Vec<usize> = parts.assignment.iter().map(|&p| part_qpu[p]).collect();
        Some(Candidate {
            alpha,
            k,
            comm_cost: comm_cost(&ac.graph, &qubit_map, t),
            remote_ops: remote_ops(&ac.graph, &qubit_map),
            est_time: time_of(&qubit_map),
            qubit_map,
        })
    };
    let sweep = |ks: Vec<usize>| -> Vec<Candidate> {
        let grid: Vec<(usize, usize)> = (0..cfg.alpha_list.len())
            .flat_map(|a| ks.iter().map(move |&k| (a, k)))
            .collect();
        let found: Vec<Option<Candidate>> = grid.par_iter().map(|&(a, k)| evaluate(a, k)).collect();
        found
            .into_iter()
            .flatten()
            .filter(|c| match (cfg.epsilon, existing_load) {
                (None, _) => true,
                (Some(eps), base) => {
                    let extra = remote_loads(&ac.graph, &c.qubit_map, t.num_qpus());
                    extra
                        .iter()
                        .enumerate()
                        .all(|(q, &l)| l + base.map_or(0, |b| b[q]) <= eps)
                }
            })
            .collect()
    };

    let mut cands = sweep((k_lo..=k_hi).collect());
    // fragmented capacity: retry with finer partitions
    let mut k = (2 * k_hi).min(n);
    if cands.is_empty() && k > k_hi {
        cands = sweep((k_hi + 1..=k).collect());
    }
    while cands.is_empty() && k < n {
        k = (k * 2).min(n);
        cands = sweep(vec![k]);
    }
    let scores = score_candidates(&cands, &cfg.score);
    let i = best_candidate(&cands, &scores)
        .ok_or_else(|| PlacementError::NoFeasibleAssignment(format!("no candidate placement for {name}")))?;
    let c = &cands[i];
    let mut p = Placement::from_map(name, method, c.qubit_map.clone(), &ac.graph, t);
    p.alpha = Some(c.alpha);
    p.est_time = c.est_time;
    p.score = scores[i];
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::build_dag;
    use crate::cloud::{QpuState, TopologyParams};
    use crate::qasm::{generate_circuit, Family, GateKind, GateName, GenParams, Source};

    fn two_qubit_remote() -> Circuit {
        let mut c = Circuit::new("one", 2, Source::Generated);
        c.push(GateKind::Two(GateName::Cx), vec![0, 1]);
        c
    }

    #[test]
    fn estimate_single_remote_cx() {
        let c = two_qubit_remote();
        let dag = build_dag(&c);
        let l = LatencyModel::default();
        assert_eq!(estimate_time(&dag, &c, &[0, 1], |_, _| 1, &l, 0.5), 26.0);
        assert_eq!(estimate_time(&dag, &c, &[0, 1], |_, _| 1, &l, 1.0), 16.0);
        assert_eq!(estimate_time(&dag, &c, &[0, 0], |_, _| 0, &l, 0.3), 1.0);
        let empty = Circuit::new("e", 3, Source::Generated);
        assert_eq!(estimate_time(&build_dag(&empty), &empty, &[0, 0, 0], |_, _| 1, &l, 0.3), 0.0);
    }

    #[test]
    fn estimate_local_is_weighted_critical_path() {
        let mut c = Circuit::new("c", 3, Source::Generated);
        c.gate(GateName::H, &[0]);
        c.gate(GateName::Cx, &[0, 1]);
        c.gate(GateName::T, &[2]);
        c.gate(GateName::Cx, &[1, 2]);
        c.gate(GateName::H, &[0]);
        let dag = build_dag(&c);
        // h(0.1) + cx(1) + cx(1) = 2.1
        let t = estimate_time(&dag, &c, &[0, 0, 0], |_, _| 0, &LatencyModel::default(), 0.3);
        assert!((t - 2.1).abs() < 1e-12);
    }

    #[test]
    fn remote_load_counts() {
        let g1 = InteractionGraph::from_edges(3, [(0, 1, 3), (1, 2, 1)]);
        let g2 = InteractionGraph::from_edges(2, [(0, 1, 3)]);
        let m1 = [0, 1, 1];
        let m2 = [0, 2];
        let placed: [(&InteractionGraph, &[usize]); 2] = [(&g1, &m1), (&g2, &m2)];
        assert_eq!(remote_load(&placed, 0), 6);
        assert_eq!(remote_load(&placed, 1), 3);
        assert_eq!(remote_load(&placed, 2), 3);
        assert_eq!(remote_load(&placed, 3), 0);
        assert_eq!(remote_loads(&g1, &m1, 3), vec![3, 3, 0]);
        let local = [0, 0, 0];
        assert_eq!(remote_load(&[(&g1, &local)], 0), 0);
    }

    #[test]
    fn small_circuit_goes_to_one_qpu() {
        let t = CloudTopology::random(&TopologyParams::default(), 1).unwrap();
        let ac = AnalyzedCircuit::new(generate_circuit(Family::Ghz, 10, &GenParams::default()).unwrap());
        let p = place_circuit(&ac, &t, &PlacementConfig::default()).unwrap();
        assert_eq!(p.comm_cost, 0);
        assert_eq!(p.parts_used.len(), 1);
        verify_placement(&p, &ac.graph, &t).unwrap();
    }

    #[test]
    fn best_fit_prefers_tight_qpu() {
        let mut qpus: Vec<QpuState> = (0..3).map(|i| QpuState::new(i, 20, 5)).collect();
        qpus[2].computing_free = 12;
        let t = CloudTopology::new(qpus, &[(0, 1), (1, 2)]).unwrap();
        assert_eq!(best_fit_qpu(&t, 10), Some(2));
        assert_eq!(best_fit_qpu(&t, 13), Some(0));
        assert_eq!(best_fit_qpu(&t, 21), None);
    }

    #[test]
    fn oversized_circuit_rejected() {
        let t = CloudTopology::random(&TopologyParams::default(), 1).unwrap();
        let ac = AnalyzedCircuit::new(generate_circuit(Family::Ghz, 401, &GenParams::default()).unwrap());
        assert!(matches!(
            place_circuit(&ac, &t, &PlacementConfig::default()),
            Err(PlacementError::NoFeasibleAssignment(_))
        ));
    }

    #[test]
    fn ghz_placement_is_cheap_and_valid() {
        let ac = AnalyzedCircuit::new(generate_circuit(Family::Ghz, 127, &GenParams::default()).unwrap());
        for s in 0..3 {
            let t = CloudTopology::random(&TopologyParams::default(), s).unwrap();
            for m in [PlacementMethod::Cloudqc, PlacementMethod::CloudqcBfs] {
                let p = place_circuit_with(&ac, &t, &PlacementConfig::default(), m, None).unwrap();
                verify_placement(&p, &ac.graph, &t).unwrap();
                assert!(p.remote_ops >= 6, "{}", p.remote_ops);
                if m == PlacementMethod::Cloudqc {
                    assert!(p.remote_ops <= 20, "{}", p.remote_ops);
                }
            }
        }
    }

    #[test]
    fn epsilon_filters_candidates() {
        let ac = AnalyzedCircuit::new(generate_circuit(Family::Ghz, 40, &GenParams::default()).unwrap());
        let t = CloudTopology::random(&TopologyParams::default(), 2).unwrap();
        let cfg = PlacementConfig { epsilon: Some(0), ..Default::default() };
        assert!(place_circuit(&ac, &t, &cfg).is_err());
        let cfg = PlacementConfig { epsilon: Some(100), ..Default::default() };
        let p = place_circuit(&ac, &t, &cfg).unwrap();
        assert!(remote_loads(&ac.graph, &p.qubit_map, 20).iter().all(|&l| l <= 100));
    }

    fn cand(k: usize, comm_cost: u64, est_time: f64) -> Candidate {
        Candidate { alpha: 0.1, k, qubit_map: vec![], comm_cost, remote_ops: 0, est_time }
    }

    #[test]
    fn scoring_ties_and_monotonicity() {
        let cands = [cand(3, 10, 50.0), cand(2, 10, 50.0), cand(4, 5, 50.0)];
        let s = score_candidates(&cands, &ScoreWeights::default());
        assert_eq!(best_candidate(&cands, &s), Some(2));
        let cands = [cand(3, 10, 50.0), cand(2, 10, 50.0)];
        let s = score_candidates(&cands, &ScoreWeights::default());
        assert_eq!(best_candidate(&cands, &s), Some(1));
        let cands = [cand(3, 10, 50.0), cand(3, 10, 50.0)];
        let s = score_candidates(&cands, &ScoreWeights::default());
        assert_eq!(best_candidate(&cands, &s), Some(0));
    }

    proptest::proptest! {
        #[test]
        fn lower_cost_wins_at_equal_time(costs in proptest::collection::vec(0u64..100, 2..8), t in 1.0f64..100.0) {
            let cands: Vec<Candidate> = costs.iter().enumerate().map(|(i, &c)| cand(i + 2, c, t)).collect();
            let s = score_candidates(&cands, &ScoreWeights::default());
            let b = best_candidate(&cands, &s).unwrap();
            proptest::prop_assert_eq!(cands[b].comm_cost, *costs.iter().min().unwrap());
        }
    }
}
