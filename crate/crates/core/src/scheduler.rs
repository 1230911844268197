//! Remote-gate DAG, longest-path priorities and per-round allocation of
//! communication qubits.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::GateDag;
use crate::cloud::CloudTopology;
use crate::qasm::Circuit;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SchedError {
    #[error("remote gate at DAG node {node} has both qubits on QPU {qpu}")]
    SameQpu { node: usize, qpu: usize },
    #[error("remote DAG arcs must point forward: {0} -> {1}")]
    BackwardArc(usize, usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RemoteNode {
    /// Node id in the gate DAG.
    pub gate: usize,
    /// Endpoint QPUs, smaller id first.
    pub qpus: (usize, usize),
    pub hops: u32,
}

/// Dependency DAG restricted to remote gates. Node ids follow gate order and
/// are therefore topological.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RemoteDag {
    pub nodes: Vec<RemoteNode>,
    preds: Vec<Vec<usize>>,
    succs: Vec<Vec<usize>>,
    priority: Vec<u32>,
}

impl RemoteDag {
    /// Bare DAG from arcs `u -> v` with `u < v`; node payloads are dummies.
    pub fn from_arcs(n: usize, arcs: &[(usize, usize)]) -> Result<Self, SchedError> {
        let mut preds = vec![Vec::new(); n];
        let mut succs = vec![Vec::new(); n];
        for &(u, v) in arcs {
            if u >= v {
                return Err(SchedError::BackwardArc(u, v));
            }
            succs[u].push(v);
            preds[v].push(u);
        }
        for l in preds.iter_mut().chain(succs.iter_mut()) {
            l.sort_unstable();
            l.dedup();
        }
        let nodes = (0..n).map(|i| RemoteNode { gate: i, qpus: (0, 1), hops: 1 }).collect();
        let mut r = RemoteDag { nodes, preds, succs, priority: vec![0; n] };
        r.compute_priorities();
        Ok(r)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn preds(&self, u: usize) -> &[usize] {
        &self.preds[u]
    }

    pub fn succs(&self, u: usize) -> &[usize] {
        &self.succs[u]
    }

    pub fn arcs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.succs.iter().enumerate().flat_map(|(u, s)| s.iter().map(move |&v| (u, v)))
    }

    pub fn num_arcs(&self) -> usize {
        self.succs.iter().map(Vec::len).sum()
    }

    pub fn priority(&self, u: usize) -> u32 {
        self.priority[u]
    }

    pub fn priorities(&self) -> &[u32] {
        &self.priority
    }

    /// Longest path in arcs from each node to a leaf, by reverse sweep.
    pub fn compute_priorities(&mut self) {
        for u in (0..self.len()).rev() {
            self.priority[u] = self.succs[u].iter().map(|&v| self.priority[v] + 1).max().unwrap_or(0);
        }
    }
}

struct BitSet(Vec<u64>);

impl BitSet {
    fn new(n: usize) -> Self {
        BitSet(vec![0; n.div_ceil(64)])
    }
    fn insert(&mut self, i: usize) {
        self.0[i / 64] |= 1 << (i % 64);
    }
    fn contains(&self, i: usize) -> bool {
        self.0[i / 64] >> (i % 64) & 1 == 1
    }
    fn union_with(&mut self, o: &BitSet) {
        for (a, b) in self.0.iter_mut().zip(&o.0) {
            *a |= b;
        }
    }
}

/// Keeps the two-qubit gates whose qubits sit on different QPUs. `u -> v`
/// when a gate path leads from `u` to `v` through local gates only; the
/// result is transitively reduced.
pub fn build_remote_dag(
    dag: &GateDag,
    circuit: &Circuit,
    qubit_map: &[usize],
    t: &CloudTopology,
) -> Result<RemoteDag, SchedError> {
    let mut rid = vec![usize::MAX; dag.len()];
    let mut nodes = Vec::new();
    for node in 0..dag.len() {
        if let Some((a, b)) = circuit.gates[dag.gate_index(node)].pair() {
            let (qa, qb) = (qubit_map[a], qubit_map[b]);
            if qa != qb {
                rid[node] = nodes.len();
                nodes.push(RemoteNode { gate: node, qpus: (qa.min(qb), qa.max(qb)), hops: t.distance(qa, qb) });
            }
        }
    }
    let r = nodes.len();
    // nearest remote ancestors of every gate
    let mut near: Vec<Vec<usize>> = vec![Vec::new(); dag.len()];
    let mut preds = vec![Vec::new(); r];
    let mut ancestors: Vec<BitSet> = Vec::with_capacity(r);
    for node in 0..dag.len() {
        let mut set: Vec<usize> = Vec::new();
        for &p in dag.preds(node) {
            if rid[p] != usize::MAX {
                set.push(rid[p]);
            } else {
                set.extend_from_slice(&near[p]);
            }
        }
        set.sort_unstable();
        set.dedup();
        if rid[node] == usize::MAX {
            near[node] = set;
            continue;
        }
        let mut anc = BitSet::new(r);
        for &u in &set {
            anc.union_with(&ancestors[u]);
        }
        // direct arcs: nearest ancestors not implied through another one
        preds[rid[node]] = set.iter().copied().filter(|&u| !anc.contains(u)).collect();
        for &u in &set {
            anc.insert(u);
        }
        ancestors.push(anc);
    }
    drop(near);
    let mut succs = vec![Vec::new(); r];
    for (v, ps) in preds.iter().enumerate() {
        for &u in ps {
            succs[u].push(v);
        }
    }
    let mut out = RemoteDag { nodes, preds, succs, priority: vec![0; r] };
    out.compute_priorities();
    Ok(out)
}

/// Per-pair end-to-end success `p^h`; a round with `x` pairs succeeds with
/// `1 - (1 - p^h)^x`. Zero hops always succeed.
pub fn attempt_success_probability(x: usize, hops: u32, p_link: f64) -> f64 {
    if hops == 0 {
        return 1.0;
    }
    if x == 0 {
        return 0.0;
    }
    let q = p_link.powi(hops as i32);
    1.0 - (1.0 - q).powi(x as i32)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Policy {
    #[default]
    Cloudqc,
    Greedy,
    Average,
    Random,
}

impl Policy {
    pub const ALL: [Policy; 4] = [Policy::Cloudqc, Policy::Greedy, Policy::Average, Policy::Random];

    pub fn as_str(self) -> &'static str {
        match self {
            Policy::Cloudqc => "cloudqc",
            Policy::Greedy => "greedy",
            Policy::Average => "average",
            Policy::Random => "random",
        }
    }
}

impl std::str::FromStr for Policy {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Policy::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| format!("unknown scheduling policy '{s}'"))
    }
}

impl std::fmt::Display for Policy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A front-layer remote gate asking for EPR pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Request {
    /// Global node key; lower keys win ties.
    pub key: u64,
    /// Effective priority (after aging).
    pub priority: u32,
    pub qpus: (usize, usize),
}

fn priority_order(reqs: &[Request]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..reqs.len()).collect();
    order.sort_by_key(|&i| (std::cmp::Reverse(reqs[i].priority), reqs[i].key));
    order
}

/// Splits `total` over `weights` by largest remainder; ties go to the
/// earlier entry.
pub fn largest_remainder(total: usize, weights: &[u64]) -> Vec<usize> {
    let sum: u64 = weights.iter().sum();
    if sum == 0 || total == 0 {
        return vec![0; weights.len()];
    }
    let total = total as u64;
    let mut share: Vec<usize> = weights.iter().map(|&w| (total * w / sum) as usize).collect();
    let given: u64 = share.iter().map(|&s| s as u64).sum();
    let mut rest: Vec<usize> = (0..weights.len()).collect();
    // remainder numerators compare exactly in integers
    rest.sort_by_key(|&i| (std::cmp::Reverse(total * weights[i] % sum), i));
    for &i in rest.iter().take((total - given) as usize) {
        share[i] += 1;
    }
    share
}

/// Pairs granted to each request this round; `budgets` (free communication
/// qubits per QPU) are debited on both endpoints.
pub fn allocate_round<R: Rng>(reqs: &[Request], budgets: &mut [usize], policy: Policy, rng: &mut R) -> Vec<usize> {
    let mut x = vec![0usize; reqs.len()];
    let order = priority_order(reqs);
    let fits = |b: &[usize], r: &Request| b[r.qpus.0] >= 1 && b[r.qpus.1] >= 1;
    let take = |b: &mut [usize], r: &Request, n: usize| {
        b[r.qpus.0] -= n;
        b[r.qpus.1] -= n;
    };
    match policy {
        Policy::Cloudqc => {
            for &i in &order {
                if fits(budgets, &reqs[i]) {
                    x[i] = 1;
                    take(budgets, &reqs[i], 1);
                }
            }
            // spare budget of each QPU split by priority + 1 among its granted nodes
            let mut share = vec![[0usize; 2]; reqs.len()];
            for q in 0..budgets.len() {
                let claim: Vec<(usize, usize)> = order
                    .iter()
                    .filter(|&&i| x[i] > 0)
                    .filter_map(|&i| {
                        let r = &reqs[i];
                        if r.qpus.0 == q {
                            Some((i, 0))
                        } else if r.qpus.1 == q {
                            Some((i, 1))
                        } else {
                            None
                        }
                    })
                    .collect();
                if claim.is_empty() {
                    continue;
                }
                let w: Vec<u64> = claim.iter().map(|&(i, _)| reqs[i].priority as u64 + 1).collect();
                for (&(i, side), s) in claim.iter().zip(largest_remainder(budgets[q], &w)) {
                    share[i][side] = s;
                }
            }
            for &i in &order {
                if x[i] > 0 {
                    let extra = share[i][0].min(share[i][1]);
                    x[i] += extra;
                    take(budgets, &reqs[i], extra);
                }
            }
            for &i in &order {
                if x[i] > 0 {
                    let r = &reqs[i];
                    let extra = budgets[r.qpus.0].min(budgets[r.qpus.1]);
                    x[i] += extra;
                    take(budgets, r, extra);
                }
            }
        }
        Policy::Greedy => {
            for &i in &order {
                let r = &reqs[i];
                let n = budgets[r.qpus.0].min(budgets[r.qpus.1]);
                x[i] = n;
                take(budgets, r, n);
            }
        }
        Policy::Average => {
            let mut count = vec![0usize; budgets.len()];
            for r in reqs {
                count[r.qpus.0] += 1;
                count[r.qpus.1] += 1;
            }
            let floor: Vec<usize> = (0..budgets.len()).map(|q| budgets[q].checked_div(count[q]).unwrap_or(0)).collect();
            for (i, r) in reqs.iter().enumerate() {
                x[i] = floor[r.qpus.0].min(floor[r.qpus.1]);
            }
            for (i, r) in reqs.iter().enumerate() {
                take(budgets, r, x[i]);
            }
            let mut by_key: Vec<usize> = (0..reqs.len()).collect();
            by_key.sort_by_key(|&i| reqs[i].key);
            loop {
                let mut progress = false;
                for &i in &by_key {
                    if fits(budgets, &reqs[i]) {
                        x[i] += 1;
                        take(budgets, &reqs[i], 1);
                        progress = true;
                    }
                }
                if !progress {
                    break;
                }
            }
        }
        Policy::Random => loop {
            let eligible: Vec<usize> = (0..reqs.len()).filter(|&i| fits(budgets, &reqs[i])).collect();
            if eligible.is_empty() {
                break;
            }
            let i = eligible[rng.gen_range(0..eligible.len())];
            x[i] += 1;
            take(budgets, &reqs[i], 1);
        },
    }
    x
}
