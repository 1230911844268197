//! Gate dependency DAG, qubit interaction graph, depth and the batch-ordering metric.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use crate::partition::{graph_partition, PartitionError, PartitionResult};
use crate::qasm::Circuit;

/// Dependency DAG over the computational gates of a circuit. Node ids follow
/// program order, so `0..len()` is already a topological order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GateDag {
    gate_of: Vec<usize>,
    preds: Vec<Vec<usize>>,
    succs: Vec<Vec<usize>>,
}

impl GateDag {
    pub fn len(&self) -> usize {
        self.gate_of.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gate_of.is_empty()
    }

    /// Index into `Circuit::gates` for a DAG node.
    pub fn gate_index(&self, node: usize) -> usize {
        self.gate_of[node]
    }

    pub fn preds(&self, node: usize) -> &[usize] {
        &self.preds[node]
    }

    pub fn succs(&self, node: usize) -> &[usize] {
        &self.succs[node]
    }

    pub fn in_degree(&self, node: usize) -> usize {
        self.preds[node].len()
    }

    pub fn out_degree(&self, node: usize) -> usize {
        self.succs[node].len()
    }

    pub fn num_edges(&self) -> usize {
        self.succs.iter().map(Vec::len).sum()
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.succs
            .iter()
            .enumerate()
            .flat_map(|(u, vs)| vs.iter().map(move |&v| (u, v)))
    }

    /// Nodes whose predecessors have all executed.
    pub fn front_layer(&self, executed: &[bool]) -> Vec<usize> {
        (0..self.len())
            .filter(|&n| !executed[n] && self.preds[n].iter().all(|&p| executed[p]))
            .collect()
    }

    /// ASAP level of every node, starting at 1.
    pub fn levels(&self) -> Vec<usize> {
        let mut level = vec![0usize; self.len()];
        for n in 0..self.len() {
            level[n] = 1 + self.preds[n].iter().map(|&p| level[p]).max().unwrap_or(0);
        }
        level
    }

    /// Longest path counted in gates.
    pub fn longest_path(&self) -> usize {
        self.levels().into_iter().max().unwrap_or(0)
    }

    /// Kahn's algorithm; `None` if a cycle exists.
    pub fn topological_order(&self) -> Option<Vec<usize>> {
        let mut indeg: Vec<usize> = self.preds.iter().map(Vec::len).collect();
        let mut stack: Vec<usize> = (0..self.len()).rev().filter(|&n| indeg[n] == 0).collect();
        let mut order = Vec::with_capacity(self.len());
        while let Some(u) = stack.pop() {
            order.push(u);
            for &v in self.succs[u].iter().rev() {
                indeg[v] -= 1;
                if indeg[v] == 0 {
                    stack.push(v);
                }
            }
        }
        (order.len() == self.len()).then_some(order)
    }
}

/// Edge from `g` to `g'` iff `g` is the latest earlier gate sharing a qubit with `g'`.
/// Measurements and barriers are left out.
pub fn build_dag(c: &Circuit) -> GateDag {
    let mut last: Vec<Option<usize>> = vec![None; c.num_qubits];
    let mut dag = GateDag {
        gate_of: Vec::new(),
        preds: Vec::new(),
        succs: Vec::new(),
    };
    for (gi, gate) in c.gates.iter().enumerate() {
        if gate.is_marker() {
            continue;
        }
        let node = dag.gate_of.len();
        let mut preds: Vec<usize> = gate.operands.iter().filter_map(|&q| last[q]).collect();
        preds.sort_unstable();
        preds.dedup();
        for &p in &preds {
            dag.succs[p].push(node);
        }
        for &q in &gate.operands {
            last[q] = Some(node);
        }
        dag.gate_of.push(gi);
        dag.preds.push(preds);
        dag.succs.push(Vec::new());
    }
    dag
}

/// Gate-count depth. A trailing measurement layer counts as one extra level
/// when the circuit measures anything.
pub fn circuit_depth(c: &Circuit) -> usize {
    build_dag(c).longest_path() + usize::from(c.has_measurements())
}

/// Weighted qubit interaction graph: `weight(i, j)` is the number of
/// two-qubit gates acting on `{i, j}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InteractionGraph {
    num_vertices: usize,
    adj: Vec<Vec<(usize, u64)>>,
}

impl InteractionGraph {
    /// Builds from an undirected edge list; parallel edges are summed, self-loops dropped.
    pub fn from_edges(num_vertices: usize, edges: impl IntoIterator<Item = (usize, usize, u64)>) -> Self {
        let mut acc: HashMap<(usize, usize), u64> = HashMap::new();
        for (a, b, w) in edges {
            assert!(a < num_vertices && b < num_vertices, "edge ({a},{b}) out of range");
            if a == b || w == 0 {
                continue;
            }
            *acc.entry((a.min(b), a.max(b))).or_default() += w;
        }
        let mut adj = vec![Vec::new(); num_vertices];
        for ((a, b), w) in acc {
            adj[a].push((b, w));
            adj[b].push((a, w));
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        InteractionGraph { num_vertices, adj }
    }

    pub fn num_vertices(&self) -> usize {
        self.num_vertices
    }

    pub fn neighbors(&self, v: usize) -> &[(usize, u64)] {
        &self.adj[v]
    }

    pub fn weight(&self, a: usize, b: usize) -> u64 {
        self.adj[a]
            .binary_search_by_key(&b, |&(n, _)| n)
            .map(|i| self.adj[a][i].1)
            .unwrap_or(0)
    }

    /// Edges with `a < b`, in ascending order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, u64)> + '_ {
        self.adj
            .iter()
            .enumerate()
            .flat_map(|(a, list)| list.iter().filter(move |&&(b, _)| a < b).map(move |&(b, w)| (a, b, w)))
    }

    pub fn num_edges(&self) -> usize {
        self.edges().count()
    }

    pub fn total_weight(&self) -> u64 {
        self.edges().map(|(_, _, w)| w).sum()
    }

    pub fn weighted_degree(&self, v: usize) -> u64 {
        self.adj[v].iter().map(|&(_, w)| w).sum()
    }
}

pub fn build_interaction_graph(c: &Circuit) -> InteractionGraph {
    InteractionGraph::from_edges(
        c.num_qubits,
        c.gates.iter().filter_map(|g| g.pair()).map(|(a, b)| (a, b, 1)),
    )
}

/// Weights of the batch-ordering metric
/// `λ1 · #2q/n + λ2 · n + λ3 · depth`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BatchWeights {
    pub density: f64,
    pub qubits: f64,
    pub depth: f64,
}

impl Default for BatchWeights {
    fn default() -> Self {
        BatchWeights {
            density: 1.0,
            qubits: 1.0,
            depth: 0.5,
        }
    }
}

impl BatchWeights {
    pub fn new(density: f64, qubits: f64, depth: f64) -> Self {
        BatchWeights { density, qubits, depth }
    }
}

/// The three raw terms of the batch metric for one circuit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricTerms {
    pub density: f64,
    pub qubits: f64,
    pub depth: f64,
}

impl MetricTerms {
    pub fn of(c: &Circuit) -> Self {
        MetricTerms {
            density: c.num_two_qubit_gates() as f64 / c.num_qubits as f64,
            qubits: c.num_qubits as f64,
            depth: circuit_depth(c) as f64,
        }
    }

    pub fn score(&self, w: &BatchWeights) -> f64 {
        w.density * self.density + w.qubits * self.qubits + w.depth * self.depth
    }
}

/// Raw (unnormalized) batch metric of a single circuit.
pub fn batch_metric(c: &Circuit, w: &BatchWeights) -> f64 {
    MetricTerms::of(c).score(w)
}

type PartitionKey = (usize, u64, u64);

/// Memoized partitions keyed by `(k, alpha bits, seed)`. Partitioning is a
/// pure function of the graph and these keys, so cached and fresh results
/// agree.
#[derive(Debug, Default)]
pub struct PartitionCache(Mutex<HashMap<PartitionKey, Arc<PartitionResult>>>);

impl Clone for PartitionCache {
    fn clone(&self) -> Self {
        PartitionCache(Mutex::new(self.0.lock().expect("cache poisoned").clone()))
    }
}

/// A circuit bundled with its DAG, interaction graph and batch-metric terms.
#[derive(Debug, Clone)]
pub struct AnalyzedCircuit {
    pub circuit: Circuit,
    pub dag: GateDag,
    pub graph: InteractionGraph,
    pub terms: MetricTerms,
    partitions: PartitionCache,
}

impl AnalyzedCircuit {
    pub fn new(circuit: Circuit) -> Self {
        let dag = build_dag(&circuit);
        let graph = build_interaction_graph(&circuit);
        let terms = MetricTerms {
            density: circuit.num_two_qubit_gates() as f64 / circuit.num_qubits as f64,
            qubits: circuit.num_qubits as f64,
            depth: (dag.longest_path() + usize::from(circuit.has_measurements())) as f64,
        };
        AnalyzedCircuit { circuit, dag, graph, terms, partitions: PartitionCache::default() }
    }

    /// Cached [`graph_partition`] of the interaction graph.
    pub fn partition(&self, k: usize, alpha: f64, seed: u64) -> Result<Arc<PartitionResult>, PartitionError> {
        let key = (k, alpha.to_bits(), seed);
        if let Some(r) = self.partitions.0.lock().expect("cache poisoned").get(&key) {
            return Ok(Arc::clone(r));
        }
        let r = Arc::new(graph_partition(&self.graph, k, alpha, seed)?);
        self.partitions.0.lock().expect("cache poisoned").insert(key, Arc::clone(&r));
        Ok(r)
    }

    pub fn name(&self) -> &str {
        &self.circuit.name
    }

    pub fn num_qubits(&self) -> usize {
        self.circuit.num_qubits
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qasm::{generate_circuit, parse_qasm, Family, GenParams};

    fn ghz127() -> Circuit {
        generate_circuit(Family::Ghz, 127, &GenParams::default()).unwrap()
    }

    #[test]
    fn vqe_front_layer() {
        // 4-qubit VQE fragment: H on q0,q2,q3 first; cx(q2,q1) waits on nothing
        // but appears after them in program order.
        let c = parse_qasm(
            "qreg q[4]; h q[0]; h q[2]; h q[3]; cx q[2],q[1]; cx q[0],q[1]; cx q[3],q[2];",
        )
        .unwrap();
        let dag = build_dag(&c);
        let front = dag.front_layer(&vec![false; dag.len()]);
        assert_eq!(front, vec![0, 1, 2]);
        // cx(q0,q1) waits on h q0 and cx(q2,q1)
        assert_eq!(dag.preds(4), &[0, 3]);
    }

    #[test]
    fn single_gate() {
        let c = parse_qasm("qreg q[1]; h q[0];").unwrap();
        let dag = build_dag(&c);
        assert_eq!((dag.len(), dag.num_edges()), (1, 0));
        assert_eq!(circuit_depth(&c), 1);
    }

    #[test]
    fn disjoint_gates_depth_one() {
        let c = parse_qasm("qreg q[2]; h q[0]; x q[1];").unwrap();
        assert_eq!(circuit_depth(&c), 1);
    }

    #[test]
    fn ghz_chain_is_a_path() {
        let c = ghz127();
        let dag = build_dag(&c);
        // brute force: each cx after the first depends exactly on its predecessor in the chain
        let cx_nodes: Vec<usize> = (0..dag.len()).filter(|&n| c.gates[dag.gate_index(n)].is_two_qubit()).collect();
        assert_eq!(cx_nodes.len(), 126);
        for w in cx_nodes.windows(2) {
            assert_eq!(dag.preds(w[1]), &[w[0]]);
        }
        assert_eq!(dag.num_edges(), 126);
        assert_eq!(circuit_depth(&c), 128);
    }

    #[test]
    fn interaction_weights() {
        let c = parse_qasm("qreg q[3]; cx q[0],q[1]; cx q[0],q[1]; cx q[1],q[2];").unwrap();
        let g = build_interaction_graph(&c);
        assert_eq!(g.edges().collect::<Vec<_>>(), vec![(0, 1, 2), (1, 2, 1)]);
        assert_eq!(g.weight(1, 0), 2);
        assert_eq!(g.weight(0, 2), 0);
    }

    #[test]
    fn cat_is_path_graph() {
        let c = generate_circuit(Family::Cat, 65, &GenParams::default()).unwrap();
        let g = build_interaction_graph(&c);
        assert_eq!(g.num_edges(), 64);
        assert!(g.edges().all(|(a, b, w)| b == a + 1 && w == 1));
    }

    #[test]
    fn no_two_qubit_gates_empty_graph() {
        let c =parse_qasm("qreg q[3]; creg c[3]; h q; measure q -> c;").unwrap();
        assert_eq!(build_interaction_graph(&c).num_edges(), 0);
    }

    #[test]
    fn batch_metric_values() {
        let c = ghz127();
        let v = batch_metric(&c, &BatchWeights::new(1.0, 1.0, 1.0));
        assert!((v - (126.0 / 127.0 + 127.0 + 128.0)).abs() < 1e-12);
        assert_eq!(batch_metric(&c, &BatchWeights::new(0.0, 1.0, 0.0)), 127.0);
        let local = parse_qasm("qreg q[2]; h q;").unwrap();
        assert_eq!(batch_metric(&local, &BatchWeights::new(1.0, 0.0, 0.0)), 0.0);
    }

    #[test]
    fn peeling_takes_depth_rounds() {
        let c = parse_qasm("qreg q[3]; h q[0]; cx q[0],q[1]; x q[2]; cx q[1],q[2]; h q[0];").unwrap();
        let dag = build_dag(&c);
        let mut done = vec![false; dag.len()];
        let mut rounds = 0;
        while done.iter().any(|d| !d) {
            for n in dag.front_layer(&done) {
                done[n] = true;
            }
            rounds += 1;
        }
        assert_eq!(rounds, dag.longest_path());
        assert_eq!(rounds, 3);
    }
}
