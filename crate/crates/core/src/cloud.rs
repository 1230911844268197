//! QPU cluster model: topology, per-QPU qubit pools and hop distances.

use std::collections::VecDeque;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CloudError {
    #[error("invalid topology parameters: {0}")]
    BadParams(String),
    #[error("no connected topology drawn after {0} attempts")]
    ConnectivityFailure(usize),
    #[error("QPU {qpu}: requested {requested} qubits but only {free} free")]
    InsufficientCapacity { qpu: usize, requested: usize, free: usize },
    #[error("QPU {qpu}: releasing {amount} qubits would exceed capacity")]
    OverRelease { qpu: usize, amount: usize },
    #[error("invalid topology file: {0}")]
    BadFile(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QpuState {
    pub id: usize,
    pub computing_capacity: usize,
    pub computing_free: usize,
    pub comm_capacity: usize,
    pub comm_free: usize,
}

impl QpuState {
    pub fn new(id: usize, computing: usize, comm: usize) -> Self {
        QpuState {
            id,
            computing_capacity: computing,
            computing_free: computing,
            comm_capacity: comm,
            comm_free: comm,
        }
    }

    pub fn computing_used(&self) -> usize {
        self.computing_capacity - self.computing_free
    }
}

/// Parameters of a random Erdős–Rényi cluster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TopologyParams {
    pub num_qpus: usize,
    pub edge_prob: f64,
    pub comp_qubits: usize,
    pub comm_qubits: usize,
    /// Cap on quantum links per QPU; `None` means unlimited.
    #[serde(default)]
    pub max_degree: Option<usize>,
}

impl Default for TopologyParams {
    fn default() -> Self {
        TopologyParams {
            num_qpus: 20,
            edge_prob: 0.3,
            comp_qubits: 20,
            comm_qubits: 5,
            max_degree: None,
        }
    }
}

const MAX_DRAWS: usize = 1000;

/// QPU graph plus mutable per-QPU resource state. Links and distances never
/// change after construction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CloudTopology {
    qpus: Vec<QpuState>,
    links: Vec<(usize, usize)>,
    adj: Vec<Vec<usize>>,
    distance: Vec<Vec<u32>>,
}

/// On-disk topology: `{"qpus":[{"id":0,"comp":20,"comm":5}], "links":[[0,1]]}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopologyFile {
    pub qpus: Vec<QpuEntry>,
    pub links: Vec<[usize; 2]>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QpuEntry {
    pub id: usize,
    pub comp: usize,
    pub comm: usize,
}

pub const UNREACHABLE: u32 = u32::MAX;

impl CloudTopology {
    /// Builds a topology from explicit QPUs and links. Fails if the graph is disconnected.
    pub fn new(qpus: Vec<QpuState>, links: &[(usize, usize)]) -> Result<Self, CloudError> {
        let n = qpus.len();
        if n == 0 {
            return Err(CloudError::BadParams("topology needs at least one QPU".into()));
        }
        for (i, q) in qpus.iter().enumerate() {
            if q.id != i {
                return Err(CloudError::BadParams(format!("QPU ids must be 0..{n}, found {} at {i}", q.id)));
            }
        }
        let mut adj = vec![Vec::new(); n];
        let mut norm: Vec<(usize, usize)> = Vec::with_capacity(links.len());
        for &(a, b) in links {
            if a >= n || b >= n || a == b {
                return Err(CloudError::BadParams(format!("invalid link ({a},{b})")));
            }
            norm.push((a.min(b), a.max(b)));
        }
        norm.sort_unstable();
        norm.dedup();
        for &(a, b) in &norm {
            adj[a].push(b);
            adj[b].push(a);
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        let distance = (0..n).map(|s| bfs_distances(&adj, s)).collect::<Vec<_>>();
        if distance[0].contains(&UNREACHABLE) {
            return Err(CloudError::BadParams("topology is disconnected".into()));
        }
        Ok(CloudTopology {
            qpus,
            links: norm,
            adj,
            distance,
        })
    }

    /// Erdős–Rényi draw, resampled until connected. Deterministic in `seed`.
    pub fn random(params: &TopologyParams, seed: u64) -> Result<Self, CloudError> {
        if params.num_qpus < 2 {
            return Err(CloudError::BadParams("need at least 2 QPUs".into()));
        }
        if !(params.edge_prob > 0.0 && params.edge_prob <= 1.0) {
            return Err(CloudError::BadParams(format!("edge probability {} not in (0,1]", params.edge_prob)));
        }
        let n = params.num_qpus;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..MAX_DRAWS {
            let mut degree = vec![0usize; n];
            let mut links = Vec::new();
            for a in 0..n {
                for b in a + 1..n {
                    // always draw so the stream does not depend on the degree cap
                    let hit = rng.gen_bool(params.edge_prob);
                    let capped = params
                        .max_degree
                        .is_some_and(|cap| degree[a] >= cap || degree[b] >= cap);
                    if hit && !capped {
                        degree[a] += 1;
                        degree[b] += 1;
                        links.push((a, b));
                    }
                }
            }
            let qpus = (0..n)
                .map(|id| QpuState::new(id, params.comp_qubits, params.comm_qubits))
                .collect();
            if let Ok(t) = CloudTopology::new(qpus, &links) {
                return Ok(t);
            }
        }
        Err(CloudError::ConnectivityFailure(MAX_DRAWS))
    }

    pub fn from_file(file: &TopologyFile) -> Result<Self, CloudError> {
        let mut entries = file.qpus.clone();
        entries.sort_by_key(|e| e.id);
        let qpus = entries
            .iter()
            .map(|e| QpuState::new(e.id, e.comp, e.comm))
            .collect();
        let links: Vec<(usize, usize)> = file.links.iter().map(|l| (l[0], l[1])).collect();
        CloudTopology::new(qpus, &links).map_err(|e| CloudError::BadFile(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CloudError> {
        let text = std::fs::read_to_string(path).map_err(|e| CloudError::BadFile(format!("{}: {e}", path.display())))?;
        let file: TopologyFile = serde_json::from_str(&text).map_err(|e| CloudError::BadFile(e.to_string()))?;
        CloudTopology::from_file(&file)
    }

    pub fn to_file(&self) -> TopologyFile {
        TopologyFile {
            qpus: self
                .qpus
                .iter()
                .map(|q| QpuEntry {
                    id: q.id,
                    comp: q.computing_capacity,
                    comm: q.comm_capacity,
                })
                .collect(),
            links: self.links.iter().map(|&(a, b)| [a, b]).collect(),
        }
    }

    pub fn num_qpus(&self) -> usize {
        self.qpus.len()
    }

    pub fn qpus(&self) -> &[QpuState] {
        &self.qpus
    }

    pub fn qpu(&self, id: usize) -> &QpuState {
        &self.qpus[id]
    }

    pub fn links(&self) -> &[(usize, usize)] {
        &self.links
    }

    pub fn neighbors(&self, q: usize) -> &[usize] {
        &self.adj[q]
    }

    /// Hop distance between two QPUs.
    pub fn distance(&self, a: usize, b: usize) -> u32 {
        self.distance[a][b]
    }

    pub fn distance_matrix(&self) -> &[Vec<u32>] {
        &self.distance
    }

    pub fn total_computing_free(&self) -> usize {
        self.qpus.iter().map(|q| q.computing_free).sum()
    }

    pub fn total_computing_capacity(&self) -> usize {
        self.qpus.iter().map(|q| q.computing_capacity).sum()
    }

    pub fn max_computing_free(&self) -> usize {
        self.qpus.iter().map(|q| q.computing_free).max().unwrap_or(0)
    }

    pub fn reserve(&mut self, qpu: usize, computing: usize) -> Result<&QpuState, CloudError> {
        let q = &mut self.qpus[qpu];
        if computing > q.computing_free {
            return Err(CloudError::InsufficientCapacity {
                qpu,
                requested: computing,
                free: q.computing_free,
            });
        }
        q.computing_free -= computing;
        Ok(q)
    }

    pub fn release(&mut self, qpu: usize, computing: usize) -> Result<&QpuState, CloudError> {
        let q = &mut self.qpus[qpu];
        if q.computing_free + computing > q.computing_capacity {
            return Err(CloudError::OverRelease { qpu, amount: computing });
        }
        q.computing_free += computing;
        Ok(q)
    }

    pub fn reserve_comm(&mut self, qpu: usize, pairs: usize) -> Result<(), CloudError> {
        let q = &mut self.qpus[qpu];
        if pairs > q.comm_free {
            return Err(CloudError::InsufficientCapacity {
                qpu,
                requested: pairs,
                free: q.comm_free,
            });
        }
        q.comm_free -= pairs;
        Ok(())
    }

    pub fn release_comm(&mut self, qpu: usize, pairs: usize) -> Result<(), CloudError> {
        let q = &mut self.qpus[qpu];
        if q.comm_free + pairs > q.comm_capacity {
            return Err(CloudError::OverRelease { qpu, amount: pairs });
        }
        q.comm_free += pairs;
        Ok(())
    }

    /// Restores every QPU to fully free.
    pub fn reset(&mut self) {
        for q in &mut self.qpus {
            q.computing_free = q.computing_capacity;
            q.comm_free = q.comm_capacity;
        }
    }

    /// Eccentricity of `q` restricted to the QPUs in `members`.
    pub fn eccentricity_within(&self, q: usize, members: &[usize]) -> u32 {
        members.iter().map(|&m| self.distance[q][m]).max().unwrap_or(0)
    }

    /// QPUs in breadth-first order from `start`, neighbors visited by ascending id.
    pub fn bfs_order(&self, start: usize) -> Vec<usize> {
        let mut seen = vec![false; self.num_qpus()];
        let mut order = Vec::with_capacity(self.num_qpus());
        let mut queue = VecDeque::from([start]);
        seen[start] = true;
        while let Some(u) = queue.pop_front() {
            order.push(u);
            for &v in &self.adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    queue.push_back(v);
                }
            }
        }
        order
    }
}

fn bfs_distances(adj: &[Vec<usize>], s: usize) -> Vec<u32> {
    let mut dist = vec![UNREACHABLE; adj.len()];
    dist[s] = 0;
    let mut queue = VecDeque::from([s]);
    while let Some(u) = queue.pop_front() {
        for &v in &adj[u] {
            if dist[v] == UNREACHABLE {
                dist[v] = dist[u] + 1;
                queue.push_back(v);
            }
        }
    }
    dist
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn floyd_warshall(t: &CloudTopology) -> Vec<Vec<u32>> {
        let n = t.num_qpus();
        let inf = u32::MAX / 4;
        let mut d = vec![vec![inf; n]; n];
        for i in 0..n {
            d[i][i] = 0;
        }
        for &(a, b) in t.links() {
            d[a][b] = 1;
            d[b][a] = 1;
        }
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    if d[i][k] + d[k][j] < d[i][j] {
                        d[i][j] = d[i][k] + d[k][j];
                    }
                }
            }
        }
        d
    }

    #[test]
    fn default_cluster_shape() {
        let t = CloudTopology::random(&TopologyParams::default(), 7).unwrap();
        assert_eq!(t.num_qpus(), 20);
        assert!(t.qpus().iter().all(|q| q.computing_capacity == 20 && q.comm_capacity == 5));
        assert!(t.qpus().iter().all(|q| q.computing_free == 20 && q.comm_free == 5));
    }

    #[test]
    fn two_qpus_full_probability() {
        let p = TopologyParams {
            num_qpus: 2,
            edge_prob: 1.0,
            comp_qubits: 4,
            comm_qubits: 1,
            max_degree: None,
        };
        let t = CloudTopology::random(&p, 99).unwrap();
        assert_eq!(t.links(), &[(0, 1)]);
        assert_eq!(t.distance_matrix(), &[vec![0, 1], vec![1, 0]]);
    }

    #[test]
    fn same_seed_same_topology() {
        let p = TopologyParams::default();
        assert_eq!(CloudTopology::random(&p, 3).unwrap(), CloudTopology::random(&p, 3).unwrap());
    }

    #[test]
    fn degenerate_probability_fails() {
        let p = TopologyParams {
            num_qpus: 40,
            edge_prob: 1e-6,
            ..TopologyParams::default()
        };
        assert_eq!(CloudTopology::random(&p, 1), Err(CloudError::ConnectivityFailure(MAX_DRAWS)));
        let bad = TopologyParams {
            edge_prob: 0.0,
            ..TopologyParams::default()
        };
        assert!(matches!(CloudTopology::random(&bad, 1), Err(CloudError::BadParams(_))));
    }

    #[test]
    fn degree_cap_respected() {
        let p = TopologyParams {
            num_qpus: 12,
            edge_prob: 0.9,
            max_degree: Some(3),
            ..TopologyParams::default()
        };
        let t = CloudTopology::random(&p, 5).unwrap();
        assert!((0..12).all(|q| t.neighbors(q).len() <= 3));
    }

    #[test]
    fn reserve_release() {
        let mut t = CloudTopology::random(&TopologyParams::default(), 1).unwrap();
        assert_eq!(t.reserve(0, 20).unwrap().computing_free, 0);
        assert_eq!(
            t.reserve(1, 21).unwrap_err(),
            CloudError::InsufficientCapacity {
                qpu: 1,
                requested: 21,
                free: 20
            }
        );
        let before = t.qpu(2).clone();
        t.reserve(2, 5).unwrap();
        t.release(2, 5).unwrap();
        assert_eq!(t.qpu(2), &before);
        assert!(t.release(2, 1).is_err());
    }

    #[test]
    fn file_roundtrip() {
        let t = CloudTopology::random(&TopologyParams::default(), 11).unwrap();
        let json = serde_json::to_string(&t.to_file()).unwrap();
        let back = CloudTopology::from_file(&serde_json::from_str(&json).unwrap()).unwrap();
        assert_eq!(back, t);
        let disconnected = TopologyFile {
            qpus: vec![
                QpuEntry { id: 0, comp: 1, comm: 1 },
                QpuEntry { id: 1, comp: 1, comm: 1 },
                QpuEntry { id: 2, comp: 1, comm: 1 },
            ],
            links: vec![[0, 1]],
        };
        assert!(CloudTopology::from_file(&disconnected).is_err());
    }

    proptest! {
        #[test]
        fn bfs_matches_floyd_warshall(n in 2usize..50, p in 0.05f64..1.0, seed in any::<u64>()) {
            let params = TopologyParams { num_qpus: n, edge_prob: p, ..TopologyParams::default() };
            if let Ok(t) = CloudTopology::random(&params, seed) {
                let fw = floyd_warshall(&t);
                for i in 0..n {
                    prop_assert_eq!(t.distance(i, i), 0);
                    for j in 0..n {
                        prop_assert_eq!(t.distance(i, j), fw[i][j]);
                        prop_assert_eq!(t.distance(i, j), t.distance(j, i));
                        for k in 0..n {
                            prop_assert!(t.distance(i, j) <= t.distance(i, k) + t.distance(k, j));
                        }
                    }
                }
            }
        }

        #[test]
        fn bookkeeping_conservation(ops in proptest::collection::vec((0usize..4, 0usize..8, any::<bool>()), 0..60)) {
            let p = TopologyParams { num_qpus: 4, edge_prob: 1.0, comp_qubits: 10, comm_qubits: 2, max_degree: None };
            let mut t = CloudTopology::random(&p, 0).unwrap();
            let mut net = [0i64; 4];
            for (q, amount, is_reserve) in ops {
                if is_reserve {
                    if t.reserve(q, amount).is_ok() { net[q] += amount as i64; }
                } else if t.release(q, amount).is_ok() {
                    net[q] -= amount as i64;
                }
                for i in 0..4 {
                    let qs = t.qpu(i);
                    prop_assert!(qs.computing_free <= qs.computing_capacity);
                    prop_assert_eq!(net[i], (qs.computing_capacity - qs.computing_free) as i64);
                }
            }
        }
    }
}
