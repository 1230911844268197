//! Greedy agglomerative modularity maximization over the QPU graph.

use serde::{Deserialize, Serialize};

use crate::cloud::CloudTopology;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightMode {
    /// Every link weighs 1.
    Uniform,
    /// Link weight grows with the free computing qubits of its endpoints.
    #[default]
    Resource,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommunityProfile {
    /// QPU sets, each sorted, ordered by smallest member.
    pub communities: Vec<Vec<usize>>,
    pub modularity: f64,
    /// Free computing qubits per community.
    pub free_qubits: Vec<usize>,
}

impl CommunityProfile {
    pub fn community_of(&self, qpu: usize) -> Option<usize> {
        self.communities.iter().position(|c| c.contains(&qpu))
    }
}

/// Weighted link list. In resource mode a link weighs
/// `1 + (free_a + free_b) / (2 · max_capacity)`.
pub fn link_weights(t: &CloudTopology, mode: WeightMode) -> Vec<(usize, usize, f64)> {
    let cap = t.qpus().iter().map(|q| q.computing_capacity).max().unwrap_or(1).max(1) as f64;
    t.links()
        .iter()
        .map(|&(a, b)| {
            let w = match mode {
                WeightMode::Uniform => 1.0,
                WeightMode::Resource => {
                    1.0 + (t.qpu(a).computing_free + t.qpu(b).computing_free) as f64 / (2.0 * cap)
                }
            };
            (a, b, w)
        })
        .collect()
}

/// Newman modularity `Q = Σ_c [ in_c / 2m − (tot_c / 2m)² ]` of a membership vector.
pub fn modularity(n: usize, edges: &[(usize, usize, f64)], membership: &[usize]) -> f64 {
    let two_m: f64 = 2.0 * edges.iter().map(|e| e.2).sum::<f64>();
    if two_m == 0.0 {
        return 0.0;
    }
    let k = membership.iter().copied().max().map_or(0, |m| m + 1);
    let mut inside = vec![0.0; k];
    let mut tot = vec![0.0; k];
    for &(a, b, w) in edges {
        tot[membership[a]] += w;
        tot[membership[b]] += w;
        if membership[a] == membership[b] {
            inside[membership[a]] += 2.0 * w;
        }
    }
    debug_assert_eq!(membership.len(), n);
    (0..k).map(|c| inside[c] / two_m - (tot[c] / two_m).powi(2)).sum()
}

const GAIN_EPS: f64 = 1e-12;

/// Clauset–Newman–Moore style merging: repeatedly join the connected pair of
/// communities with the largest modularity gain, ties to the smallest id
/// pair, until no merge improves modularity. Returns a membership vector with
/// communities numbered by smallest member.
pub fn greedy_modularity(n: usize, edges: &[(usize, usize, f64)]) -> Vec<usize> {
    let two_m: f64 = 2.0 * edges.iter().map(|e| e.2).sum::<f64>();
    let mut label: Vec<usize> = (0..n).collect();
    if two_m == 0.0 {
        return label;
    }
    // e[a][b]: fraction of edge ends between communities a and b (one direction)
    let mut e = vec![vec![0.0f64; n]; n];
    let mut a = vec![0.0f64; n];
    for &(u, v, w) in edges {
        e[u][v] += w / two_m;
        e[v][u] += w / two_m;
        a[u] += w / two_m;
        a[v] += w / two_m;
    }
    let mut alive = vec![true; n];
    loop {
        let mut best: Option<(f64, usize, usize)> = None;
        for i in 0..n {
            if !alive[i] {
                continue;
            }
            for j in i + 1..n {
                if !alive[j] || e[i][j] <= 0.0 {
                    continue;
                }
                let gain = 2.0 * (e[i][j] - a[i] * a[j]);
                if best.is_none_or(|(bg, _, _)| gain > bg + GAIN_EPS) {
                    best = Some((gain, i, j));
                }
            }
        }
        let Some((gain, i, j)) = best else { break };
        if gain <= GAIN_EPS {
            break;
        }
        // merge j into i
        for x in 0..n {
            if x != i && x != j {
                e[i][x] += e[j][x];
                e[x][i] = e[i][x];
                e[j][x] = 0.0;
                e[x][j] = 0.0;
            }
        }
        e[i][i] += e[j][j] + 2.0 * e[i][j];
        e[i][j] = 0.0;
        e[j][i] = 0.0;
        a[i] += a[j];
        alive[j] = false;
        for l in label.iter_mut() {
            if *l == j {
                *l = i;
            }
        }
    }
    // renumber by smallest member
    let mut remap = vec![usize::MAX; n];
    let mut next = 0;
    for v in 0..n {
        if remap[label[v]] == usize::MAX {
            remap[label[v]] = next;
            next += 1;
        }
    }
    label.iter().map(|&l| remap[l]).collect()
}

pub fn detect_communities(t: &CloudTopology, mode: WeightMode) -> CommunityProfile {
    let n = t.num_qpus();
    let edges = link_weights(t, mode);
    let membership = greedy_modularity(n, &edges);
    let k = membership.iter().copied().max().map_or(0, |m| m + 1);
    let mut communities = vec![Vec::new(); k];
    for (q, &c) in membership.iter().enumerate() {
        communities[c].push(q);
    }
    let free_qubits = communities
        .iter()
        .map(|c| c.iter().map(|&q| t.qpu(q).computing_free).sum())
        .collect();
    CommunityProfile {
        modularity: modularity(n, &edges, &membership),
        communities,
        free_qubits,
    }
}
