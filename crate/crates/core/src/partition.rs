//! Balanced min-cut partitioning of interaction graphs.
//!
//! Multilevel recursive bisection: heavy-edge matching coarsens the graph,
//! greedy graph growing seeds a bisection on the coarsest level, and
//! Fiduccia–Mattheyses passes refine it on the way back up. Every final part
//! holds at most `ceil((1 + α) · n / k)` vertices.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::InteractionGraph;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PartitionError {
    #[error("cannot split {n} vertices into {k} non-empty parts")]
    InfeasibleBalance { n: usize, k: usize },
    #[error("invalid partition parameters: {0}")]
    BadParams(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionResult {
    pub k: usize,
    /// Part index of every vertex.
    pub assignment: Vec<usize>,
    pub cut_weight: u64,
    pub imbalance: f64,
    pub part_sizes: Vec<usize>,
}

/// Largest part size allowed for `n` vertices in `k` parts at imbalance `alpha`.
pub fn max_part_size(n: usize, k: usize, alpha: f64) -> usize {
    let bound = (1.0 + alpha) * n as f64 / k as f64;
    // absorb float noise such as 1.1 * 10 / 2 = 5.500000000000001
    ((bound - 1e-9).ceil() as usize).max(1)
}

pub fn cut_weight(g: &InteractionGraph, assignment: &[usize]) -> u64 {
    g.edges()
        .filter(|&(a, b, _)| assignment[a] != assignment[b])
        .map(|(_, _, w)| w)
        .sum()
}

/// Recomputes cut and sizes from the assignment and checks them against the
/// stored values and the balance bound.
pub fn verify_partition(g: &InteractionGraph, r: &PartitionResult) -> bool {
    let n = g.num_vertices();
    if r.k == 0 || r.assignment.len() != n || r.part_sizes.len() != r.k {
        return false;
    }
    if r.assignment.iter().any(|&p| p >= r.k) {
        return false;
    }
    let mut sizes = vec![0usize; r.k];
    for &p in &r.assignment {
        sizes[p] += 1;
    }
    let bound = max_part_size(n, r.k, r.imbalance);
    sizes == r.part_sizes && sizes.iter().all(|&s| s <= bound) && cut_weight(g, &r.assignment) == r.cut_weight
}

pub fn graph_partition(g: &InteractionGraph, k: usize, alpha: f64, seed: u64) -> Result<PartitionResult, PartitionError> {
    let n = g.num_vertices();
    if k == 0 {
        return Err(PartitionError::BadParams("k must be at least 1".into()));
    }
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(PartitionError::BadParams(format!("imbalance {alpha} must be a finite non-negative number")));
    }
    if k > n {
        return Err(PartitionError::InfeasibleBalance { n, k });
    }
    let bound = max_part_size(n, k, alpha);
    let graph = WGraph {
        vwgt: vec![1; n],
        adj: (0..n).map(|v| g.neighbors(v).to_vec()).collect(),
    };
    let mut assignment = vec![0usize; n];
    let vertices: Vec<usize> = (0..n).collect();
    recursive_bisect(&graph, &vertices, k, 0, bound, seed, &mut assignment);

    let mut part_sizes = vec![0usize; k];
    for &p in &assignment {
        part_sizes[p] += 1;
    }
    let result = PartitionResult {
        k,
        cut_weight: cut_weight(g, &assignment),
        assignment,
        imbalance: alpha,
        part_sizes,
    };
    debug_assert!(verify_partition(g, &result));
    Ok(result)
}

/// Vertex- and edge-weighted graph used internally; adjacency lists are sorted.
#[derive(Debug, Clone)]
struct WGraph {
    vwgt: Vec<u64>,
    adj: Vec<Vec<(usize, u64)>>,
}

impl WGraph {
    fn len(&self) -> usize {
        self.vwgt.len()
    }

    fn total_weight(&self) -> u64 {
        self.vwgt.iter().sum()
    }

    fn induced(&self, vertices: &[usize]) -> WGraph {
        let mut local = vec![usize::MAX; self.len()];
        for (i, &v) in vertices.iter().enumerate() {
            local[v] = i;
        }
        WGraph {
            vwgt: vertices.iter().map(|&v| self.vwgt[v]).collect(),
            adj: vertices
                .iter()
                .map(|&v| {
                    self.adj[v]
                        .iter()
                        .filter(|&&(u, _)| local[u] != usize::MAX)
                        .map(|&(u, w)| (local[u], w))
                        .collect()
                })
                .collect(),
        }
    }

    fn cut(&self, side: &[u8]) -> u64 {
        let mut cut = 0;
        for v in 0..self.len() {
            for &(u, w) in &self.adj[v] {
                if v < u && side[v] != side[u] {
                    cut += w;
                }
            }
        }
        cut
    }

    fn side_weight(&self, side: &[u8]) -> u64 {
        (0..self.len()).filter(|&v| side[v] == 0).map(|v| self.vwgt[v]).sum()
    }
}

fn recursive_bisect(
    graph: &WGraph,
    vertices: &[usize],
    k: usize,
    first_part: usize,
    bound: usize,
    seed: u64,
    assignment: &mut [usize],
) {
    if k == 1 {
        for &v in vertices {
            assignment[v] = first_part;
        }
        return;
    }
    let sub = graph.induced(vertices);
    let n = sub.total_weight();
    let k1 = k / 2;
    let k2 = k - k1;
    let b = bound as u64;
    let window = Window {
        lo: (k1 as u64).max(n.saturating_sub(k2 as u64 * b)),
        hi: (k1 as u64 * b).min(n - k2 as u64),
    };
    let target = ((n as f64) * k1 as f64 / k as f64).round() as u64;
    let side = multilevel_bisect(&sub, window, target.clamp(window.lo, window.hi), seed);

    let (left, right): (Vec<usize>, Vec<usize>) = vertices.iter().enumerate().fold(
        (Vec::new(), Vec::new()),
        |(mut l, mut r), (i, &v)| {
            if side[i] == 0 {
                l.push(v);
            } else {
                r.push(v);
            }
            (l, r)
        },
    );
    let next = seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(1);
    recursive_bisect(graph, &left, k1, first_part, bound, next, assignment);
    recursive_bisect(graph, &right, k2, first_part + k1, bound, next ^ 0xABCD, assignment);
}

/// Allowed range for the weight of side 0.
#[derive(Debug, Clone, Copy)]
struct Window {
    lo: u64,
    hi: u64,
}

impl Window {
    fn violation(&self, w: u64) -> u64 {
        if w < self.lo {
            self.lo - w
        } else {
            w.saturating_sub(self.hi)
        }
    }
}

const COARSEN_TO: usize = 20;

fn multilevel_bisect(graph: &WGraph, window: Window, target: u64, seed: u64) -> Vec<u8> {
    // coarsening hierarchy: (coarse graph, fine -> coarse map)
    let mut levels: Vec<(WGraph, Vec<usize>)> = Vec::new();
    let max_vwgt = (3 * graph.total_weight() / (2 * COARSEN_TO as u64)).max(1);
    loop {
        let current = levels.last().map(|(g, _)| g).unwrap_or(graph);
        if current.len() <= COARSEN_TO {
            break;
        }
        let (coarse, map) = heavy_edge_coarsen(current, max_vwgt);
        if coarse.len() as f64 > 0.95 * current.len() as f64 {
            break;
        }
        levels.push((coarse, map));
    }

    let coarsest = levels.last().map(|(g, _)| g).unwrap_or(graph);
    let mut side = initial_bisection(coarsest, window, target, seed);

    for i in (0..levels.len()).rev() {
        let map = &levels[i].1;
        let finer = if i == 0 { graph } else { &levels[i - 1].0 };
        side = map.iter().map(|&c| side[c]).collect();
        fm_refine(finer, &mut side, window);
    }
    enforce_window(graph, &mut side, window);
    side
}

/// Matches each vertex (ascending id) with its unmatched neighbor of heaviest
/// connecting edge, ties to the lowest id.
fn heavy_edge_coarsen(g: &WGraph, max_vwgt: u64) -> (WGraph, Vec<usize>) {
    let n = g.len();
    let mut mate = vec![usize::MAX; n];
    for v in 0..n {
        if mate[v] != usize::MAX {
            continue;
        }
        let mut best: Option<(u64, usize)> = None;
        for &(u, w) in &g.adj[v] {
            if mate[u] != usize::MAX || g.vwgt[u] + g.vwgt[v] > max_vwgt {
                continue;
            }
            if best.is_none_or(|(bw, bu)| w > bw || (w == bw && u < bu)) {
                best = Some((w, u));
            }
        }
        match best {
            Some((_, u)) => {
                mate[v] = u;
                mate[u] = v;
            }
            None => mate[v] = v,
        }
    }
    let mut map = vec![usize::MAX; n];
    let mut count = 0;
    for v in 0..n {
        if map[v] == usize::MAX {
            map[v] = count;
            map[mate[v]] = count;
            count += 1;
        }
    }
    let mut vwgt = vec![0u64; count];
    let mut adj: Vec<std::collections::BTreeMap<usize, u64>> = vec![Default::default(); count];
    for v in 0..n {
        let cv = map[v];
        if mate[v] == v || v < mate[v] {
            vwgt[cv] += g.vwgt[v] + if mate[v] != v { g.vwgt[mate[v]] } else { 0 };
        }
        for &(u, w) in &g.adj[v] {
            let cu = map[u];
            if cu != cv {
                *adj[cv].entry(cu).or_default() += w;
            }
        }
    }
    let coarse = WGraph {
        vwgt,
        adj: adj.into_iter().map(|m| m.into_iter().collect()).collect(),
    };
    (coarse, map)
}

/// Greedy graph growing from several start vertices; the best refined result wins.
fn initial_bisection(g: &WGraph, window: Window, target: u64, seed: u64) -> Vec<u8> {
    let n = g.len();
    let mut starts: Vec<usize> = (0..n).collect();
    if n > 12 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        starts.shuffle(&mut rng);
        starts.truncate(8);
        if !starts.contains(&0) {
            starts[0] = 0;
        }
    }
    let mut best: Option<((u64, u64), Vec<u8>)> = None;
    for &s in &starts {
        let mut side = grow_region(g, s, target);
        fm_refine(g, &mut side, window);
        let key = (window.violation(g.side_weight(&side)), g.cut(&side));
        if best.as_ref().is_none_or(|(bk, _)| key < *bk) {
            best = Some((key, side));
        }
    }
    best.map(|(_, s)| s).unwrap_or_default()
}

/// Grows side 0 from `start` by repeatedly absorbing the frontier vertex with
/// the largest cut reduction until its weight reaches `target`.
fn grow_region(g: &WGraph, start: usize, target: u64) -> Vec<u8> {
    let n = g.len();
    let mut side = vec![1u8; n];
    if target == 0 {
        return side;
    }
    // gain of moving v into side 0: weight to side 0 minus weight to side 1
    let mut gain: Vec<i64> = (0..n)
        .map(|v| -(g.adj[v].iter().map(|&(_, w)| w as i64).sum::<i64>()))
        .collect();
    let mut in_frontier = vec![false; n];
    let mut weight = 0u64;
    let mut next = Some(start);
    while let Some(v) = next {
        side[v] = 0;
        weight += g.vwgt[v];
        for &(u, w) in &g.adj[v] {
            gain[u] += 2 * w as i64;
            in_frontier[u] = true;
        }
        if weight >= target {
            break;
        }
        next = (0..n)
            .filter(|&u| side[u] == 1 && in_frontier[u])
            .max_by(|&a, &b| gain[a].cmp(&gain[b]).then(b.cmp(&a)))
            .or_else(|| (0..n).find(|&u| side[u] == 1));
    }
    side
}

/// Two-way Fiduccia–Mattheyses refinement. Each pass moves every vertex at
/// most once, then rolls back to the best prefix ordered by (balance
/// violation, cut). The result is never worse than the input under that order.
fn fm_refine(g: &WGraph, side: &mut [u8], window: Window) {
    let n = g.len();
    if n < 2 {
        return;
    }
    let slack = g.vwgt.iter().copied().max().unwrap_or(1);
    for _pass in 0..12 {
        let mut ext = vec![0i64; n];
        let mut int = vec![0i64; n];
        for v in 0..n {
            for &(u, w) in &g.adj[v] {
                if side[u] == side[v] {
                    int[v] += w as i64;
                } else {
                    ext[v] += w as i64;
                }
            }
        }
        let mut w0 = g.side_weight(side);
        let mut cut = g.cut(side) as i64;
        let start_key = (window.violation(w0), cut as u64);
        let mut best_key = start_key;
        let mut best_len = 0usize;
        let mut moves: Vec<usize> = Vec::new();
        let mut locked = vec![false; n];

        loop {
            let cur_viol = window.violation(w0);
            let limit = cur_viol.max(slack);
            let mut pick: Option<usize> = None;
            for v in 0..n {
                if locked[v] {
                    continue;
                }
                let new_w0 = if side[v] == 0 { w0 - g.vwgt[v] } else { w0 + g.vwgt[v] };
                let new_viol = window.violation(new_w0);
                if new_viol > limit || (cur_viol > 0 && new_viol > cur_viol) {
                    continue;
                }
                let gain = ext[v] - int[v];
                if pick.is_none_or(|p| gain > ext[p] - int[p]) {
                    pick = Some(v);
                }
            }
            let Some(v) = pick else { break };
            locked[v] = true;
            cut -= ext[v] - int[v];
            if side[v] == 0 {
                w0 -= g.vwgt[v];
                side[v] = 1;
            } else {
                w0 += g.vwgt[v];
                side[v] = 0;
            }
            std::mem::swap(&mut ext[v], &mut int[v]);
            for &(u, w) in &g.adj[v] {
                let w = w as i64;
                if side[u] == side[v] {
                    int[u] += w;
                    ext[u] -= w;
                } else {
                    int[u] -= w;
                    ext[u] += w;
                }
            }
            moves.push(v);
            let key = (window.violation(w0), cut as u64);
            if key < best_key {
                best_key = key;
                best_len = moves.len();
            }
        }
        for &v in moves[best_len..].iter().rev() {
            side[v] ^= 1;
        }
        debug_assert_eq!(g.cut(side), best_key.1);
        if best_key >= start_key {
            break;
        }
    }
}

/// Final guard at unit vertex weights: shift the cheapest vertices off the heavy side.
fn enforce_window(g: &WGraph, side: &mut [u8], window: Window) {
    loop {
        let w0 = g.side_weight(side);
        if window.violation(w0) == 0 {
            return;
        }
        let from = if w0 > window.hi { 0 } else { 1 };
        let best = (0..g.len())
            .filter(|&v| side[v] == from)
            .max_by_key(|&v| {
                let gain: i64 = g.adj[v]
                    .iter()
                    .map(|&(u, w)| if side[u] == side[v] { -(w as i64) } else { w as i64 })
                    .sum();
                (gain, std::cmp::Reverse(v))
            });
        match best {
            Some(v) => side[v] ^= 1,
            None => return,
        }
    }
}
