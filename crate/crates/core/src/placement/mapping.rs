//! Partition-to-QPU mapping: community selection, center alignment and BFS
//! expansion over the part graph.

use std::collections::VecDeque;

use crate::analysis::InteractionGraph;
use crate::cloud::CloudTopology;
use crate::partition::PartitionResult;

use super::community::CommunityProfile;
use super::PlacementError;

/// Dense inter-part weight matrix: entry `[a][b]` sums `D_ij` over qubit
/// pairs split between parts `a` and `b`.
pub fn part_graph(parts: &PartitionResult, g: &InteractionGraph) -> Vec<Vec<u64>> {
    let mut w = vec![vec![0u64; parts.k]; parts.k];
    for (a, b, d) in g.edges() {
        let (pa, pb) = (parts.assignment[a], parts.assignment[b]);
        if pa != pb {
            w[pa][pb] += d;
            w[pb][pa] += d;
        }
    }
    w
}

/// Vertex of minimum eccentricity in the part graph (hop metric over
/// positive-weight edges, unreachable counted as `k`); ties go to the larger
/// weighted degree, then the larger part, then the lowest id.
pub fn part_graph_center(w: &[Vec<u64>], sizes: &[usize]) -> usize {
    let k = w.len();
    let mut best = (usize::MAX, std::cmp::Reverse(0u64), std::cmp::Reverse(0usize), 0);
    for s in 0..k {
        let mut dist = vec![usize::MAX; k];
        dist[s] = 0;
        let mut queue = VecDeque::from([s]);
        while let Some(u) = queue.pop_front() {
            for v in 0..k {
                if w[u][v] > 0 && dist[v] == usize::MAX {
                    dist[v] = dist[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        let ecc = dist.iter().map(|&d| if d == usize::MAX { k } else { d }).max().unwrap_or(0);
        let key = (ecc, std::cmp::Reverse(w[s].iter().sum()), std::cmp::Reverse(sizes[s]), s);
        if key < best {
            best = key;
        }
    }
    best.3
}

/// Center of a QPU set under topology hop distance; ties go to the most free
/// computing qubits, then the lowest id.
pub fn region_center(t: &CloudTopology, region: &[usize]) -> usize {
    let mut sorted = region.to_vec();
    sorted.sort_unstable();
    *sorted
        .iter()
        .min_by_key(|&&q| (t.eccentricity_within(q, region), std::cmp::Reverse(t.qpu(q).computing_free), q))
        .expect("empty region")
}

/// Parts in visiting order: BFS from `center`, unvisited neighbors taken by
/// descending edge weight then id; parts unreachable from the center follow
/// by descending size.
pub fn bfs_part_order(w: &[Vec<u64>], center: usize, sizes: &[usize]) -> Vec<usize> {
    let k = w.len();
    let mut seen = vec![false; k];
    let mut order = Vec::with_capacity(k);
    let mut roots: Vec<usize> = (0..k).filter(|&p| p != center).collect();
    roots.sort_by_key(|&p| (std::cmp::Reverse(sizes[p]), p));
    roots.insert(0, center);
    for root in roots {
        if seen[root] {
            continue;
        }
        seen[root] = true;
        let mut queue = VecDeque::from([root]);
        while let Some(u) = queue.pop_front() {
            order.push(u);
            let mut nbrs: Vec<usize> = (0..k).filter(|&v| w[u][v] > 0 && !seen[v]).collect();
            nbrs.sort_by_key(|&v| (std::cmp::Reverse(w[u][v]), v));
            for v in nbrs {
                seen[v] = true;
                queue.push_back(v);
            }
        }
    }
    order
}

/// QPU set for a circuit of `n` qubits: the community whose free capacity
/// fits best, or else the roomiest community grown outward by hop distance
/// until it fits.
pub fn select_region(profile: &CommunityProfile, t: &CloudTopology, n: usize) -> Option<Vec<usize>> {
    if t.total_computing_free() < n || profile.communities.is_empty() {
        return None;
    }
    let fitting = (0..profile.communities.len())
        .filter(|&c| profile.free_qubits[c] >= n)
        .min_by_key(|&c| (profile.free_qubits[c], profile.communities[c][0]));
    if let Some(c) = fitting {
        return Some(profile.communities[c].clone());
    }
    let seed = (0..profile.communities.len())
        .max_by_key(|&c| (profile.free_qubits[c], std::cmp::Reverse(profile.communities[c][0])))?;
    let mut region = profile.communities[seed].clone();
    let mut free = profile.free_qubits[seed];
    let mut inside = vec![false; t.num_qpus()];
    for &q in &region {
        inside[q] = true;
    }
    while free < n {
        let next = (0..t.num_qpus())
            .filter(|&q| !inside[q] && t.qpu(q).computing_free > 0)
            .min_by_key(|&q| {
                let d = region.iter().map(|&r| t.distance(q, r)).min().unwrap_or(u32::MAX);
                (d, std::cmp::Reverse(t.qpu(q).computing_free), q)
            })?;
        inside[next] = true;
        free += t.qpu(next).computing_free;
        region.push(next);
    }
    region.sort_unstable();
    Some(region)
}

/// Maps every part to a QPU. Parts may share a QPU when its free capacity
/// allows. Returns the QPU of each part.
pub fn find_placement(
    parts: &PartitionResult,
    g: &InteractionGraph,
    t: &CloudTopology,
    profile: &CommunityProfile,
) -> Result<Vec<usize>, PlacementError> {
    let n = g.num_vertices();
    let region = select_region(profile, t, n)
        .ok_or_else(|| PlacementError::NoFeasibleAssignment(format!("{n} qubits exceed free capacity")))?;
    map_parts(parts, g, t, &region)
}

/// Center-to-center alignment followed by BFS expansion inside `region`.
pub fn map_parts(
    parts: &PartitionResult,
    g: &InteractionGraph,
    t: &CloudTopology,
    region: &[usize],
) -> Result<Vec<usize>, PlacementError> {
    let w = part_graph(parts, g);
    let anchor = region_center(t, region);
    let order = bfs_part_order(&w, part_graph_center(&w, &parts.part_sizes), &parts.part_sizes);
    greedy_map(&w, &parts.part_sizes, t, region, anchor, &order).or_else(|e| {
        // the BFS order can strand a large part; retry largest first
        let mut by_size: Vec<usize> = (0..parts.k).collect();
        by_size.sort_by_key(|&p| (std::cmp::Reverse(parts.part_sizes[p]), p));
        greedy_map(&w, &parts.part_sizes, t, region, anchor, &by_size).map_err(|_| e)
    })
}

fn greedy_map(
    w: &[Vec<u64>],
    sizes: &[usize],
    t: &CloudTopology,
    region: &[usize],
    anchor: usize,
    order: &[usize],
) -> Result<Vec<usize>, PlacementError> {
    let k = w.len();
    let mut rem: Vec<usize> = t.qpus().iter().map(|q| q.computing_free).collect();
    let mut qpu_of = vec![usize::MAX; k];
    let mut in_region = vec![false; t.num_qpus()];
    for &q in region {
        in_region[q] = true;
    }
    for &p in order {
        let size = sizes[p];
        // weighted hops to mapped neighbors first; the region only breaks ties
        let cost = |q: usize| -> (u64, bool, u32, usize, usize) {
            let pull: u64 = (0..k)
                .filter(|&o| qpu_of[o] != usize::MAX && w[p][o] > 0)
                .map(|o| w[p][o] * t.distance(q, qpu_of[o]) as u64)
                .sum();
            (pull, !in_region[q], t.distance(q, anchor), rem[q] - size, q)
        };
        let q = (0..t.num_qpus()).filter(|&q| rem[q] >= size).min_by_key(|&q| cost(q)).ok_or_else(|| {
            PlacementError::NoFeasibleAssignment(format!("part {p} of size {size} fits on no QPU"))
        })?;
        rem[q] -= size;
        qpu_of[p] = q;
    }
    Ok(qpu_of)
}

/// BFS variant: QPUs visited breadth-first from the least-loaded QPU, each
/// part going to the first one with room.
pub fn find_placement_bfs(
    parts: &PartitionResult,
    g: &InteractionGraph,
    t: &CloudTopology,
) -> Result<Vec<usize>, PlacementError> {
    let n = g.num_vertices();
    if t.total_computing_free() < n {
        return Err(PlacementError::NoFeasibleAssignment(format!("{n} qubits exceed free capacity")));
    }
    let start = (0..t.num_qpus())
        .max_by_key(|&q| (t.qpu(q).computing_free, std::cmp::Reverse(q)))
        .expect("empty topology");
    let visit = t.bfs_order(start);
    let w = part_graph(parts, g);
    let order = bfs_part_order(&w, part_graph_center(&w, &parts.part_sizes), &parts.part_sizes);
    let mut rem: Vec<usize> = t.qpus().iter().map(|q| q.computing_free).collect();
    let mut qpu_of = vec![usize::MAX; parts.k];
    for p in order {
        let size = parts.part_sizes[p];
        let q = visit.iter().copied().find(|&q| rem[q] >= size).ok_or_else(|| {
            PlacementError::NoFeasibleAssignment(format!("part {p} of size {size} fits on no QPU"))
        })?;
        rem[q] -= size;
        qpu_of[p] = q;
    }
    Ok(qpu_of)
}
