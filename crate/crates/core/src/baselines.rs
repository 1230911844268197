//! Competing placement methods: random connected growth, simulated
//! annealing and a genetic algorithm, plus the dispatcher shared by the
//! simulator and the experiment runner.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::analysis::{AnalyzedCircuit, InteractionGraph};
use crate::cloud::CloudTopology;
use crate::placement::{
    comm_cost, estimate_time, place_circuit_with, Placement, PlacementConfig, PlacementError, PlacementMethod,
};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnnealConfig {
    /// `None` starts at the cost of the initial placement.
    pub initial_temp: Option<f64>,
    pub cooling_rate: f64,
    pub moves_per_temp: usize,
    /// `None` stops at a thousandth of the initial temperature.
    pub stop_temp: Option<f64>,
    pub seed: u64,
}

impl Default for AnnealConfig {
    fn default() -> Self {
        AnnealConfig { initial_temp: None, cooling_rate: 0.97, moves_per_temp: 200, stop_temp: None, seed: 0 }
    }
}

impl AnnealConfig {
    pub fn validate(&self) -> Result<(), PlacementError> {
        if !(self.cooling_rate > 0.0 && self.cooling_rate < 1.0) {
            return Err(PlacementError::BadParams(format!("cooling rate {} outside (0, 1)", self.cooling_rate)));
        }
        for t in [self.initial_temp, self.stop_temp].into_iter().flatten() {
            if !(t > 0.0 && t.is_finite()) {
                return Err(PlacementError::BadParams(format!("temperature {t} must be positive")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GaConfig {
    pub population: usize,
    pub generations: usize,
    pub crossover_rate: f64,
    pub mutation_rate: f64,
    pub elitism: usize,
    pub seed: u64,
}

impl Default for GaConfig {
    fn default() -> Self {
        GaConfig { population: 64, generations: 300, crossover_rate: 0.8, mutation_rate: 0.05, elitism: 2, seed: 0 }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<(), PlacementError> {
        let rate_ok = |r: f64| (0.0..=1.0).contains(&r);
        if !rate_ok(self.crossover_rate) || !rate_ok(self.mutation_rate) {
            return Err(PlacementError::BadParams("GA rates must lie in [0, 1]".into()));
        }
        if self.population == 0 || self.elitism >= self.population {
            return Err(PlacementError::BadParams("GA needs elitism < population".into()));
        }
        Ok(())
    }
}

fn infeasible(ac: &AnalyzedCircuit, t: &CloudTopology) -> PlacementError {
    PlacementError::NoFeasibleAssignment(format!(
        "{} needs {} qubits, {} free",
        ac.name(),
        ac.num_qubits(),
        t.total_computing_free()
    ))
}

fn finish(ac: &AnalyzedCircuit, t: &CloudTopology, method: PlacementMethod, map: Vec<usize>, cfg: &PlacementConfig) -> Placement {
    let mut p = Placement::from_map(ac.name(), method, map, &ac.graph, t);
    p.est_time = estimate_time(&ac.dag, &ac.circuit, &p.qubit_map, |a, b| t.distance(a, b), &cfg.latency, cfg.p_epr);
    p
}

/// Random connected QPU set with enough room, qubits shuffled and dealt
/// round-robin over it.
pub fn random_map(g: &InteractionGraph, t: &CloudTopology, rng: &mut ChaCha8Rng) -> Option<Vec<usize>> {
    let n = g.num_vertices();
    if t.total_computing_free() < n {
        return None;
    }
    let free = |q: usize| t.qpu(q).computing_free;
    let single: Vec<usize> = (0..t.num_qpus()).filter(|&q| free(q) >= n).collect();
    if !single.is_empty() {
        return Some(vec![*single.choose(rng).unwrap(); n]);
    }
    let open: Vec<usize> = (0..t.num_qpus()).filter(|&q| free(q) > 0).collect();
    let mut chosen = vec![*open.choose(rng).unwrap()];
    let mut inside = vec![false; t.num_qpus()];
    inside[chosen[0]] = true;
    let mut room = free(chosen[0]);
    while room < n {
        let mut frontier: Vec<usize> = chosen
            .iter()
            .flat_map(|&q| t.neighbors(q).iter().copied())
            .filter(|&q| !inside[q] && free(q) > 0)
            .collect();
        frontier.sort_unstable();
        frontier.dedup();
        if frontier.is_empty() {
            frontier = open.iter().copied().filter(|&q| !inside[q]).collect();
        }
        let q = *frontier.choose(rng)?;
        inside[q] = true;
        room += free(q);
        chosen.push(q);
    }
    let mut qubits: Vec<usize> = (0..n).collect();
    qubits.shuffle(rng);
    let mut left: Vec<usize> = chosen.iter().map(|&q| free(q)).collect();
    let mut map = vec![0; n];
    let mut j = 0;
    for q in qubits {
        while left[j % chosen.len()] == 0 {
            j += 1;
        }
        let slot = j % chosen.len();
        map[q] = chosen[slot];
        left[slot] -= 1;
        j += 1;
    }
    Some(map)
}

pub fn random_placement(
    ac: &AnalyzedCircuit,
    t: &CloudTopology,
    seed: u64,
    cfg: &PlacementConfig,
) -> Result<Placement, PlacementError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let map = random_map(&ac.graph, t, &mut rng).ok_or_else(|| infeasible(ac, t))?;
    Ok(finish(ac, t, PlacementMethod::Random, map, cfg))
}

/// Change in `Σ w · hops` when qubit `q` moves to QPU `to`.
fn move_delta(g: &InteractionGraph, t: &CloudTopology, map: &[usize], q: usize, to: usize) -> i64 {
    let from = map[q];
    g.neighbors(q)
        .iter()
        .map(|&(j, w)| w as i64 * (t.distance(to, map[j]) as i64 - t.distance(from, map[j]) as i64))
        .sum()
}

/// Outcome of an annealing run.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnealRun {
    pub map: Vec<usize>,
    pub cost: u64,
    /// Best cost after each temperature step.
    pub best_history: Vec<u64>,
}

/// Metropolis search over full qubit maps with relocate and swap moves.
pub fn anneal(g: &InteractionGraph, t: &CloudTopology, init: Vec<usize>, cfg: &AnnealConfig) -> AnnealRun {
    let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(cfg.seed, 1));
    let n = g.num_vertices();
    let mut map = init;
    let mut load = vec![0usize; t.num_qpus()];
    for &q in &map {
        load[q] += 1;
    }
    let mut cost = comm_cost(g, &map, t) as i64;
    let mut best = (cost, map.clone());
    let mut history = Vec::new();
    let t0 = cfg.initial_temp.unwrap_or(cost as f64);
    let stop = cfg.stop_temp.unwrap_or(t0 / 1000.0);
    if n < 2 || cfg.moves_per_temp == 0 || t0 <= 0.0 {
        return AnnealRun { cost: cost as u64, map, best_history: history };
    }
    let cap: Vec<usize> = t.qpus().iter().map(|q| q.computing_free).collect();
    let mut temp = t0;
    while temp > stop {
        for _ in 0..cfg.moves_per_temp {
            let q = rng.gen_range(0..n);
            let from = map[q];
            if rng.gen_bool(0.5) {
                let to = rng.gen_range(0..t.num_qpus());
                if to == from || load[to] >= cap[to] {
                    continue;
                }
                let d = move_delta(g, t, &map, q, to);
                if d <= 0 || rng.gen::<f64>() < (-(d as f64) / temp).exp() {
                    map[q] = to;
                    load[from] -= 1;
                    load[to] += 1;
                    cost += d;
                }
            } else {
                let r = rng.gen_range(0..n);
                let to = map[r];
                if to == from {
                    continue;
                }
                let d1 = move_delta(g, t, &map, q, to);
                map[q] = to;
                let d2 = move_delta(g, t, &map, r, from);
                let d = d1 + d2;
                if d <= 0 || rng.gen::<f64>() < (-(d as f64) / temp).exp() {
                    map[r] = from;
                    cost += d;
                } else {
                    map[q] = from;
                }
            }
            if cost < best.0 {
                best = (cost, map.clone());
            }
        }
        history.push(best.0 as u64);
        temp *= cfg.cooling_rate;
    }
    AnnealRun { map: best.1, cost: best.0 as u64, best_history: history }
}

pub fn sa_placement(
    ac: &AnalyzedCircuit,
    t: &CloudTopology,
    cfg: &AnnealConfig,
    pcfg: &PlacementConfig,
) -> Result<Placement, PlacementError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let init = random_map(&ac.graph, t, &mut rng).ok_or_else(|| infeasible(ac, t))?;
    let run = anneal(&ac.graph, t, init, cfg);
    Ok(finish(ac, t, PlacementMethod::Sa, run.map, pcfg))
}

/// Moves qubits off over-full QPUs onto the nearest QPU with room.
fn repair(map: &mut [usize], cap: &[usize], t: &CloudTopology, rng: &mut ChaCha8Rng) {
    let mut load = vec![0usize; cap.len()];
    for &q in map.iter() {
        load[q] += 1;
    }
    let mut order: Vec<usize> = (0..map.len()).collect();
    order.shuffle(rng);
    for q in order {
        let from = map[q];
        if load[from] <= cap[from] {
            continue;
        }
        let to = (0..cap.len())
            .filter(|&v| load[v] < cap[v])
            .min_by_key(|&v| (t.distance(from, v), v))
            .expect("capacity checked by caller");
        map[q] = to;
        load[from] -= 1;
        load[to] += 1;
    }
}

/// Genetic search from a given population; returns the fittest map.
pub fn evolve(g: &InteractionGraph, t: &CloudTopology, mut pop: Vec<Vec<usize>>, cfg: &GaConfig) -> (Vec<usize>, u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(cfg.seed, 2));
    let cap: Vec<usize> = t.qpus().iter().map(|q| q.computing_free).collect();
    let n = g.num_vertices();
    let eval = |pop: &[Vec<usize>]| -> Vec<u64> { pop.iter().map(|m| comm_cost(g, m, t)).collect() };
    let mut fit = eval(&pop);
    for _ in 0..cfg.generations {
        let mut rank: Vec<usize> = (0..pop.len()).collect();
        rank.sort_by_key(|&i| (fit[i], i));
        let mut next: Vec<Vec<usize>> = rank.iter().take(cfg.elitism).map(|&i| pop[i].clone()).collect();
        let pick = |rng: &mut ChaCha8Rng| {
            let a = rng.gen_range(0..pop.len());
            let b = rng.gen_range(0..pop.len());
            if (fit[a], a) <= (fit[b], b) {
                a
            } else {
                b
            }
        };
        while next.len() < pop.len() {
            let (a, b) = (pick(&mut rng), pick(&mut rng));
            let mut child = pop[a].clone();
            if rng.gen_bool(cfg.crossover_rate) {
                for (q, gene) in child.iter_mut().enumerate() {
                    if rng.gen_bool(0.5) {
                        *gene = pop[b][q];
                    }
                }
            }
            if cfg.mutation_rate > 0.0 {
                for q in 0..n {
                    if rng.gen_bool(cfg.mutation_rate) {
                        child[q] = rng.gen_range(0..t.num_qpus());
                    }
                }
            }
            repair(&mut child, &cap, t, &mut rng);
            next.push(child);
        }
        pop = next;
        fit = eval(&pop);
    }
    let best = (0..pop.len()).min_by_key(|&i| (fit[i], i)).expect("empty population");
    (pop[best].clone(), fit[best])
}

pub fn ga_placement(
    ac: &AnalyzedCircuit,
    t: &CloudTopology,
    cfg: &GaConfig,
    pcfg: &PlacementConfig,
) -> Result<Placement, PlacementError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let pop = (0..cfg.population)
        .map(|_| random_map(&ac.graph, t, &mut rng))
        .collect::<Option<Vec<_>>>()
        .ok_or_else(|| infeasible(ac, t))?;
    let (map, _) = evolve(&ac.graph, t, pop, cfg);
    Ok(finish(ac, t, PlacementMethod::Ga, map, pcfg))
}

/// Settings for every placement method.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MethodConfig {
    pub placement: PlacementConfig,
    pub anneal: AnnealConfig,
    pub ga: GaConfig,
}

/// Places a circuit with `method`; `seed` keys the random baselines.
pub fn place(
    method: PlacementMethod,
    ac: &AnalyzedCircuit,
    t: &CloudTopology,
    cfg: &MethodConfig,
    seed: u64,
    existing_load: Option<&[u64]>,
) -> Result<Placement, PlacementError> {
    match method {
        // the pipeline draws only partition seeds, fixed by the config so
        // repeated attempts reuse cached partitions
        PlacementMethod::Cloudqc | PlacementMethod::CloudqcBfs => {
            place_circuit_with(ac, t, &cfg.placement, method, existing_load)
        }
        PlacementMethod::Random => random_placement(ac, t, seed::derive(0x5eed, seed), &cfg.placement),
        PlacementMethod::Sa => {
            let a = AnnealConfig { seed: seed::derive(cfg.anneal.seed, seed), ..cfg.anneal };
            sa_placement(ac, t, &a, &cfg.placement)
        }
        PlacementMethod::Ga => {
            let g = GaConfig { seed: seed::derive(cfg.ga.seed, seed), ..cfg.ga };
            ga_placement(ac, t, &g, &cfg.placement)
        }
    }
}
