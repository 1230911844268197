//! Execution traces and their invariant checks.

use serde::{Deserialize, Serialize};

use crate::scheduler::Policy;
use crate::time::Ticks;

/// One request in an allocation round; `pairs` may be zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Grant {
    pub job: usize,
    pub node: usize,
    pub qpus: (usize, usize),
    pub base_priority: u32,
    pub priority: u32,
    pub pairs: usize,
    /// Round end when pairs were granted.
    pub until: Ticks,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundTrace {
    pub time: Ticks,
    /// Free communication qubits per QPU before the round.
    pub budgets: Vec<usize>,
    pub grants: Vec<Grant>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeTrace {
    pub job: usize,
    pub node: usize,
    pub ready: Ticks,
    pub first_attempt: Ticks,
    pub completed: Ticks,
    pub rounds: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JobSpan {
    pub job: usize,
    pub start: Ticks,
    pub completion: Ticks,
    /// `(qpu, computing qubits)` held while running.
    pub loads: Vec<(usize, usize)>,
    /// Remote DAG arcs.
    pub arcs: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trace {
    pub computing_capacity: Vec<usize>,
    pub comm_capacity: Vec<usize>,
    pub rounds: Vec<RoundTrace>,
    pub nodes: Vec<NodeTrace>,
    pub jobs: Vec<JobSpan>,
}

/// Checks communication budgets per round, remote-gate precedence,
/// computing capacity over time and, for the priority policy, that a higher
/// priority never receives fewer pairs than a lower one on the same QPU pair.
pub fn verify_trace(trace: &Trace, policy: Policy) -> Result<(), String> {
    let nq = trace.comm_capacity.len();
    // pairs held by earlier rounds plus new grants stay within capacity
    let mut open: Vec<Grant> = Vec::new();
    for round in &trace.rounds {
        open.retain(|g| g.until > round.time);
        let mut held = vec![0usize; nq];
        for g in &open {
            held[g.qpus.0] += g.pairs;
            held[g.qpus.1] += g.pairs;
        }
        for q in 0..nq {
            if held[q] + round.budgets[q] != trace.comm_capacity[q] {
                return Err(format!(
                    "t={}: QPU {q} holds {} pairs with budget {} but capacity {}",
                    round.time, held[q], round.budgets[q], trace.comm_capacity[q]
                ));
            }
        }
        let mut used = vec![0usize; nq];
        for g in &round.grants {
            used[g.qpus.0] += g.pairs;
            used[g.qpus.1] += g.pairs;
        }
        if let Some(q) = (0..nq).find(|&q| used[q] > round.budgets[q]) {
            return Err(format!("t={}: QPU {q} granted {} of {} pairs", round.time, used[q], round.budgets[q]));
        }
        if policy == Policy::Cloudqc {
            for a in &round.grants {
                for b in &round.grants {
                    if a.qpus == b.qpus && a.priority > b.priority && a.pairs < b.pairs {
                        return Err(format!(
                            "t={}: node {}/{} (p={}) got {} pairs, node {}/{} (p={}) got {}",
                            round.time, a.job, a.node, a.priority, a.pairs, b.job, b.node, b.priority, b.pairs
                        ));
                    }
                }
            }
        }
        open.extend(round.grants.iter().filter(|g| g.pairs > 0).copied());
    }

    // a remote gate starts only after its remote predecessors finish
    let mut done = std::collections::HashMap::new();
    for n in &trace.nodes {
        if !(n.ready <= n.first_attempt && n.first_attempt < n.completed) {
            return Err(format!("node {}/{} has inconsistent times", n.job, n.node));
        }
        done.insert((n.job, n.node), (n.first_attempt, n.completed));
    }
    for span in &trace.jobs {
        for &(u, v) in &span.arcs {
            let (Some(&(_, cu)), Some(&(sv, _))) = (done.get(&(span.job, u)), done.get(&(span.job, v))) else {
                return Err(format!("job {}: arc {u}->{v} refers to a node without trace", span.job));
            };
            if sv < cu {
                return Err(format!("job {}: node {v} attempted at {sv} before predecessor {u} finished at {cu}", span.job));
            }
        }
    }

    // computing qubits in use never exceed capacity
    let mut events: Vec<(Ticks, bool, usize, usize)> = Vec::new();
    for span in &trace.jobs {
        if span.completion < span.start {
            return Err(format!("job {} completes before it starts", span.job));
        }
        for &(q, n) in &span.loads {
            events.push((span.start, true, q, n));
            events.push((span.completion, false, q, n));
        }
    }
    // releases sort before acquisitions at equal times
    events.sort_by_key(|&(t, acquire, q, _)| (t, acquire, q));
    let mut in_use = vec![0usize; trace.computing_capacity.len()];
    for (t, acquire, q, n) in events {
        if acquire {
            in_use[q] += n;
            if in_use[q] > trace.computing_capacity[q] {
                return Err(format!("t={t}: QPU {q} holds {} of {} computing qubits", in_use[q], trace.computing_capacity[q]));
            }
        } else {
            in_use[q] -= n;
        }
    }
    Ok(())
}
