//! Acceptance suite. Every criterion runs, prints one PASS/FAIL line, and
//! the process exits non-zero when any of them fails.

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Instant;

use qcloud::analysis::{circuit_depth, AnalyzedCircuit, InteractionGraph};
use qcloud::cloud::{CloudTopology, QpuState, TopologyParams};
use qcloud::experiment::{
    bench_means, bench_placement, replay, run_experiment, ExperimentConfig, Manifest, MethodSpec, WorkloadSpec,
};
use qcloud::placement::{comm_cost, place_circuit, BatchOrder, PlacementConfig, PlacementMethod};
use qcloud::qasm::{generate_circuit, Circuit, Family, GateName, GenParams, Source};
use qcloud::scheduler::{Policy, RemoteDag};
use qcloud::sim::{self, metrics::quantile, verify_trace, SimConfig};
use qcloud::time::{LatencyModel, Ticks};
use qcloud::workload::{benchmark, Mix, REFERENCE};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn analyzed(c: Circuit) -> Arc<AnalyzedCircuit> {
    Arc::new(AnalyzedCircuit::new(c))
}

fn bench(name: &str) -> Arc<AnalyzedCircuit> {
    analyzed(benchmark(name).expect("known benchmark"))
}

/// Critical path by replaying gates on per-qubit clocks.
fn qubit_clock_makespan(c: &Circuit, lat: &LatencyModel) -> Ticks {
    let mut clock = vec![Ticks::ZERO; c.num_qubits];
    for g in c.gates.iter().filter(|g| !g.is_marker()) {
        let d = if g.is_two_qubit() { lat.t_2q } else { lat.t_1q };
        let start = g.operands.iter().map(|&q| clock[q]).max().unwrap_or(Ticks::ZERO);
        for &q in &g.operands {
            clock[q] = start + d;
        }
    }
    clock.into_iter().max().unwrap_or(Ticks::ZERO)
}

fn criterion_1() -> Outcome {
    let pair = CloudTopology::new(vec![QpuState::new(0, 1, 1), QpuState::new(1, 1, 1)], &[(0, 1)]).unwrap();
    let mut c = Circuit::new("cx", 2, Source::Generated);
    c.gate(GateName::Cx, &[0, 1]);
    let cfg = SimConfig { p_epr: 1.0, ..Default::default() };
    let remote = sim::run(&[analyzed(c)], &pair, &cfg).map_err(|e| e.to_string())?.records[0].jct.as_cx();
    if remote != 16.0 {
        return Err(format!("remote CX took {remote}"));
    }
    let big = CloudTopology::new(vec![QpuState::new(0, 200, 5)], &[]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut local: Vec<Circuit> = ["ghz_n127", "qugan_n71", "adder_n64", "bv_n70"].iter().map(|n| benchmark(n).unwrap()).collect();
    for i in 0..20 {
        let n = rng.gen_range(2..=12);
        let mut c = Circuit::new(format!("rand{i}"), n, Source::Generated);
        for _ in 0..rng.gen_range(1..40) {
            let a = rng.gen_range(0..n);
            if rng.gen_bool(0.5) {
                c.gate(GateName::H, &[a]);
            } else {
                let b = (a + rng.gen_range(1..n)) % n;
                c.gate(GateName::Cx, &[a, b]);
            }
        }
        local.push(c);
    }
    let lat = LatencyModel::default();
    for c in local {
        let want = qubit_clock_makespan(&c, &lat);
        let name = c.name.clone();
        let got = sim::run(&[analyzed(c)], &big, &SimConfig::default()).map_err(|e| e.to_string())?.records[0].jct;
        if got != want {
            return Err(format!("{name}: JCT {got} vs critical path {want}"));
        }
    }
    Ok("remote CX 16.0, 24 local circuits equal their critical paths".into())
}

fn criterion_2() -> Outcome {
    let p = GenParams::default();
    let mut detail = Vec::new();
    for (fam, n, q2, depth) in [(Family::Ghz, 127, 126, 128), (Family::Cat, 65, 64, 66), (Family::Ising, 34, 66, 16)] {
        let c = generate_circuit(fam, n, &p).map_err(|e| e.to_string())?;
        let got = (c.num_two_qubit_gates(), circuit_depth(&c));
        if got != (q2, depth) {
            return Err(format!("{}_n{n}: {got:?} vs ({q2}, {depth})", fam.as_str()));
        }
        detail.push(format!("{}_n{n}={got:?}", fam.as_str()));
    }
    Ok(detail.join(" "))
}

fn criterion_3() -> Outcome {
    let circuits = [bench("ghz_n127"), bench("cc_n64"), bench("adder_n64")];
    let cfg = ExperimentConfig { trials: 10, seed: 3, ..Default::default() };
    let rows = bench_placement(&circuits, &PlacementMethod::ALL, &cfg).map_err(|e| e.to_string())?;
    if let Some(r) = rows.iter().find(|r| r.error.is_some()) {
        return Err(format!("{} {} failed: {:?}", r.circuit, r.method, r.error));
    }
    let means: BTreeMap<(String, PlacementMethod), f64> = bench_means(&rows).into_iter().map(|(c, m, v)| ((c, m), v)).collect();
    let get = |c: &str, m| means[&(c.to_string(), m)];
    let ghz = (get("ghz_n127", PlacementMethod::Cloudqc), get("ghz_n127", PlacementMethod::Random));
    let cc: Vec<f64> = PlacementMethod::ALL.iter().map(|&m| get("cc_n64", m)).collect();
    let adder = (get("adder_n64", PlacementMethod::Cloudqc), get("adder_n64", PlacementMethod::Sa));
    let detail = format!("ghz {:.1} vs random {:.1}; cc {:?}; adder {:.1} vs SA {:.1}", ghz.0, ghz.1, cc, adder.0, adder.1);
    let ok = ghz.0 <= 20.0
        && ghz.0 <= 0.25 * ghz.1
        && cc.iter().all(|&v| (40.0..=50.0).contains(&v))
        && adder.0 <= 0.5 * adder.1;
    check(ok, detail)
}

fn exhaustive_min(g: &InteractionGraph, t: &CloudTopology) -> u64 {
    let n = g.num_vertices();
    let k = t.num_qpus();
    let mut best = u64::MAX;
    let mut map = vec![0; n];
    for code in 0..k.pow(n as u32) {
        let mut c = code;
        let mut load = vec![0; k];
        for slot in map.iter_mut() {
            *slot = c % k;
            load[*slot] += 1;
            c /= k;
        }
        if (0..k).all(|q| load[q] <= t.qpu(q).computing_capacity) {
            best = best.min(comm_cost(g, &map, t));
        }
    }
    best
}

fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut good = 0;
    let mut worst = Vec::new();
    for i in 0..100 {
        let n = rng.gen_range(3..=6);
        let m = rng.gen_range(2..=3);
        let mut caps: Vec<usize> = (0..m).map(|_| rng.gen_range(1..=n - 1)).collect();
        while caps.iter().sum::<usize>() < n {
            let j = rng.gen_range(0..m);
            caps[j] += 1;
        }
        let links: &[(usize, usize)] = match (m, rng.gen_bool(0.5)) {
            (2, _) => &[(0, 1)],
            (_, true) => &[(0, 1), (1, 2)],
            (_, false) => &[(0, 1), (1, 2), (0, 2)],
        };
        let t = CloudTopology::new(caps.iter().enumerate().map(|(q, &c)| QpuState::new(q, c, 2)).collect(), links).unwrap();
        let mut c = Circuit::new(format!("small{i}"), n, Source::Generated);
        for _ in 0..rng.gen_range(3..=12) {
            let a = rng.gen_range(0..n);
            let b = (a + rng.gen_range(1..n)) % n;
            c.gate(GateName::Cx, &[a, b]);
        }
        let ac = AnalyzedCircuit::new(c);
        let opt = exhaustive_min(&ac.graph, &t);
        let got = place_circuit(&ac, &t, &PlacementConfig::default()).map_err(|e| format!("instance {i}: {e}"))?.comm_cost;
        if got as f64 <= 1.5 * opt as f64 {
            good += 1;
        } else {
            worst.push((i, got, opt));
        }
    }
    check(good >= 95, format!("{good}/100 within 1.5x of the optimum; misses {worst:?}"))
}

/// Longest path in arcs from `u` to any sink, by explicit path enumeration.
fn longest_by_enumeration(succs: &[Vec<usize>], u: usize) -> u32 {
    let mut best = 0;
    let mut stack = vec![(u, 0u32)];
    while let Some((v, len)) = stack.pop() {
        best = best.max(len);
        for &w in &succs[v] {
            stack.push((w, len + 1));
        }
    }
    best
}

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for i in 0..200 {
        let n = rng.gen_range(1..=50);
        let p = rng.gen_range(0.02..0.2);
        let mut arcs = Vec::new();
        let mut succs = vec![Vec::new(); n];
        for u in 0..n {
            for v in u + 1..n {
                if rng.gen_bool(p) {
                    arcs.push((u, v));
                    succs[u].push(v);
                }
            }
        }
        let dag = RemoteDag::from_arcs(n, &arcs).map_err(|e| e.to_string())?;
        for u in 0..n {
            let want = longest_by_enumeration(&succs, u);
            if dag.priority(u) != want {
                return Err(format!("DAG {i} node {u}: {} vs {want}", dag.priority(u)));
            }
        }
    }
    Ok("200/200 random DAGs match path enumeration".into())
}

fn criterion_6() -> Outcome {
    let topo = CloudTopology::random(&TopologyParams::default(), 6).map_err(|e| e.to_string())?;
    let all: Vec<Arc<AnalyzedCircuit>> = REFERENCE.iter().map(|r| bench(r.0)).collect();
    let mut traces = 0;
    for policy in Policy::ALL {
        let mut runs: Vec<Vec<Arc<AnalyzedCircuit>>> = all.iter().map(|c| vec![Arc::clone(c)]).collect();
        runs.push(all.clone());
        for (i, jobs) in runs.iter().enumerate() {
            let cfg = SimConfig { policy, seed: i as u64, trace: true, ..Default::default() };
            let out = sim::run(jobs, &topo, &cfg).map_err(|e| format!("{policy} run {i}: {e}"))?;
            verify_trace(out.trace.as_ref().unwrap(), policy).map_err(|e| format!("{policy} run {i}: {e}"))?;
            traces += 1;
        }
    }
    Ok(format!("{traces} traces over {} benchmarks and 4 policies satisfy every invariant", all.len()))
}

fn criterion_7() -> Outcome {
    let pair = CloudTopology::new(vec![QpuState::new(0, 1, 1), QpuState::new(1, 1, 1)], &[(0, 1)]).unwrap();
    let mut c = Circuit::new("cx", 2, Source::Generated);
    c.gate(GateName::Cx, &[0, 1]);
    let ac = analyzed(c);
    let trials = 10_000;
    let mut rounds = 0;
    for s in 0..trials {
        let cfg = SimConfig { p_epr: 0.3, seed: s, ..Default::default() };
        let r = &sim::run(&[Arc::clone(&ac)], &pair, &cfg).map_err(|e| e.to_string())?.records[0];
        if r.pairs != r.attempts {
            return Err(format!("trial {s} used {} pairs in {} rounds", r.pairs, r.attempts));
        }
        rounds += r.attempts;
    }
    let mean = rounds as f64 / trials as f64;
    let target = 10.0 / 3.0;
    check((mean - target).abs() <= 0.05 * target, format!("mean rounds {mean:.4} vs {target:.4}"))
}

fn spearman(x: &[f64], y: &[f64]) -> f64 {
    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
        let mut r = vec![0.0; v.len()];
        let mut i = 0;
        while i < idx.len() {
            let mut j = i;
            while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
                j += 1;
            }
            for &k in &idx[i..=j] {
                r[k] = (i + j) as f64 / 2.0 + 1.0;
            }
            i = j + 1;
        }
        r
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}

fn mean_jct(ac: &Arc<AnalyzedCircuit>, cfg: &SimConfig, seeds: u64) -> Result<f64, String> {
    let mut total = 0.0;
    for s in 0..seeds {
        let t = CloudTopology::random(&TopologyParams::default(), 800 + s).map_err(|e| e.to_string())?;
        let c = SimConfig { seed: s, ..cfg.clone() };
        total += sim::run(&[Arc::clone(ac)], &t, &c).map_err(|e| e.to_string())?.records[0].jct.as_cx();
    }
    Ok(total / seeds as f64)
}

fn criterion_8() -> Outcome {
    let mut detail = Vec::new();
    let mut ok = true;
    for name in ["multiplier_n75", "qft_n63"] {
        let ac = bench(name);
        let cloudqc = mean_jct(&ac, &SimConfig::default(), 20)?;
        let average = mean_jct(&ac, &SimConfig { policy: Policy::Average, ..Default::default() }, 20)?;
        let greedy = mean_jct(&ac, &SimConfig { policy: Policy::Greedy, ..Default::default() }, 20)?;
        let ps = [0.1, 0.2, 0.3, 0.4, 0.5];
        let jct: Vec<f64> = ps.iter().map(|&p| mean_jct(&ac, &SimConfig { p_epr: p, ..Default::default() }, 20)).collect::<Result<_, _>>()?;
        let rho = spearman(&ps, &jct);
        ok &= cloudqc <= greedy && rho < -0.9;
        detail.push(format!("{name}: cloudqc {cloudqc:.0} average {average:.0} greedy {greedy:.0}, rho {rho:.2}"));
    }
    check(ok, detail.join("; "))
}

fn criterion_9() -> Outcome {
    let method = |label: &str, batching| MethodSpec {
        label: label.into(),
        ..MethodSpec::new(PlacementMethod::Cloudqc, Policy::Cloudqc, batching)
    };
    let cfg = ExperimentConfig {
        seed: 9,
        trials: 5,
        workload: WorkloadSpec { mix: Some(Mix::Mixed), batch_size: Some(20), batches: 20, ..Default::default() },
        methods: vec![method("cloudqc", BatchOrder::Descending), method("cloudqc-fifo", BatchOrder::Fifo)],
        ..Default::default()
    };
    let b = run_experiment(&cfg).map_err(|e| e.to_string())?;
    let p80 = |label: &str| -> Result<f64, String> {
        let jct: Vec<f64> = b
            .cells
            .iter()
            .filter(|c| c.method == label)
            .map(|c| c.outcome.clone())
            .collect::<Result<Vec<_>, _>>()?
            .into_iter()
            .flatten()
            .map(|r| r.jct.as_cx())
            .collect();
        Ok(quantile(&jct, 0.8))
    };
    let (ours, fifo) = (p80("cloudqc")?, p80("cloudqc-fifo")?);
    check(ours <= fifo, format!("p80 JCT {ours:.1} vs FIFO {fifo:.1}"))
}

fn criterion_10() -> Outcome {
    let mut cfg = ExperimentConfig {
        seed: 10,
        trials: 2,
        workload: WorkloadSpec { mix: Some(Mix::Arithmetic), batch_size: Some(5), batches: 2, ..Default::default() },
        methods: PlacementMethod::ALL
            .iter()
            .map(|&m| MethodSpec::new(m, Policy::Cloudqc, BatchOrder::Descending))
            .chain(Policy::ALL.iter().map(|&p| MethodSpec::new(PlacementMethod::Cloudqc, p, BatchOrder::Fifo)))
            .collect(),
        ..Default::default()
    };
    cfg.ga.generations = 40;
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let a = run_experiment(&cfg).map_err(|e| e.to_string())?;
    qcloud::experiment::write_bundle(&a, dir.path()).map_err(|e| e.to_string())?;
    let text = std::fs::read_to_string(dir.path().join("manifest.json")).map_err(|e| e.to_string())?;
    let m: Manifest = serde_json::from_str(&text).map_err(|e| e.to_string())?;
    let b = replay(&m).map_err(|e| e.to_string())?;
    let diff = qcloud::experiment::compare_with_dir(&b, dir.path());
    if !diff.is_empty() {
        return Err(format!("replay differs in {diff:?}"));
    }
    // the manifest records the worker count; every other file must match
    let parallel = run_experiment(&ExperimentConfig { workers: 4, ..cfg }).map_err(|e| e.to_string())?;
    let outputs = |b: &qcloud::experiment::Bundle| -> Vec<(String, Vec<u8>)> {
        b.files.iter().filter(|(k, _)| *k != "manifest.json").map(|(k, v)| (k.clone(), v.clone())).collect()
    };
    check(
        outputs(&parallel) == outputs(&a),
        format!("{} files replayed byte-identically, 4-worker run matches the serial one", a.files.len()),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("latency composition", criterion_1),
        ("generator fidelity", criterion_2),
        ("single-circuit placement trend", criterion_3),
        ("small-instance near-optimality", criterion_4),
        ("priority oracle", criterion_5),
        ("scheduler invariants", criterion_6),
        ("EPR statistics", criterion_7),
        ("scheduling-policy ordering", criterion_8),
        ("multi-tenant ordering", criterion_9),
        ("determinism", criterion_10),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let (tag, detail) = match f() {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("criterion {:>2} {tag} [{name}] ({:.1}s): {detail}", i + 1, start.elapsed().as_secs_f64());
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
