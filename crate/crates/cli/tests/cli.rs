use std::process::{Command, Output};

fn qcloud(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qcloud")).args(args).env_remove("QCLOUD_SEED").output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn analyze_generated_family() {
    let o = qcloud(&["analyze", "--family", "cat", "--n", "65"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["two_qubit_gates"], 64);
    assert_eq!(v["depth"], 66);
}

#[test]
fn analyze_qasm_file() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bell.qasm");
    std::fs::write(&p, "OPENQASM 2.0;\ninclude \"qelib1.inc\";\nqreg q[2];\nh q[0];\ncx q[0],q[1];\n").unwrap();
    let o = qcloud(&["analyze", p.to_str().unwrap()]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["name"], "bell");
    assert_eq!(v["two_qubit_gates"], 1);
}

#[test]
fn partition_and_place() {
    let o = qcloud(&["partition", "ghz_n40", "--k", "2"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["k"], 2);
    let o = qcloud(&["place", "adder_n64", "--method", "sa", "--topo-seed", "4"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["placement"]["method"], "sa");
}

#[test]
fn schedule_writes_verified_trace() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("trace.json");
    let o = qcloud(&["schedule", "qugan_n39", "ghz_n30", "--policy", "greedy", "--trace", trace.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("\"trace_verified\": true"));
    let t: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&trace).unwrap()).unwrap();
    assert!(t["rounds"].is_array());
}

#[test]
fn simulate_then_replay() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(
        &cfg,
        r#"{"name":"t","trials":2,"workload":{"mix":"qugan","batches":1},
            "methods":[{"label":"cloudqc"},{"label":"fifo","batching":"fifo"}]}"#,
    )
    .unwrap();
    let out = dir.path().join("out");
    let o = qcloud(&["simulate", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["summary.json", "manifest.json", "cloudqc/records.csv", "cloudqc/cdf.csv", "fifo/records.csv"] {
        assert!(out.join(f).is_file(), "{f}");
    }
    let o = qcloud(&["replay", out.join("manifest.json").to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    // a tampered bundle is an invariant violation
    std::fs::write(out.join("cloudqc/cdf.csv"), "jct,fraction\n").unwrap();
    let o = qcloud(&["replay", out.join("manifest.json").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn seed_env_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"seed":1,"workload":{"circuits":["ghz_n10"],"batches":1}}"#).unwrap();
    let out = dir.path().join("out");
    let o = Command::new(env!("CARGO_BIN_EXE_qcloud"))
        .args(["simulate", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()])
        .env("QCLOUD_SEED", "77")
        .output()
        .unwrap();
    assert!(o.status.success());
    let m: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["config"]["seed"], 77);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, r#"{"methods":[{"policy":"fastest"}]}"#).unwrap();
    let o = qcloud(&["simulate", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("methods[0].policy"));

    let o = qcloud(&["place", "ghz_n50", "--qpus", "2", "--comp-qubits", "10"]);
    assert_eq!(o.status.code(), Some(3));
    let o = qcloud(&["schedule", "ghz_n50", "--qpus", "2", "--comp-qubits", "10"]);
    assert_eq!(o.status.code(), Some(3));
    let o = qcloud(&["simulate", "--circuits", "ghz_n50", "--out", dir.path().join("x").to_str().unwrap(), "--trials", "0"]);
    assert_eq!(o.status.code(), Some(2));
    let o = qcloud(&["analyze", "nosuch_n5"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn bench_prints_table() {
    let o = qcloud(&["bench", "ghz_n40", "--trials", "2", "--methods", "cloudqc,random"]);
    assert!(o.status.success());
    let s = stdout(&o);
    assert!(s.contains("cloudqc") && s.contains("random"));
}
