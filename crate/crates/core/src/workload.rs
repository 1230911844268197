//! Benchmark circuits by name (`family_nN`) and the named workload mixes.
//!
//! Families without a closed-form generator in [`crate::qasm::generate`] are
//! synthesized here from standard constructions: Cuccaro ripple-carry
//! adders, shift-and-add multipliers, swap-test style comparisons and random
//! quantum-volume layers. Real `.qasm` files in a circuit directory take
//! precedence over the synthesized versions.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::qasm::{generate_circuit, parse_qasm, Circuit, Family, GateName, GenParams, QasmError, Source};

/// Named workload mixes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mix {
    Mixed,
    Qft,
    Qugan,
    Arithmetic,
}

impl Mix {
    pub fn circuits(self) -> &'static [&'static str] {
        match self {
            Mix::Mixed => &["knn_n129", "qugan_n111", "qugan_n71", "qft_n63", "multiplier_n45", "multiplier_n75"],
            Mix::Qft => &["qft_n29", "qft_n63", "qft_n100"],
            Mix::Qugan => &["qugan_n39", "qugan_n71", "qugan_n111"],
            Mix::Arithmetic => &["adder_n64", "adder_n118", "multiplier_n45", "multiplier_n75"],
        }
    }
}

impl std::str::FromStr for Mix {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "mixed" => Ok(Mix::Mixed),
            "qft" => Ok(Mix::Qft),
            "qugan" => Ok(Mix::Qugan),
            "arithmetic" => Ok(Mix::Arithmetic),
            _ => Err(format!("unknown workload mix '{s}'")),
        }
    }
}

/// Published (qubits, two-qubit gates, depth) of the reference benchmark set.
pub const REFERENCE: &[(&str, usize, usize, usize)] = &[
    ("ghz_n127", 127, 126, 128),
    ("bv_n70", 70, 36, 40),
    ("bv_n140", 140, 72, 76),
    ("ising_n34", 34, 66, 16),
    ("ising_n66", 66, 130, 16),
    ("ising_n98", 98, 194, 16),
    ("cat_n65", 65, 64, 66),
    ("cat_n130", 130, 129, 131),
    ("swap_test_n115", 115, 456, 60),
    ("knn_n67", 67, 264, 36),
    ("knn_n129", 129, 512, 67),
    ("qugan_n71", 71, 418, 72),
    ("qugan_n111", 111, 658, 112),
    ("cc_n64", 64, 64, 195),
    ("adder_n64", 64, 455, 78),
    ("adder_n118", 118, 845, 132),
    ("multiplier_n45", 45, 2574, 462),
    ("multiplier_n75", 75, 7350, 1300),
    ("qft_n63", 63, 9828, 494),
    ("qft_n160", 160, 25440, 1270),
    ("qv_n100", 100, 15000, 701),
];

/// Splits `family_nN` into its family and size.
pub fn split_name(name: &str) -> Result<(&str, usize), QasmError> {
    let bad = || QasmError::UnsupportedFamily(name.to_string());
    let (family, n) = name.rsplit_once("_n").ok_or_else(bad)?;
    let n: usize = n.parse().map_err(|_| bad())?;
    Ok((family, n))
}

/// Synthesized benchmark circuit for `family_nN`.
pub fn benchmark(name: &str) -> Result<Circuit, QasmError> {
    let (family, n) = split_name(name)?;
    if n < 2 {
        return Err(QasmError::BadParams(format!("{name}: need at least 2 qubits")));
    }
    let mut c = match family {
        "ghz" => generate_circuit(Family::Ghz, n, &GenParams::default())?,
        "cat" => generate_circuit(Family::Cat, n, &GenParams::default())?,
        "ising" => generate_circuit(Family::Ising, n, &GenParams::default())?,
        "bv" => generate_circuit(Family::Bv, n, &GenParams { secret: Some(bv_secret(n)), layers: None })?,
        "cc" => counterfeit_coin(n),
        "adder" => adder(n),
        "multiplier" if n < 10 => return Err(QasmError::BadParams(format!("{name}: need at least 10 qubits"))),
        "multiplier" => multiplier(n),
        "qft" => qft(n),
        "qugan" => qugan(n),
        "knn" | "swap_test" => swap_test(n),
        "qv" => quantum_volume(n, n),
        _ => return Err(QasmError::UnsupportedFamily(name.to_string())),
    };
    c.name = name.to_string();
    Ok(c)
}

/// `dir/name.qasm` when present, else the synthesized circuit.
pub fn load_benchmark(name: &str, dir: Option<&Path>) -> Result<Circuit, QasmError> {
    if let Some(path) = dir.map(|d| d.join(format!("{name}.qasm"))).filter(|p| p.is_file()) {
        let text = std::fs::read_to_string(&path).map_err(|e| QasmError::BadParams(format!("{}: {e}", path.display())))?;
        let mut c = parse_qasm(&text)?;
        c.name = name.to_string();
        return Ok(c);
    }
    benchmark(name)
}

/// Secret with about 52% ones spread evenly (36 of 69, 72 of 139).
fn bv_secret(n: usize) -> Vec<bool> {
    let bits = n - 1;
    let ones = ((bits * 52 + 50) / 100).clamp(1, bits);
    (0..bits).map(|i| (i + 1) * ones / bits > i * ones / bits).collect()
}

fn toffoli(c: &mut Circuit, a: usize, b: usize, t: usize) {
    c.gate(GateName::H, &[t]);
    c.gate(GateName::Cx, &[b, t]);
    c.gate(GateName::Tdg, &[t]);
    c.gate(GateName::Cx, &[a, t]);
    c.gate(GateName::T, &[t]);
    c.gate(GateName::Cx, &[b, t]);
    c.gate(GateName::Tdg, &[t]);
    c.gate(GateName::Cx, &[a, t]);
    c.gate(GateName::T, &[b]);
    c.gate(GateName::T, &[t]);
    c.gate(GateName::H, &[t]);
    c.gate(GateName::Cx, &[a, b]);
    c.gate(GateName::T, &[a]);
    c.gate(GateName::Tdg, &[b]);
    c.gate(GateName::Cx, &[a, b]);
}

fn cswap(c: &mut Circuit, ctrl: usize, a: usize, b: usize) {
    c.gate(GateName::Cx, &[b, a]);
    toffoli(c, ctrl, a, b);
    c.gate(GateName::Cx, &[b, a]);
}

fn new_circuit(n: usize) -> Circuit {
    Circuit::new("circuit", n, Source::Generated)
}

/// Hadamards on the coin register, every coin queried into the last qubit,
/// then one extra check against the last coin.
fn counterfeit_coin(n: usize) -> Circuit {
    let mut c = new_circuit(n);
    let anc = n - 1;
    for q in 0..anc {
        c.gate(GateName::H, &[q]);
    }
    for q in 0..anc {
        c.gate(GateName::Cx, &[q, anc]);
    }
    c.gate(GateName::Cx, &[anc - 1, anc]);
    for q in 0..anc {
        c.gate(GateName::H, &[q]);
    }
    c.measure_all();
    c
}

/// Cuccaro ripple-carry adder on `m = (n - 2) / 2` bit registers:
/// qubit 0 carries in, then `a_i, b_i` interleaved, carry out last.
fn adder(n: usize) -> Circuit {
    let mut c = new_circuit(n);
    let m = (n - 2) / 2;
    if m == 0 {
        c.gate(GateName::Cx, &[0, 1]);
        c.measure_all();
        return c;
    }
    let a = |i: usize| 1 + 2 * i;
    let b = |i: usize| 2 + 2 * i;
    let carry = |i: usize| if i == 0 { 0 } else { a(i - 1) };
    let cout = 2 * m + 1;
    for i in 0..m {
        // MAJ(c, b, a)
        c.gate(GateName::Cx, &[a(i), b(i)]);
        c.gate(GateName::Cx, &[a(i), carry(i)]);
        toffoli(&mut c, carry(i), b(i), a(i));
    }
    c.gate(GateName::Cx, &[a(m - 1), cout]);
    for i in (0..m).rev() {
        // UMA(c, b, a)
        toffoli(&mut c, carry(i), b(i), a(i));
        c.gate(GateName::Cx, &[a(i), carry(i)]);
        c.gate(GateName::Cx, &[carry(i), b(i)]);
    }
    c.measure_all();
    c
}

/// Shift-and-add multiplier over `m = n / 5`: registers x, y (m each), an
/// accumulator of 2m and an m-qubit carry line. Each of the m² partial
/// products is a controlled-controlled addition cell.
fn multiplier(n: usize) -> Circuit {
    let mut c = new_circuit(n);
    let m = n / 5;
    let x = |i: usize| i;
    let y = |j: usize| m + j;
    let acc = |k: usize| 2 * m + k;
    let car = |k: usize| 4 * m + k;
    for i in 0..m {
        for j in 0..m {
            let k = i + j;
            let cr = car((k + 1) % m);
            toffoli(&mut c, x(i), y(j), cr);
            toffoli(&mut c, cr, acc(k), acc(k + 1));
            c.gate(GateName::Cx, &[cr, acc(k)]);
            toffoli(&mut c, acc(k), car(k % m), cr);
            toffoli(&mut c, cr, acc(k + 1), car(k % m));
            c.gate(GateName::Cx, &[car(k % m), acc(k + 1)]);
            toffoli(&mut c, x(i), y(j), cr);
        }
    }
    c.measure_all();
    c
}

/// Textbook QFT with each controlled phase as two CX and three Rz.
fn qft(n: usize) -> Circuit {
    let mut c = new_circuit(n);
    for i in 0..n {
        c.gate(GateName::H, &[i]);
        for j in i + 1..n {
            c.gate(GateName::Rz, &[i]);
            c.gate(GateName::Cx, &[j, i]);
            c.gate(GateName::Rz, &[i]);
            c.gate(GateName::Cx, &[j, i]);
            c.gate(GateName::Rz, &[j]);
        }
    }
    c.measure_all();
    c
}

/// Variational generator/discriminator ansatz: six entangling sweeps along
/// a line of qubits, the last one stopping two bonds short.
fn qugan(n: usize) -> Circuit {
    let mut c = new_circuit(n);
    for q in 0..n {
        c.gate(GateName::Ry, &[q]);
    }
    for sweep in 0..6 {
        let bonds = if sweep == 5 { (n - 1).saturating_sub(2) } else { n - 1 };
        for i in 0..bonds {
            c.gate(GateName::Cx, &[i, i + 1]);
            c.gate(GateName::Ry, &[i + 1]);
        }
    }
    c.measure_all();
    c
}

/// Ancilla 0 controls a swap between `a_i = 1 + i` and `b_i = 1 + m + i`.
fn swap_test(n: usize) -> Circuit {
    let mut c = new_circuit(n);
    let m = (n - 1) / 2;
    c.gate(GateName::H, &[0]);
    for i in 0..m {
        cswap(&mut c, 0, 1 + i, 1 + m + i);
    }
    c.gate(GateName::H, &[0]);
    c.measure_all();
    c
}

/// `depth` layers of random pairings, each pair getting a three-CX SU(4) block.
fn quantum_volume(n: usize, depth: usize) -> Circuit {
    let mut c = new_circuit(n);
    let mut rng = ChaCha8Rng::seed_from_u64(n as u64);
    let mut perm: Vec<usize> = (0..n).collect();
    for _ in 0..depth {
        perm.shuffle(&mut rng);
        for pair in perm.chunks_exact(2) {
            let (a, b) = (pair[0], pair[1]);
            for _ in 0..3 {
                c.gate(GateName::U3, &[a]);
                c.gate(GateName::U3, &[b]);
                c.gate(GateName::Cx, &[a, b]);
            }
            c.gate(GateName::U3, &[a]);
            c.gate(GateName::U3, &[b]);
        }
    }
    c.measure_all();
    c
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::circuit_depth;

    #[test]
    fn exact_reference_counts() {
        for name in [
            "ghz_n127", "cat_n65", "cat_n130", "ising_n34", "ising_n98", "bv_n70", "bv_n140", "qugan_n71",
            "qugan_n111", "knn_n67", "knn_n129", "swap_test_n115", "cc_n64", "qft_n160", "qv_n100",
        ] {
            let (_, n, two_q, _) = *REFERENCE.iter().find(|r| r.0 == name).unwrap();
            let c = benchmark(name).unwrap();
            assert_eq!(c.num_qubits, n, "{name}");
            assert_eq!(c.num_two_qubit_gates(), two_q, "{name}");
            assert_eq!(c.name, name);
        }
    }

    #[test]
    fn closed_form_depths() {
        assert_eq!(circuit_depth(&benchmark("ghz_n127").unwrap()), 128);
        assert_eq!(circuit_depth(&benchmark("cat_n65").unwrap()), 66);
        assert_eq!(circuit_depth(&benchmark("ising_n34").unwrap()), 16);
        assert_eq!(circuit_depth(&benchmark("cat_n130").unwrap()), 131);
        assert_eq!(circuit_depth(&benchmark("bv_n70").unwrap()), 40);
        assert_eq!(circuit_depth(&benchmark("bv_n140").unwrap()), 76);
    }

    #[test]
    fn arithmetic_sizes() {
        let a = benchmark("adder_n64").unwrap();
        assert_eq!((a.num_qubits, a.num_two_qubit_gates()), (64, 16 * 31 + 1));
        let a = benchmark("adder_n118").unwrap();
        assert_eq!((a.num_qubits, a.num_two_qubit_gates()), (118, 16 * 58 + 1));
        let m = benchmark("multiplier_n45").unwrap();
        assert_eq!((m.num_qubits, m.num_two_qubit_gates()), (45, 32 * 81));
        let m = benchmark("multiplier_n75").unwrap();
        assert_eq!((m.num_qubits, m.num_two_qubit_gates()), (75, 32 * 225));
        assert_eq!(benchmark("qft_n63").unwrap().num_two_qubit_gates(), 63 * 62);
    }

    #[test]
    fn every_qubit_is_used() {
        for name in ["adder_n64", "multiplier_n45", "knn_n129", "qv_n100", "qugan_n39", "cc_n64"] {
            let c = benchmark(name).unwrap();
            let mut used = vec![false; c.num_qubits];
            for g in c.gates.iter().filter(|g| !g.is_marker()) {
                for &q in &g.operands {
                    used[q] = true;
                }
            }
            assert!(used.iter().all(|&u| u), "{name}");
        }
    }

    #[test]
    fn names_and_mixes() {
        assert_eq!(split_name("swap_test_n115").unwrap(), ("swap_test", 115));
        assert!(benchmark("nope_n5").is_err());
        assert!(benchmark("ghz").is_err());
        assert_eq!(Mix::Arithmetic.circuits(), &["adder_n64", "adder_n118", "multiplier_n45", "multiplier_n75"]);
        for mix in [Mix::Mixed, Mix::Qft, Mix::Qugan, Mix::Arithmetic] {
            for name in mix.circuits() {
                benchmark(name).unwrap();
            }
        }
    }

    #[test]
    fn file_overrides_synthesized() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("ghz_n3.qasm"), "OPENQASM 2.0;\nqreg q[3];\ncx q[0],q[2];\n").unwrap();
        let c = load_benchmark("ghz_n3", Some(dir.path())).unwrap();
        assert_eq!(c.num_two_qubit_gates(), 1);
        assert_eq!(c.name, "ghz_n3");
        let c = load_benchmark("ghz_n4", Some(dir.path())).unwrap();
        assert_eq!(c.num_two_qubit_gates(), 3);
    }
}
