use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{Circuit, GateName, QasmError, Source};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Ghz,
    Cat,
    Bv,
    Ising,
    QftCoupling,
}

impl FromStr for Family {
    type Err = QasmError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "ghz" => Family::Ghz,
            "cat" => Family::Cat,
            "bv" => Family::Bv,
            "ising" => Family::Ising,
            "qft_coupling" | "qft-coupling" => Family::QftCoupling,
            other => return Err(QasmError::UnsupportedFamily(other.to_string())),
        })
    }
}

impl Family {
    pub fn as_str(self) -> &'static str {
        match self {
            Family::Ghz => "ghz",
            Family::Cat => "cat",
            Family::Bv => "bv",
            Family::Ising => "ising",
            Family::QftCoupling => "qft_coupling",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenParams {
    /// Bernstein-Vazirani secret over the n-1 data qubits.
    #[serde(default)]
    pub secret: Option<Vec<bool>>,
    /// Coupling rounds for the Ising family (default 2).
    #[serde(default)]
    pub layers: Option<usize>,
}

impl GenParams {
    /// Parses a secret given as a `0`/`1` string.
    pub fn with_secret_str(mut self, bits: &str) -> Result<Self, QasmError> {
        let secret = bits
            .chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(QasmError::BadParams(format!("secret contains `{other}`"))),
            })
            .collect::<Result<Vec<_>, _>>()?;
        self.secret = Some(secret);
        Ok(self)
    }
}

/// Builds a circuit of the requested family on `n` qubits. Every family ends
/// with a measurement of all qubits.
pub fn generate_circuit(family: Family, n: usize, params: &GenParams) -> Result<Circuit, QasmError> {
    if n < 2 {
        return Err(QasmError::BadParams(format!("need at least 2 qubits, got {n}")));
    }
    let mut c = Circuit::new(format!("{}_n{n}", family.as_str()), n, Source::Generated);
    match family {
        Family::Ghz | Family::Cat => {
            c.gate(GateName::H, &[0]);
            for q in 0..n - 1 {
                c.gate(GateName::Cx, &[q, q + 1]);
            }
        }
        Family::Bv => {
            let secret = params
                .secret
                .as_ref()
                .ok_or_else(|| QasmError::BadParams("bv requires a secret bitstring".into()))?;
            if secret.len() != n - 1 {
                return Err(QasmError::BadParams(format!(
                    "secret has {} bits, expected {}",
                    secret.len(),
                    n - 1
                )));
            }
            let ancilla = n - 1;
            c.gate(GateName::X, &[ancilla]);
            for q in 0..n {
                c.gate(GateName::H, &[q]);
            }
            for (q, _) in secret.iter().enumerate().filter(|(_, &b)| b) {
                c.gate(GateName::Cx, &[q, ancilla]);
            }
            for q in 0..n {
                c.gate(GateName::H, &[q]);
            }
        }
        Family::Ising => {
            let layers = params.layers.unwrap_or(2);
            if layers == 0 {
                return Err(QasmError::BadParams("ising needs at least one layer".into()));
            }
            for q in 0..n {
                c.gate(GateName::H, &[q]);
            }
            for _ in 0..layers {
                for q in 0..n {
                    c.gate(GateName::Rz, &[q]);
                }
                for start in [0, 1] {
                    for i in (start..n - 1).step_by(2) {
                        c.gate(GateName::Cx, &[i, i + 1]);
                    }
                    for i in (start..n - 1).step_by(2) {
                        c.gate(GateName::Rz, &[i + 1]);
                    }
                }
                for q in 0..n {
                    c.gate(GateName::Rx, &[q]);
                }
                for q in 0..n {
                    c.gate(GateName::Ry, &[q]);
                }
            }
        }
        Family::QftCoupling => {
            for i in 0..n {
                c.gate(GateName::H, &[i]);
                for j in i + 1..n {
                    c.gate(GateName::Cp, &[j, i]);
                }
            }
        }
    }
    c.measure_all();
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_counts() {
        for n in [2, 3, 10, 65, 127] {
            let p = GenParams::default();
            assert_eq!(generate_circuit(Family::Ghz, n, &p).unwrap().num_two_qubit_gates(), n - 1);
            assert_eq!(generate_circuit(Family::Cat, n, &p).unwrap().num_two_qubit_gates(), n - 1);
            assert_eq!(
                generate_circuit(Family::Ising, n, &p).unwrap().num_two_qubit_gates(),
                2 * (n - 1)
            );
            assert_eq!(
                generate_circuit(Family::QftCoupling, n, &p).unwrap().num_two_qubit_gates(),
                n * (n - 1) / 2
            );
        }
    }

    #[test]
    fn bv_counts_secret_ones() {
        let p = GenParams::default().with_secret_str("10110").unwrap();
        let c = generate_circuit(Family::Bv, 6, &p).unwrap();
        assert_eq!(c.num_two_qubit_gates(), 3);
        assert!(generate_circuit(Family::Bv, 6, &GenParams::default()).is_err());
        assert!(generate_circuit(Family::Bv, 5, &p).is_err());
        assert!(GenParams::default().with_secret_str("10x").is_err());
    }

    #[test]
    fn errors() {
        assert!(matches!("qv".parse::<Family>(), Err(QasmError::UnsupportedFamily(_))));
        assert!(matches!(
            generate_circuit(Family::Ghz, 1, &GenParams::default()),
            Err(QasmError::BadParams(_))
        ));
    }
}
