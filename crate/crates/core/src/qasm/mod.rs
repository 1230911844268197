//! Circuit representation, OpenQASM 2.0 subset frontend and synthetic circuit families.

mod generate;
mod parser;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use generate::{generate_circuit, Family, GenParams};
pub use parser::parse_qasm;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum QasmError {
    #[error("syntax error at {line}:{column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("unsupported gate `{name}` at line {line}")]
    UnsupportedGate { name: String, line: usize },
    #[error("qubit index out of range at line {line}: {message}")]
    IndexOutOfRange { line: usize, message: String },
    #[error("invalid operands at line {line}: {message}")]
    InvalidOperands { line: usize, message: String },
    #[error("unsupported circuit family `{0}`")]
    UnsupportedFamily(String),
    #[error("bad generator parameters: {0}")]
    BadParams(String),
}

/// Gates understood by the frontend. Angles are parsed and dropped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GateName {
    H,
    X,
    Y,
    Z,
    S,
    Sdg,
    T,
    Tdg,
    Rx,
    Ry,
    Rz,
    U1,
    U2,
    U3,
    Cx,
    Cz,
    Swap,
    Cu1,
    Crz,
    Cp,
}

impl GateName {
    pub fn from_qasm(name: &str) -> Option<Self> {
        use GateName::*;
        Some(match name {
            "h" => H,
            "x" => X,
            "y" => Y,
            "z" => Z,
            "s" => S,
            "sdg" => Sdg,
            "t" => T,
            "tdg" => Tdg,
            "rx" => Rx,
            "ry" => Ry,
            "rz" => Rz,
            "u1" => U1,
            "u2" => U2,
            "u3" | "U" => U3,
            "cx" | "CX" => Cx,
            "cz" => Cz,
            "swap" => Swap,
            "cu1" => Cu1,
            "crz" => Crz,
            "cp" => Cp,
            _ => return None,
        })
    }

    pub fn as_str(self) -> &'static str {
        use GateName::*;
        match self {
            H => "h",
            X => "x",
            Y => "y",
            Z => "z",
            S => "s",
            Sdg => "sdg",
            T => "t",
            Tdg => "tdg",
            Rx => "rx",
            Ry => "ry",
            Rz => "rz",
            U1 => "u1",
            U2 => "u2",
            U3 => "u3",
            Cx => "cx",
            Cz => "cz",
            Swap => "swap",
            Cu1 => "cu1",
            Crz => "crz",
            Cp => "cp",
        }
    }

    pub fn arity(self) -> usize {
        use GateName::*;
        match self {
            Cx | Cz | Swap | Cu1 | Crz | Cp => 2,
            _ => 1,
        }
    }

    /// Number of angle parameters the gate takes in QASM syntax.
    pub fn num_params(self) -> usize {
        use GateName::*;
        match self {
            Rx | Ry | Rz | U1 | Cu1 | Crz | Cp => 1,
            U2 => 2,
            U3 => 3,
            _ => 0,
        }
    }
}

impl fmt::Display for GateName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GateKind {
    Single(GateName),
    Two(GateName),
    /// Zero-cost marker; never enters the dependency DAG.
    Measure,
    /// Zero-cost marker; never enters the dependency DAG.
    Barrier,
}

impl GateKind {
    pub fn from_name(name: GateName) -> Self {
        if name.arity() == 2 {
            GateKind::Two(name)
        } else {
            GateKind::Single(name)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Gate {
    pub kind: GateKind,
    pub operands: Vec<usize>,
    /// Position in program order.
    pub seq: usize,
}

impl Gate {
    pub fn is_two_qubit(&self) -> bool {
        matches!(self.kind, GateKind::Two(_))
    }

    pub fn is_marker(&self) -> bool {
        matches!(self.kind, GateKind::Measure | GateKind::Barrier)
    }

    /// The operand pair of a two-qubit gate.
    pub fn pair(&self) -> Option<(usize, usize)> {
        self.is_two_qubit()
            .then(|| (self.operands[0], self.operands[1]))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Parsed,
    Generated,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Circuit {
    pub name: String,
    pub num_qubits: usize,
    pub gates: Vec<Gate>,
    pub source: Source,
}

impl Circuit {
    pub fn new(name: impl Into<String>, num_qubits: usize, source: Source) -> Self {
        Circuit {
            name: name.into(),
            num_qubits,
            gates: Vec::new(),
            source,
        }
    }

    /// Appends a gate; operand validity is the caller's responsibility.
    pub fn push(&mut self, kind: GateKind, operands: Vec<usize>) {
        let seq = self.gates.len();
        self.gates.push(Gate {
            kind,
            operands,
            seq,
        });
    }

    pub fn gate(&mut self, name: GateName, operands: &[usize]) {
        debug_assert_eq!(name.arity(), operands.len());
        self.push(GateKind::from_name(name), operands.to_vec());
    }

    pub fn measure_all(&mut self) {
        for q in 0..self.num_qubits {
            self.push(GateKind::Measure, vec![q]);
        }
    }

    pub fn num_two_qubit_gates(&self) -> usize {
        self.gates.iter().filter(|g| g.is_two_qubit()).count()
    }

    pub fn has_measurements(&self) -> bool {
        self.gates.iter().any(|g| g.kind == GateKind::Measure)
    }

    /// Serializes to the supported QASM subset using a single `q` register.
    pub fn to_qasm(&self) -> String {
        let mut out = String::from("OPENQASM 2.0;\ninclude \"qelib1.inc\";\n");
        out.push_str(&format!("qreg q[{}];\n", self.num_qubits));
        if self.has_measurements() {
            out.push_str(&format!("creg c[{}];\n", self.num_qubits));
        }
        for g in &self.gates {
            let args = g
                .operands
                .iter()
                .map(|q| format!("q[{q}]"))
                .collect::<Vec<_>>()
                .join(",");
            match g.kind {
                GateKind::Single(n) | GateKind::Two(n) => {
                    let params = n.num_params();
                    if params == 0 {
                        out.push_str(&format!("{n} {args};\n"));
                    } else {
                        let zeros = vec!["0"; params].join(",");
                        out.push_str(&format!("{n}({zeros}) {args};\n"));
                    }
                }
                GateKind::Measure => {
                    let q = g.operands[0];
                    out.push_str(&format!("measure q[{q}] -> c[{q}];\n"));
                }
                GateKind::Barrier => out.push_str(&format!("barrier {args};\n")),
            }
        }
        out
    }
}
