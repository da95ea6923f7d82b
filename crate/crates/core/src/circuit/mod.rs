//! Circuits: gate library, random ensembles, simulation and interchange.

pub mod gates;
pub mod qasm;
pub mod random;
pub mod simulate;
pub mod stabilizer;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{invalid, Error, Result};

pub use gates::{gate_matrix, GateKind, GateSpec};
pub use random::{haar_unitary, random_circuit, random_depth};
pub use simulate::{simulate_noisy, simulate_pure};
pub use stabilizer::enumerate_stabilizer_states;

/// Gate set a circuit was drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Ensemble {
    Clifford,
    CliffordT,
    #[serde(rename = "NativeIQM")]
    NativeIqm,
    #[serde(rename = "NativeIonQ")]
    NativeIonq,
    #[serde(rename = "HaarUnitary", alias = "Haar")]
    Haar,
    /// Hand-built or rewritten circuits.
    Custom,
}

impl Ensemble {
    pub fn label(self) -> &'static str {
        match self {
            Ensemble::Clifford => "Clifford",
            Ensemble::CliffordT => "CliffordT",
            Ensemble::NativeIqm => "NativeIQM",
            Ensemble::NativeIonq => "NativeIonQ",
            Ensemble::Haar => "HaarUnitary",
            Ensemble::Custom => "Custom",
        }
    }

    pub fn needs_connectivity(self) -> bool {
        matches!(self, Ensemble::NativeIqm | Ensemble::NativeIonq)
    }
}

impl std::str::FromStr for Ensemble {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_', '+'], "").as_str() {
            "clifford" => Ok(Ensemble::Clifford),
            "clifft" | "cliffordt" => Ok(Ensemble::CliffordT),
            "nativeiqm" | "iqm" => Ok(Ensemble::NativeIqm),
            "nativeionq" | "ionq" => Ok(Ensemble::NativeIonq),
            "haar" | "haarunitary" => Ok(Ensemble::Haar),
            "custom" => Ok(Ensemble::Custom),
            _ => Err(invalid(format!("unknown ensemble '{s}'"))),
        }
    }
}

/// Ordered gate list over `n_qubits` qubits plus generation metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Circuit {
    pub n_qubits: usize,
    pub ensemble: Ensemble,
    pub seed: u64,
    #[serde(default)]
    pub depth: usize,
    pub gates: Vec<GateSpec>,
}

impl Circuit {
    pub fn new(n_qubits: usize) -> Self {
        Circuit { n_qubits, ensemble: Ensemble::Custom, seed: 0, depth: 0, gates: Vec::new() }
    }

    pub fn with_gates(n_qubits: usize, gates: Vec<GateSpec>) -> Self {
        Circuit { gates, ..Circuit::new(n_qubits) }
    }

    pub fn push(&mut self, g: GateSpec) -> &mut Self {
        self.gates.push(g);
        self
    }

    /// H on qubit 0 followed by a CNOT chain.
    pub fn ghz(n_qubits: usize) -> Self {
        let mut c = Circuit::new(n_qubits);
        c.push(GateSpec::h(0));
        for q in 1..n_qubits {
            c.push(GateSpec::cnot(q - 1, q));
        }
        c.depth = n_qubits;
        c
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_qubits == 0 {
            return Err(invalid("circuit has no qubits"));
        }
        for g in &self.gates {
            g.validate()?;
            for (i, &t) in g.targets.iter().enumerate() {
                if t >= self.n_qubits {
                    return Err(Error::InvalidTargets(format!(
                        "{} targets qubit {t} of a {}-qubit circuit",
                        g.kind, self.n_qubits
                    )));
                }
                if g.targets[..i].contains(&t) {
                    return Err(Error::InvalidTargets(format!("{} repeats qubit {t}", g.kind)));
                }
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let c: Circuit = serde_json::from_str(s)?;
        c.validate()?;
        Ok(c)
    }

    /// SHA-256 of the canonical JSON encoding (hex).
    pub fn digest(&self) -> String {
        let json = serde_json::to_vec(self).expect("circuit serializes");
        hex::encode(Sha256::digest(&json))
    }
}

/// Depolarizing strengths applied after each gate.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseModel {
    pub p1: f64,
    pub p2: f64,
}

impl NoiseModel {
    pub fn new(p1: f64, p2: f64) -> Result<Self> {
        let nm = NoiseModel { p1, p2 };
        nm.validate()?;
        Ok(nm)
    }

    pub fn uniform(p: f64) -> Result<Self> {
        Self::new(p, p)
    }

    pub fn noiseless() -> Self {
        NoiseModel::default()
    }

    pub fn is_noiseless(&self) -> bool {
        self.p1 == 0.0 && self.p2 == 0.0
    }

    pub fn validate(&self) -> Result<()> {
        for p in [self.p1, self.p2] {
            if !(0.0..=1.0).contains(&p) {
                return Err(invalid(format!("noise parameter {p} outside [0, 1]")));
            }
        }
        Ok(())
    }
}

/// Undirected coupling graph.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Connectivity {
    pub n_qubits: usize,
    pub edges: Vec<(usize, usize)>,
}

impl Connectivity {
    pub fn new(n_qubits: usize, edges: Vec<(usize, usize)>) -> Result<Self> {
        for &(a, b) in &edges {
            if a >= n_qubits || b >= n_qubits || a == b {
                return Err(invalid(format!("invalid edge ({a}, {b}) for {n_qubits} qubits")));
            }
        }
        Ok(Connectivity { n_qubits, edges })
    }

    pub fn all_to_all(n_qubits: usize) -> Self {
        let edges = (0..n_qubits)
            .flat_map(|a| (a + 1..n_qubits).map(move |b| (a, b)))
            .collect();
        Connectivity { n_qubits, edges }
    }

    pub fn linear(n_qubits: usize) -> Self {
        let edges = (1..n_qubits).map(|q| (q - 1, q)).collect();
        Connectivity { n_qubits, edges }
    }

    pub fn connected(&self, a: usize, b: usize) -> bool {
        self.edges.iter().any(|&(x, y)| (x, y) == (a, b) || (x, y) == (b, a))
    }

    pub fn neighbors(&self, q: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .edges
            .iter()
            .filter_map(|&(a, b)| if a == q { Some(b) } else if b == q { Some(a) } else { None })
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Breadth-first shortest path from `a` to `b`, inclusive.
    pub fn shortest_path(&self, a: usize, b: usize) -> Option<Vec<usize>> {
        let mut prev = vec![usize::MAX; self.n_qubits];
        let mut queue = std::collections::VecDeque::from([a]);
        prev[a] = a;
        while let Some(q) = queue.pop_front() {
            if q == b {
                let mut path = vec![b];
                let mut cur = b;
                while cur != a {
                    cur = prev[cur];
                    path.push(cur);
                }
                path.reverse();
                return Some(path);
            }
            for nb in self.neighbors(q) {
                if prev[nb] == usize::MAX {
                    prev[nb] = q;
                    queue.push_back(nb);
                }
            }
        }
        None
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct GateCounts {
    pub total: usize,
    pub two_qubit: usize,
    pub per_kind: BTreeMap<String, usize>,
}

pub fn gate_counts(c: &Circuit) -> GateCounts {
    let mut counts = GateCounts::default();
    for g in &c.gates {
        counts.total += 1;
        if g.arity() >= 2 {
            counts.two_qubit += 1;
        }
        *counts.per_kind.entry(g.kind.name().to_string()).or_default() += 1;
    }
    counts
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts() {
        let c = Circuit::with_gates(2, vec![GateSpec::h(0), GateSpec::cnot(0, 1), GateSpec::t(1)]);
        let k = gate_counts(&c);
        assert_eq!((k.total, k.two_qubit), (3, 1));
        assert_eq!(k.per_kind["T"], 1);
        assert_eq!(gate_counts(&Circuit::new(3)), GateCounts::default());
    }

    #[test]
    fn validate_targets() {
        let c = Circuit::with_gates(2, vec![GateSpec::cnot(0, 2)]);
        assert!(matches!(c.validate(), Err(Error::InvalidTargets(_))));
        let d = Circuit::with_gates(2, vec![GateSpec::cnot(1, 1)]);
        assert!(d.validate().is_err());
    }

    #[test]
    fn json_schema_and_digest() {
        let mut c = Circuit::ghz(3);
        c.seed = 9;
        let v: serde_json::Value = serde_json::from_str(&c.to_json().unwrap()).unwrap();
        for key in ["n_qubits", "ensemble", "seed", "gates"] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
        assert_eq!(v["gates"][1]["kind"], "CNOT");
        let back = Circuit::from_json(&c.to_json().unwrap()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.digest(), c.digest());
        assert_eq!(c.digest().len(), 64);
    }

    #[test]
    fn shortest_paths() {
        let line = Connectivity::linear(4);
        assert_eq!(line.shortest_path(0, 3), Some(vec![0, 1, 2, 3]));
        assert!(line.connected(2, 1));
        assert!(!line.connected(0, 2));
        let split = Connectivity::new(4, vec![(0, 1)]).unwrap();
        assert_eq!(split.shortest_path(0, 3), None);
        assert!(Connectivity::new(2, vec![(0, 2)]).is_err());
    }

    #[test]
    fn ensemble_names() {
        assert_eq!("clifford+t".parse::<Ensemble>().unwrap(), Ensemble::CliffordT);
        assert_eq!("haar".parse::<Ensemble>().unwrap(), Ensemble::Haar);
        assert_eq!(serde_json::to_string(&Ensemble::NativeIqm).unwrap(), "\"NativeIQM\"");
        assert!("bogus".parse::<Ensemble>().is_err());
    }
}
