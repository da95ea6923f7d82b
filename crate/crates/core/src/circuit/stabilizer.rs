//! Exhaustive stabilizer-state enumeration for small registers.

use std::collections::{HashMap, VecDeque};

use super::gates::{gate_matrix, GateSpec};
use super::Circuit;
use crate::error::{invalid, Result};
use crate::qstate::{StateVector, C64};

/// Global-phase-free rounding key: the first amplitude above `1e-9` is
/// rotated onto the positive real axis, then everything is rounded to a
/// `1e-9` grid.
pub fn canonical_key(psi: &StateVector) -> Vec<(i64, i64)> {
    let amps = psi.amplitudes();
    let phase = amps
        .iter()
        .find(|a| a.norm() > 1e-9)
        .map(|a| a.conj() / a.norm())
        .unwrap_or(C64::new(1.0, 0.0));
    amps.iter()
        .map(|a| {
            let z = a * phase;
            ((z.re * 1e9).round() as i64, (z.im * 1e9).round() as i64)
        })
        .collect()
}

fn generators(n: usize) -> Vec<GateSpec> {
    let mut gens = Vec::new();
    for q in 0..n {
        gens.push(GateSpec::h(q));
        gens.push(GateSpec::s(q));
    }
    for a in 0..n {
        for b in 0..n {
            if a != b {
                gens.push(GateSpec::cnot(a, b));
            }
        }
    }
    gens
}

/// Breadth-first closure of `|0...0>` under `{H_i, S_i, CNOT_ij}`; every
/// state comes with a Clifford circuit that prepares it.
pub fn enumerate_stabilizer_circuits(n_qubits: usize) -> Result<Vec<(StateVector, Circuit)>> {
    if !(1..=4).contains(&n_qubits) {
        return Err(invalid(format!(
            "stabilizer enumeration supports 1 to 4 qubits, got {n_qubits}"
        )));
    }
    let gens = generators(n_qubits);
    let mats = gens.iter().map(gate_matrix).collect::<Result<Vec<_>>>()?;
    let start = StateVector::zero(n_qubits);
    let mut seen = HashMap::from([(canonical_key(&start), 0usize)]);
    let mut found = vec![(start, Circuit::new(n_qubits))];
    let mut queue = VecDeque::from([0usize]);
    while let Some(idx) = queue.pop_front() {
        for (g, m) in gens.iter().zip(&mats) {
            let (psi, circ) = &found[idx];
            let mut next = psi.clone();
            next.apply_trusted(m, &g.targets);
            let key = canonical_key(&next);
            if seen.contains_key(&key) {
                continue;
            }
            let mut c = circ.clone();
            c.push(g.clone());
            seen.insert(key, found.len());
            queue.push_back(found.len());
            found.push((next, c));
        }
    }
    Ok(found)
}

/// All `n`-qubit stabilizer states up to global phase (`n <= 4`).
pub fn enumerate_stabilizer_states(n_qubits: usize) -> Result<Vec<StateVector>> {
    Ok(enumerate_stabilizer_circuits(n_qubits)?.into_iter().map(|(s, _)| s).collect())
}
