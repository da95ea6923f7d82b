//! Random circuit ensembles and Haar sampling.

use std::f64::consts::{PI, TAU};

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng as _;
use rand_distr::StandardNormal;

use super::gates::GateSpec;
use super::{Circuit, Connectivity, Ensemble};
use crate::error::{invalid, Result};
use crate::qstate::{CMatrix, C64, MAX_QUBITS};
use crate::seed::{rng_from_seed, Rng};

/// Probability that an unassigned qubit receives a single-qubit gate
/// rather than opening a two-qubit gate.
pub const SINGLE_QUBIT_PROB: f64 = 2.0 / 3.0;

/// Haar-distributed unitary of size `dim` (a power of two): QR of a complex
/// Ginibre matrix, with the phases of `R`'s diagonal folded back into `Q`.
pub fn haar_unitary(dim: usize, rng: &mut Rng) -> Result<CMatrix> {
    if dim == 0 || !dim.is_power_of_two() {
        return Err(invalid(format!("Haar dimension {dim} is not a power of two")));
    }
    let g = CMatrix::from_fn(dim, dim, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
    });
    let qr = g.qr();
    let (mut q, r) = (qr.q(), qr.r());
    for j in 0..dim {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { C64::new(1.0, 0.0) };
        for i in 0..dim {
            q[(i, j)] *= phase;
        }
    }
    Ok(q)
}

/// Uniform integer in `[d_min, d_max]`.
pub fn random_depth(rng: &mut Rng, d_min: usize, d_max: usize) -> Result<usize> {
    if d_min == 0 || d_min > d_max {
        return Err(invalid(format!("invalid depth range [{d_min}, {d_max}]")));
    }
    Ok(rng.random_range(d_min..=d_max))
}

fn single_qubit_gate(ensemble: Ensemble, q: usize, rng: &mut Rng) -> GateSpec {
    match ensemble {
        Ensemble::Clifford => {
            if rng.random_bool(0.5) {
                GateSpec::h(q)
            } else {
                GateSpec::s(q)
            }
        }
        Ensemble::CliffordT => match rng.random_range(0..3) {
            0 => GateSpec::h(q),
            1 => GateSpec::s(q),
            _ => GateSpec::t(q),
        },
        Ensemble::NativeIqm => GateSpec::prx(q, rng.random_range(0.0..PI), rng.random_range(0.0..TAU)),
        Ensemble::NativeIonq => {
            if rng.random_bool(0.5) {
                GateSpec::gpi(q, rng.random_range(0.0..TAU))
            } else {
                GateSpec::gpi2(q, rng.random_range(0.0..TAU))
            }
        }
        Ensemble::Haar | Ensemble::Custom => unreachable!("no layer gate set"),
    }
}

fn two_qubit_gate(ensemble: Ensemble, a: usize, b: usize, rng: &mut Rng) -> GateSpec {
    match ensemble {
        Ensemble::Clifford | Ensemble::CliffordT => GateSpec::cnot(a, b),
        Ensemble::NativeIqm => GateSpec::cz(a, b),
        Ensemble::NativeIonq => {
            GateSpec::ms(a, b, rng.random_range(0.0..TAU), rng.random_range(0.0..TAU))
        }
        Ensemble::Haar | Ensemble::Custom => unreachable!("no layer gate set"),
    }
}

/// Draws a random circuit; a deterministic function of
/// `(ensemble, n_qubits, depth, seed, connectivity)`.
///
/// Each layer visits the qubits in random order. An unassigned qubit gets a
/// uniformly drawn single-qubit gate with probability 2/3; otherwise it is
/// paired with a uniformly drawn unassigned partner (restricted to coupled
/// qubits when a connectivity graph is given) and the pair receives the
/// ensemble's two-qubit gate. With no eligible partner the qubit idles.
///
/// The Haar ensemble is a single Haar unitary on all qubits (depth 1).
pub fn random_circuit(
    ensemble: Ensemble,
    n_qubits: usize,
    depth: usize,
    seed: u64,
    connectivity: Option<&Connectivity>,
) -> Result<Circuit> {
    if n_qubits == 0 || n_qubits > MAX_QUBITS {
        return Err(invalid(format!("unsupported qubit count {n_qubits}")));
    }
    if depth == 0 {
        return Err(invalid("circuit depth must be at least 1"));
    }
    if ensemble == Ensemble::Custom {
        return Err(invalid("the custom ensemble cannot be sampled"));
    }
    if ensemble.needs_connectivity() && connectivity.is_none() {
        return Err(invalid(format!("{} requires a connectivity graph", ensemble.label())));
    }
    if let Some(conn) = connectivity {
        if conn.n_qubits < n_qubits {
            return Err(invalid("connectivity graph has fewer qubits than the circuit"));
        }
    }
    let mut rng = rng_from_seed(seed);
    let mut circuit = Circuit { n_qubits, ensemble, seed, depth, gates: Vec::new() };

    if ensemble == Ensemble::Haar {
        let u = haar_unitary(1 << n_qubits, &mut rng)?;
        circuit.gates.push(GateSpec::raw_unitary((0..n_qubits).collect(), &u));
        circuit.depth = 1;
        return Ok(circuit);
    }

    let mut order: Vec<usize> = (0..n_qubits).collect();
    for _ in 0..depth {
        order.shuffle(&mut rng);
        let mut assigned = vec![false; n_qubits];
        for &q in &order {
            if assigned[q] {
                continue;
            }
            if rng.random_bool(SINGLE_QUBIT_PROB) {
                assigned[q] = true;
                circuit.gates.push(single_qubit_gate(ensemble, q, &mut rng));
                continue;
            }
            let partners: Vec<usize> = (0..n_qubits)
                .filter(|&p| p != q && !assigned[p])
                .filter(|&p| connectivity.is_none_or(|c| c.connected(q, p)))
                .collect();
            if let Some(&p) = partners.as_slice().choose(&mut rng) {
                assigned[q] = true;
                assigned[p] = true;
                circuit.gates.push(two_qubit_gate(ensemble, q, p, &mut rng));
            }
        }
    }
    Ok(circuit)
}
