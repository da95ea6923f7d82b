//! Pure and noisy simulation from `|0...0>`.

use super::gates::gate_matrix;
use super::{Circuit, NoiseModel};
use crate::error::Result;
use crate::qstate::{depolarizing_kraus, DensityMatrix, StateVector};

pub fn simulate_pure(c: &Circuit) -> Result<StateVector> {
    c.validate()?;
    let mut psi = StateVector::zero(c.n_qubits);
    for g in &c.gates {
        let u = gate_matrix(g)?;
        psi.apply_trusted(&u, &g.targets);
    }
    Ok(psi)
}

/// Density-matrix evolution. After every gate the depolarizing channel is
/// applied: `p1` on the qubit of a single-qubit gate, `p2` jointly on both
/// qubits of a two-qubit gate, and `p1` on each target of a wider gate.
pub fn simulate_noisy(c: &Circuit, nm: &NoiseModel) -> Result<DensityMatrix> {
    c.validate()?;
    nm.validate()?;
    let k1 = depolarizing_kraus(nm.p1, 1)?;
    let k2 = depolarizing_kraus(nm.p2, 2)?;
    let mut rho = StateVector::zero(c.n_qubits).to_density();
    for g in &c.gates {
        let u = gate_matrix(g)?;
        rho = rho.conjugate_trusted(&u, &g.targets);
        match g.arity() {
            1 if nm.p1 > 0.0 => rho = rho.apply_kraus_trusted(&k1, &g.targets),
            2 if nm.p2 > 0.0 => rho = rho.apply_kraus_trusted(&k2, &g.targets),
            a if a > 2 && nm.p1 > 0.0 => {
                for &t in &g.targets {
                    rho = rho.apply_kraus_trusted(&k1, &[t]);
                }
            }
            _ => {}
        }
    }
    Ok(rho)
}
