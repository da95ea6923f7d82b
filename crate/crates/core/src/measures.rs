//! Entanglement and magic quantifiers.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::qstate::{DensityMatrix, Pauli, StateVector, C64, NORM_TOL};

/// Largest register for the exact stabilizer entropy (`4^n` Pauli strings).
pub const MAGIC_MAX_QUBITS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasureReport {
    pub tangle3: Option<f64>,
    pub meyer_wallach_q: f64,
    /// Natural-log stabilizer 2-Renyi entropy; absent for mixed states.
    pub magic_m2: Option<f64>,
}

fn check_normalized(psi: &StateVector) -> Result<()> {
    if (psi.norm_sqr() - 1.0).abs() > 1e-8 {
        return Err(invalid(format!("state is not normalized (norm^2 = {})", psi.norm_sqr())));
    }
    Ok(())
}

/// Three-tangle `4 |d1 - 2 d2 + 4 d3|` (Cayley hyperdeterminant of the
/// amplitude tensor).
pub fn three_tangle(psi: &StateVector) -> Result<f64> {
    if psi.n_qubits() != 3 {
        return Err(Error::DimensionMismatch { expected: 3, got: psi.n_qubits() });
    }
    check_normalized(psi)?;
    let a = psi.amplitudes();
    let p = |i: usize| a[i];
    let sq = |i: usize| a[i] * a[i];
    let d1 = sq(0b000) * sq(0b111) + sq(0b001) * sq(0b110) + sq(0b010) * sq(0b101) + sq(0b100) * sq(0b011);
    let pairs = [
        p(0b000) * p(0b111),
        p(0b011) * p(0b100),
        p(0b101) * p(0b010),
        p(0b110) * p(0b001),
    ];
    let mut d2 = C64::new(0.0, 0.0);
    for i in 0..4 {
        for j in i + 1..4 {
            d2 += pairs[i] * pairs[j];
        }
    }
    let d3 = p(0b000) * p(0b110) * p(0b101) * p(0b011) + p(0b111) * p(0b001) * p(0b010) * p(0b100);
    Ok(4.0 * (d1 - d2 * 2.0 + d3 * 4.0).norm())
}

fn q_from_purities(purities: &[f64]) -> f64 {
    let n = purities.len() as f64;
    let q = 2.0 - (2.0 / n) * purities.iter().sum::<f64>();
    if q.abs() < 1e-9 {
        0.0
    } else if (q - 1.0).abs() < 1e-9 && q > 1.0 {
        1.0
    } else {
        q
    }
}

/// Meyer-Wallach `Q = 2 - (2/n) sum_i Tr(rho_i^2)` of a pure state.
pub fn meyer_wallach_q(psi: &StateVector) -> Result<f64> {
    check_normalized(psi)?;
    meyer_wallach_q_density(&psi.to_density())
}

/// The same formula evaluated on the single-qubit reductions of a mixed
/// state.
pub fn meyer_wallach_q_density(rho: &DensityMatrix) -> Result<f64> {
    let n = rho.n_qubits();
    if n < 2 {
        return Err(invalid("Meyer-Wallach Q needs at least two qubits"));
    }
    let purities = (0..n)
        .map(|q| rho.partial_trace(&[q]).map(|r| r.purity()))
        .collect::<Result<Vec<_>>>()?;
    Ok(q_from_purities(&purities))
}

/// Stabilizer 2-Renyi entropy `-ln(sum_P <P>^4 / 2^n)` over all `4^n`
/// Pauli strings.
pub fn stabilizer_renyi_2(psi: &StateVector) -> Result<f64> {
    let n = psi.n_qubits();
    if n > MAGIC_MAX_QUBITS {
        return Err(invalid(format!("stabilizer entropy limited to {MAGIC_MAX_QUBITS} qubits, got {n}")));
    }
    check_normalized(psi)?;
    let mut paulis = vec![Pauli::I; n];
    let mut total = 0.0;
    for code in 0..4usize.pow(n as u32) {
        let mut c = code;
        for slot in paulis.iter_mut().rev() {
            *slot = Pauli::ALL[c % 4];
            c /= 4;
        }
        total += psi.pauli_expectation(&paulis).powi(4);
    }
    let m2 = -(total / (1u64 << n) as f64).ln();
    Ok(if m2.abs() < 1e-12 { 0.0 } else { m2 })
}

/// All applicable measures of a pure state.
pub fn measure_state(psi: &StateVector) -> Result<MeasureReport> {
    Ok(MeasureReport {
        tangle3: if psi.n_qubits() == 3 { Some(three_tangle(psi)?) } else { None },
        meyer_wallach_q: meyer_wallach_q(psi)?,
        magic_m2: if psi.n_qubits() <= MAGIC_MAX_QUBITS { Some(stabilizer_renyi_2(psi)?) } else { None },
    })
}

/// Measures that apply to a mixed state: only `Q`.
pub fn measure_density(rho: &DensityMatrix) -> Result<MeasureReport> {
    if (rho.trace().re - 1.0).abs() > NORM_TOL * 1e2 {
        return Err(invalid("density matrix trace is not one"));
    }
    Ok(MeasureReport { tangle3: None, meyer_wallach_q: meyer_wallach_q_density(rho)?, magic_m2: None })
}
