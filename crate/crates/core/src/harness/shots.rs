use std::f64::consts::FRAC_PI_2;

use rand::Rng as _;

use crate::circuit::{gate_matrix, GateSpec};
use crate::error::{invalid, Error, Result};
use crate::inequality::{CoefficientTable, CorrelationTensor, Direction, MeasurementSettings};
use crate::qstate::{CMatrix, DensityMatrix, StateVector};
use crate::seed::Rng;

/// Simulated output state: pure for noiseless runs, a density matrix otherwise.
#[derive(Debug, Clone, PartialEq)]
pub enum SimState {
    Pure(StateVector),
    Mixed(DensityMatrix),
}

impl SimState {
    pub fn n_qubits(&self) -> usize {
        match self {
            SimState::Pure(s) => s.n_qubits(),
            SimState::Mixed(r) => r.n_qubits(),
        }
    }

    pub fn correlation_tensor(&self) -> Result<CorrelationTensor> {
        match self {
            SimState::Pure(s) => CorrelationTensor::from_state(s),
            SimState::Mixed(r) => CorrelationTensor::from_density(r),
        }
    }

    /// Outcome distribution after rotating qubit `k` so that `dirs[k]` maps to Z.
    pub fn rotated_distribution(&self, dirs: &[Direction]) -> Result<Vec<f64>> {
        if dirs.len() != self.n_qubits() {
            return Err(Error::DimensionMismatch { expected: self.n_qubits(), got: dirs.len() });
        }
        let rotations = dirs.iter().map(|d| basis_rotation(*d)).collect::<Result<Vec<_>>>()?;
        match self {
            SimState::Pure(s) => {
                let mut s = s.clone();
                for (k, u) in rotations.iter().enumerate() {
                    s.apply_trusted(u, &[k]);
                }
                Ok(s.probabilities())
            }
            SimState::Mixed(r) => {
                let mut r = r.clone();
                for (k, u) in rotations.iter().enumerate() {
                    r = r.apply_unitary(u, &[k])?;
                }
                Ok(r.diagonal())
            }
        }
    }
}

/// Single-qubit unitary `U` with `U (sigma.n) U^dag = Z`.
pub fn basis_rotation(d: Direction) -> Result<CMatrix> {
    gate_matrix(&GateSpec::prx(0, d.theta, d.phi - FRAC_PI_2))
}

fn parity_sign(idx: usize) -> f64 {
    if idx.count_ones() % 2 == 0 { 1.0 } else { -1.0 }
}

/// Shot estimate of the product correlator `<(sigma.n_0) x ... x (sigma.n_{N-1})>`.
pub fn sample_correlator(state: &SimState, dirs: &[Direction], shots: usize, rng: &mut Rng) -> Result<f64> {
    if shots == 0 {
        return Err(invalid("shot sampling needs at least one shot"));
    }
    let probs = state.rotated_distribution(dirs)?;
    let mut cdf = Vec::with_capacity(probs.len());
    let mut acc = 0.0;
    for p in &probs {
        acc += p;
        cdf.push(acc);
    }
    let mut sum = 0.0;
    for _ in 0..shots {
        let u = rng.random::<f64>() * acc;
        let idx = cdf.partition_point(|&c| c <= u).min(probs.len() - 1);
        sum += parity_sign(idx);
    }
    Ok(sum / shots as f64)
}

/// Measurement directions for setting string `s` (party 0 in the top bit).
pub fn setting_directions(settings: &MeasurementSettings, s: usize) -> Vec<Direction> {
    let n = settings.n_parties();
    (0..n).map(|k| settings.angles[k][(s >> (n - 1 - k)) & 1]).collect()
}

/// Shot estimate of the Bell value: every correlator with a nonzero
/// coefficient sampled independently with `shots` shots.
pub fn estimate_bell_value(
    state: &SimState,
    table: &CoefficientTable,
    settings: &MeasurementSettings,
    shots: usize,
    rng: &mut Rng,
) -> Result<f64> {
    if settings.n_parties() != table.n_parties || state.n_qubits() != table.n_parties {
        return Err(Error::DimensionMismatch { expected: table.n_parties, got: settings.n_parties() });
    }
    let mut value = 0.0;
    for (s, &c) in table.coeffs.iter().enumerate() {
        if c == 0.0 {
            continue;
        }
        value += c * sample_correlator(state, &setting_directions(settings, s), shots, rng)?;
    }
    Ok(value.abs())
}

/// Exact Bell value of `state` at fixed settings.
pub fn exact_bell_value(state: &SimState, table: &CoefficientTable, settings: &MeasurementSettings) -> Result<f64> {
    if settings.n_parties() != table.n_parties || state.n_qubits() != table.n_parties {
        return Err(Error::DimensionMismatch { expected: table.n_parties, got: settings.n_parties() });
    }
    Ok(state.correlation_tensor()?.signed_value(table, &settings.bloch_vectors()).abs())
}
