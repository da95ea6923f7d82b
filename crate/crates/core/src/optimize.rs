//! Maximizing Bell values over measurement settings.
//!
//! [`seesaw_maximize`] is the production optimizer. [`chsh_horodecki`] and
//! [`grid_oracle`] are independent references used to check it.

use std::f64::consts::PI;

use nalgebra::{Matrix3, SMatrix, SymmetricEigen};
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::inequality::{CoefficientTable, CorrelationTensor, Direction, MeasurementSettings};
use crate::qstate::DensityMatrix;
use crate::seed::{child_seed, rng_from_seed, Rng};

/// Directions whose update vector is shorter than this are left unchanged.
const DEGENERATE_NORM: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub restarts: usize,
    pub max_iterations: usize,
    pub tolerance: f64,
    pub seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig { restarts: 10, max_iterations: 200, tolerance: 1e-8, seed: 0 }
    }
}

impl OptimizerConfig {
    pub fn with_seed(seed: u64) -> Self {
        OptimizerConfig { seed, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.restarts == 0 {
            return Err(invalid("optimizer needs at least one restart"));
        }
        if self.max_iterations == 0 {
            return Err(invalid("optimizer needs at least one iteration"));
        }
        if !(self.tolerance >= 0.0) {
            return Err(invalid("optimizer tolerance must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViolationResult {
    pub value: f64,
    pub settings: MeasurementSettings,
    pub violated_classical: bool,
    pub violation_margin: f64,
    pub restarts_used: usize,
    /// Sweeps performed by the winning restart.
    pub iterations: usize,
    pub converged: bool,
}

fn random_unit(rng: &mut Rng) -> [f64; 3] {
    loop {
        let v: [f64; 3] = [rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal)];
        let r = norm(&v);
        if r > 1e-6 {
            return [v[0] / r, v[1] / r, v[2] / r];
        }
    }
}

fn norm(v: &[f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

struct Ascent {
    value: f64,
    dirs: Vec<[[f64; 3]; 2]>,
    iterations: usize,
    converged: bool,
}

/// One see-saw run from `dirs`: each party in turn gets the exact optimum of
/// the (linear) objective in its two directions, `n_k = v_k / |v_k|`.
fn ascend(t: &CorrelationTensor, table: &CoefficientTable, mut dirs: Vec<[[f64; 3]; 2]>, cfg: &OptimizerConfig) -> Result<Ascent> {
    let n = t.n_parties();
    let mut value = t.signed_value(table, &dirs);
    if !value.is_finite() {
        return Err(Error::NonFinite);
    }
    let mut iterations = 0;
    let mut converged = false;
    while iterations < cfg.max_iterations {
        iterations += 1;
        let mut swept = value;
        for i in 0..n {
            let g = t.party_gradient(table, &dirs, i);
            for k in 0..2 {
                let r = norm(&g[k]);
                if r > DEGENERATE_NORM {
                    dirs[i][k] = [g[k][0] / r, g[k][1] / r, g[k][2] / r];
                }
            }
            swept = (0..2).map(|k| (0..3).map(|a| g[k][a] * dirs[i][k][a]).sum::<f64>()).sum();
        }
        if !swept.is_finite() {
            return Err(Error::NonFinite);
        }
        debug_assert!(swept >= value - 1e-12, "see-saw decreased: {value} -> {swept}");
        let gain = swept - value;
        value = value.max(swept);
        if gain < cfg.tolerance {
            converged = true;
            break;
        }
    }
    Ok(Ascent { value, dirs, iterations, converged })
}

/// Multistart see-saw on a precomputed correlation tensor.
pub fn seesaw_maximize_tensor(t: &CorrelationTensor, table: &CoefficientTable, cfg: &OptimizerConfig) -> Result<ViolationResult> {
    cfg.validate()?;
    if t.n_parties() != table.n_parties {
        return Err(Error::DimensionMismatch { expected: table.n_parties, got: t.n_parties() });
    }
    let n = table.n_parties;
    let mut best: Option<Ascent> = None;
    for r in 0..cfg.restarts {
        let mut rng = rng_from_seed(child_seed(cfg.seed, r as u64));
        let start = (0..n).map(|_| [random_unit(&mut rng), random_unit(&mut rng)]).collect();
        let run = ascend(t, table, start, cfg)?;
        // Ties keep the earliest restart.
        if best.as_ref().is_none_or(|b| run.value > b.value) {
            best = Some(run);
        }
    }
    let best = best.expect("at least one restart");
    // Flipping both directions of one party negates the signed value, so the
    // signed maximum is also the maximum of |<O>|.
    let value = best.value.abs();
    Ok(ViolationResult {
        value,
        settings: MeasurementSettings::from_bloch_vectors(&best.dirs),
        violated_classical: table.violates(value),
        violation_margin: value - table.classical_bound,
        restarts_used: cfg.restarts,
        iterations: best.iterations,
        converged: best.converged,
    })
}

/// Multistart see-saw maximization of `|Tr(rho O)|`.
pub fn seesaw_maximize(rho: &DensityMatrix, table: &CoefficientTable, cfg: &OptimizerConfig) -> Result<ViolationResult> {
    if rho.n_qubits() != table.n_parties {
        return Err(Error::DimensionMismatch { expected: table.n_parties, got: rho.n_qubits() });
    }
    seesaw_maximize_tensor(&CorrelationTensor::from_density(rho)?, table, cfg)
}

/// Closed-form maximal CHSH value (halved normalization): `sqrt(u1 + u2)`
/// for the two largest eigenvalues of `T^T T`.
pub fn chsh_horodecki(rho: &DensityMatrix) -> Result<f64> {
    if rho.n_qubits() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, got: rho.n_qubits() });
    }
    let t = CorrelationTensor::from_density(rho)?;
    let m = Matrix3::from_row_slice(t.data());
    let mut u: Vec<f64> = SymmetricEigen::new(m.transpose() * m).eigenvalues.iter().copied().collect();
    u.sort_by(|a, b| b.total_cmp(a));
    Ok((u[0] + u[1]).max(0.0).sqrt())
}

/// Largest lattice size (directions^(2N)) the grid oracle will accept.
pub const GRID_BUDGET: f64 = 1e15;

/// Bloch vectors of the angle lattice with spacing `step`, without the
/// duplicate points at the poles.
pub fn lattice_directions(step: f64) -> Result<Vec<[f64; 3]>> {
    let m = (PI / step).round();
    if !(step > 0.0) || m < 1.0 || (m * step - PI).abs() > 1e-9 {
        return Err(invalid(format!("grid step {step} does not divide pi")));
    }
    let m = m as usize;
    let mut out = vec![Direction { theta: 0.0, phi: 0.0 }.bloch()];
    for i in 1..m {
        for j in 0..2 * m {
            out.push(Direction { theta: i as f64 * step, phi: j as f64 * step }.bloch());
        }
    }
    out.push(Direction { theta: PI, phi: 0.0 }.bloch());
    Ok(out)
}

fn dot(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn best_on_lattice(lattice: &[[f64; 3]], v: &[f64; 3]) -> (usize, f64) {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, d) in lattice.iter().enumerate() {
        let x = dot(d, v);
        if x > best.1 {
            best = (i, x);
        }
    }
    best
}

struct GridSearch<'a> {
    t: &'a CorrelationTensor,
    table: &'a CoefficientTable,
    lattice: Vec<[f64; 3]>,
    best: f64,
}

impl GridSearch<'_> {
    /// Lattice coordinate ascent, used only to seed the incumbent.
    fn lattice_ascent(&self, mut idx: Vec<[usize; 2]>) -> f64 {
        let n = self.table.n_parties;
        let mut value = f64::NEG_INFINITY;
        for _ in 0..100 {
            let mut swept = value;
            for i in 0..n {
                let dirs = self.dirs(&idx);
                let g = self.t.party_gradient(self.table, &dirs, i);
                let (a, va) = best_on_lattice(&self.lattice, &g[0]);
                let (b, vb) = best_on_lattice(&self.lattice, &g[1]);
                idx[i] = [a, b];
                swept = va + vb;
            }
            if swept <= value + 1e-12 {
                break;
            }
            value = swept;
        }
        value
    }

    fn dirs(&self, idx: &[[usize; 2]]) -> Vec<[[f64; 3]; 2]> {
        idx.iter().map(|&[a, b]| [self.lattice[a], self.lattice[b]]).collect()
    }

    /// Upper bound on the objective over the unit sphere for `free`
    /// remaining parties, given their folded tensor.
    fn bound(&self, partial: &[f64], free: usize) -> f64 {
        let block = 3usize.pow(free as u32);
        if free == 2 {
            // Blocks W_{k1 k2}; the objective is sum_{k2} n2_{k2}.v_{k2} with
            // v = M (n1_0, n1_1), so it is at most both sum ||W|| and 2 ||M||.
            let mut m = SMatrix::<f64, 6, 6>::zeros();
            let mut per_block = 0.0;
            for (sr, w) in partial.chunks(block).enumerate() {
                let (k1, k2) = (sr >> 1, sr & 1);
                let w3 = Matrix3::from_row_slice(w);
                per_block += spectral_norm3(&w3);
                for a1 in 0..3 {
                    for a2 in 0..3 {
                        m[(k2 * 3 + a2, k1 * 3 + a1)] = w3[(a1, a2)];
                    }
                }
            }
            let stacked = 2.0 * SymmetricEigen::new(m.transpose() * m).eigenvalues.max().max(0.0).sqrt();
            return per_block.min(stacked);
        }
        partial
            .chunks(block)
            .map(|w| match free {
                1 => (w[0] * w[0] + w[1] * w[1] + w[2] * w[2]).sqrt(),
                _ => w.iter().map(|x| x * x).sum::<f64>().sqrt(),
            })
            .sum()
    }

    /// Folds the coefficient table into the contraction of the first
    /// `fixed` parties: returns, for each setting string of the free
    /// parties, their Pauli tensor.
    fn fold(&self, fixed_dirs: &[[[f64; 3]; 2]]) -> Vec<f64> {
        let n = self.table.n_parties;
        let f = fixed_dirs.len();
        let free = n - f;
        let block = 3usize.pow(free as u32);
        // Contract the fixed parties: shape [2]*f x [3]*free.
        let mut cur = self.t.data().to_vec();
        let mut outer_states = 1usize;
        for d in fixed_dirs {
            let inner = cur.len() / (outer_states * 3);
            let mut next = vec![0.0; outer_states * 2 * inner];
            for o in 0..outer_states {
                for k in 0..2 {
                    let dst = &mut next[(o * 2 + k) * inner..(o * 2 + k + 1) * inner];
                    for a in 0..3 {
                        let w = d[k][a];
                        let src = &cur[(o * 3 + a) * inner..(o * 3 + a + 1) * inner];
                        for (x, &y) in dst.iter_mut().zip(src) {
                            *x += w * y;
                        }
                    }
                }
            }
            outer_states *= 2;
            cur = next;
        }
        let mut out = vec![0.0; (1 << free) * block];
        for sf in 0..outer_states {
            let src = &cur[sf * block..(sf + 1) * block];
            for sr in 0..1usize << free {
                let c = self.table.coeffs[(sf << free) | sr];
                if c == 0.0 {
                    continue;
                }
                let dst = &mut out[sr * block..(sr + 1) * block];
                for (x, &y) in dst.iter_mut().zip(src) {
                    *x += c * y;
                }
            }
        }
        out
    }

    /// Exhausts the last two parties given their folded tensor.
    fn search_pair(&mut self, folded: &[f64]) {
        let d = self.lattice.len();
        // x[k1][k2][a] = W_{k1 k2}^T n_a
        let mut x = vec![[0.0f64; 3]; 4 * d];
        for (sr, w) in folded.chunks(9).enumerate() {
            for (a, n) in self.lattice.iter().enumerate() {
                let v = &mut x[sr * d + a];
                for a2 in 0..3 {
                    v[a2] = (0..3).map(|a1| w[a1 * 3 + a2] * n[a1]).sum();
                }
            }
        }
        let add = |p: &[f64; 3], q: &[f64; 3]| [p[0] + q[0], p[1] + q[1], p[2] + q[2]];
        for a in 0..d {
            for b in 0..d {
                let v0 = add(&x[a], &x[2 * d + b]);
                let v1 = add(&x[d + a], &x[3 * d + b]);
                if norm(&v0) + norm(&v1) <= self.best + 1e-12 {
                    continue;
                }
                let value = best_on_lattice(&self.lattice, &v0).1 + best_on_lattice(&self.lattice, &v1).1;
                self.best = self.best.max(value);
            }
        }
    }

    fn search(&mut self, fixed: &mut Vec<[[f64; 3]; 2]>, folded: &[f64]) {
        let free = self.table.n_parties - fixed.len();
        if free == 2 {
            self.search_pair(folded);
            return;
        }
        let d = self.lattice.len();
        for a in 0..d {
            for b in 0..d {
                fixed.push([self.lattice[a], self.lattice[b]]);
                let next = self.fold(fixed);
                if self.bound(&next, free - 1) > self.best + 1e-12 {
                    self.search(fixed, &next);
                }
                fixed.pop();
            }
        }
    }
}

fn spectral_norm3(m: &Matrix3<f64>) -> f64 {
    SymmetricEigen::new(m.transpose() * m).eigenvalues.max().max(0.0).sqrt()
}

/// Exact maximum of the signed Bell value over the angle lattice
/// `theta in {0, step, .., pi}`, `phi in {0, step, .., 2pi - step}`.
///
/// Branch and bound over the parties: a subtree is skipped only when a
/// rigorous upper bound over the full sphere cannot beat the incumbent, so
/// the result equals the brute-force lattice maximum.
pub fn grid_oracle(rho: &DensityMatrix, table: &CoefficientTable, step: f64) -> Result<f64> {
    if rho.n_qubits() != table.n_parties {
        return Err(Error::DimensionMismatch { expected: table.n_parties, got: rho.n_qubits() });
    }
    let n = table.n_parties;
    let lattice = lattice_directions(step)?;
    let size = (lattice.len() as f64).powi(2 * n as i32);
    if n > 3 || size > GRID_BUDGET {
        return Err(invalid(format!(
            "grid oracle over {} directions for {n} parties exceeds the budget",
            lattice.len()
        )));
    }
    let t = CorrelationTensor::from_density(rho)?;
    let mut gs = GridSearch { t: &t, table, lattice, best: f64::NEG_INFINITY };
    let d = gs.lattice.len();
    for start in 0..8usize {
        let idx = (0..n)
            .map(|i| [(start * 7 + i * 13) % d, (start * 11 + i * 5 + d / 2) % d])
            .collect();
        gs.best = gs.best.max(gs.lattice_ascent(idx));
    }
    let root = gs.fold(&[]);
    gs.search(&mut Vec::new(), &root);
    Ok(gs.best.abs())
}
