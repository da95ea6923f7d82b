//! Dense pure states, density matrices and operator application on qubit
//! subsets.
//!
//! Bit convention shared by the whole crate: qubit 0 is the most significant
//! bit of a computational-basis index, so `|q0 q1 ... q(n-1)>` has index
//! `q0 * 2^(n-1) + ... + q(n-1)`. The same holds for the local index of a
//! gate matrix: the first listed target is its most significant bit.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{invalid, Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;

pub const NORM_TOL: f64 = 1e-10;
pub const UNITARY_TOL: f64 = 1e-10;
/// Largest register handled by the dense backends.
pub const MAX_QUBITS: usize = 12;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

/// Single-qubit Pauli operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub const ALL: [Pauli; 4] = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];
    pub const XYZ: [Pauli; 3] = [Pauli::X, Pauli::Y, Pauli::Z];

    pub fn matrix(self) -> CMatrix {
        let i = C64::new(0.0, 1.0);
        match self {
            Pauli::I => CMatrix::identity(2, 2),
            Pauli::X => CMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO]),
            Pauli::Y => CMatrix::from_row_slice(2, 2, &[ZERO, -i, i, ZERO]),
            Pauli::Z => CMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE]),
        }
    }
}

/// Kronecker product of a list of Paulis (first factor acts on qubit 0).
pub fn pauli_string_matrix(paulis: &[Pauli]) -> CMatrix {
    paulis
        .iter()
        .fold(CMatrix::identity(1, 1), |acc, p| acc.kronecker(&p.matrix()))
}

/// Bit masks and phase data describing a Pauli string as a signed
/// permutation: `P|x> = phase(x) |x ^ flip>`.
struct PauliAction {
    flip: usize,
    z_mask: usize,
    y_count: u32,
}

impl PauliAction {
    fn new(paulis: &[Pauli]) -> Self {
        let n = paulis.len();
        let (mut flip, mut z_mask, mut y_count) = (0usize, 0usize, 0u32);
        for (q, p) in paulis.iter().enumerate() {
            let bit = 1 << (n - 1 - q);
            match p {
                Pauli::I => {}
                Pauli::X => flip |= bit,
                Pauli::Y => {
                    flip |= bit;
                    z_mask |= bit;
                    y_count += 1;
                }
                Pauli::Z => z_mask |= bit,
            }
        }
        PauliAction { flip, z_mask, y_count }
    }

    /// Coefficient of `<x ^ flip| P |x>`.
    #[inline]
    fn phase(&self, x: usize) -> C64 {
        // Y = i X Z, so each Y contributes a factor i and a Z-type sign.
        let sign = if (x & self.z_mask).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
        let base = match self.y_count % 4 {
            0 => ONE,
            1 => C64::new(0.0, 1.0),
            2 => -ONE,
            _ => C64::new(0.0, -1.0),
        };
        base * sign
    }
}

fn check_targets(n_qubits: usize, targets: &[usize]) -> Result<()> {
    if targets.is_empty() {
        return Err(Error::InvalidTargets("empty target list".into()));
    }
    for (i, &t) in targets.iter().enumerate() {
        if t >= n_qubits {
            return Err(Error::InvalidTargets(format!(
                "qubit {t} out of range for {n_qubits} qubits"
            )));
        }
        if targets[..i].contains(&t) {
            return Err(Error::InvalidTargets(format!("duplicate qubit {t}")));
        }
    }
    Ok(())
}

/// Largest entry of `|U^dagger U - I|`.
pub fn unitarity_defect(u: &CMatrix) -> f64 {
    let prod = u.adjoint() * u;
    let mut worst: f64 = 0.0;
    for i in 0..prod.nrows() {
        for j in 0..prod.ncols() {
            let target = if i == j { ONE } else { ZERO };
            worst = worst.max((prod[(i, j)] - target).norm());
        }
    }
    worst
}

fn check_unitary(u: &CMatrix, k: usize) -> Result<()> {
    if u.nrows() != 1 << k || u.ncols() != 1 << k {
        return Err(Error::DimensionMismatch { expected: 1 << k, got: u.nrows() });
    }
    let defect = unitarity_defect(u);
    if defect > UNITARY_TOL {
        return Err(Error::NotUnitary(defect));
    }
    Ok(())
}

/// Applies the `2^k x 2^k` matrix `m` to the `targets` of every vector
/// stored contiguously in `data` (length a multiple of `2^n`).
fn apply_local(data: &mut [C64], n_qubits: usize, m: &CMatrix, targets: &[usize]) {
    let k = targets.len();
    let local_dim = 1usize << k;
    let dim = 1usize << n_qubits;
    let offsets: Vec<usize> = (0..local_dim)
        .map(|local| {
            targets.iter().enumerate().fold(0usize, |acc, (t, &q)| {
                if local >> (k - 1 - t) & 1 == 1 {
                    acc | 1 << (n_qubits - 1 - q)
                } else {
                    acc
                }
            })
        })
        .collect();
    let target_mask = offsets[local_dim - 1];
    let mut buf = vec![ZERO; local_dim];
    for chunk in data.chunks_mut(dim) {
        for base in (0..dim).filter(|b| b & target_mask == 0) {
            for (slot, off) in buf.iter_mut().zip(&offsets) {
                *slot = chunk[base | off];
            }
            for (row, off) in offsets.iter().enumerate() {
                let mut acc = ZERO;
                for (col, v) in buf.iter().enumerate() {
                    acc += m[(row, col)] * v;
                }
                chunk[base | off] = acc;
            }
        }
    }
}

/// Pure state of `n` qubits.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amps: Vec<C64>,
}

impl StateVector {
    /// `|0...0>`.
    pub fn zero(n_qubits: usize) -> Self {
        let mut amps = vec![ZERO; 1 << n_qubits];
        amps[0] = ONE;
        StateVector { n_qubits, amps }
    }

    pub fn basis(n_qubits: usize, index: usize) -> Result<Self> {
        if index >= 1 << n_qubits {
            return Err(invalid(format!("basis index {index} out of range")));
        }
        let mut amps = vec![ZERO; 1 << n_qubits];
        amps[index] = ONE;
        Ok(StateVector { n_qubits, amps })
    }

    /// Wraps amplitudes that are already normalized (within 1e-8); the
    /// residual is divided out.
    pub fn from_amplitudes(amps: Vec<C64>) -> Result<Self> {
        let n = dim_to_qubits(amps.len())?;
        let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-8 {
            return Err(invalid(format!("state is not normalized (norm {norm})")));
        }
        Ok(StateVector { n_qubits: n, amps: amps.into_iter().map(|a| a / norm).collect() })
    }

    /// Normalizes an arbitrary non-zero vector.
    pub fn normalized(amps: Vec<C64>) -> Result<Self> {
        let n = dim_to_qubits(amps.len())?;
        let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if !(norm > 1e-300) || !norm.is_finite() {
            return Err(invalid("cannot normalize a zero or non-finite vector"));
        }
        Ok(StateVector { n_qubits: n, amps: amps.into_iter().map(|a| a / norm).collect() })
    }

    /// `(|0...0> + |1...1>)/sqrt(2)`.
    pub fn ghz(n_qubits: usize) -> Self {
        let mut amps = vec![ZERO; 1 << n_qubits];
        let h = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        amps[0] = h;
        amps[(1 << n_qubits) - 1] = h;
        StateVector { n_qubits, amps }
    }

    /// Equal superposition of all weight-one basis states.
    pub fn w(n_qubits: usize) -> Self {
        let mut amps = vec![ZERO; 1 << n_qubits];
        let a = C64::new(1.0 / (n_qubits as f64).sqrt(), 0.0);
        for q in 0..n_qubits {
            amps[1 << q] = a;
        }
        StateVector { n_qubits, amps }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn inner(&self, other: &StateVector) -> C64 {
        self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }

    /// `self (x) other`, with `self` on the leading qubits.
    pub fn tensor(&self, other: &StateVector) -> StateVector {
        let mut amps = Vec::with_capacity(self.dim() * other.dim());
        for a in &self.amps {
            amps.extend(other.amps.iter().map(|b| a * b));
        }
        StateVector { n_qubits: self.n_qubits + other.n_qubits, amps }
    }

    pub fn apply_unitary(&self, u: &CMatrix, targets: &[usize]) -> Result<StateVector> {
        let mut out = self.clone();
        out.apply_unitary_mut(u, targets)?;
        Ok(out)
    }

    pub fn apply_unitary_mut(&mut self, u: &CMatrix, targets: &[usize]) -> Result<()> {
        check_targets(self.n_qubits, targets)?;
        check_unitary(u, targets.len())?;
        apply_local(&mut self.amps, self.n_qubits, u, targets);
        Ok(())
    }

    /// Applies a matrix that the caller guarantees to be unitary with valid
    /// targets; used on hot simulation paths after validation.
    pub(crate) fn apply_trusted(&mut self, u: &CMatrix, targets: &[usize]) {
        apply_local(&mut self.amps, self.n_qubits, u, targets);
    }

    pub fn to_density(&self) -> DensityMatrix {
        let d = self.dim();
        let mat = CMatrix::from_fn(d, d, |i, j| self.amps[i] * self.amps[j].conj());
        DensityMatrix { n_qubits: self.n_qubits, mat }
    }

    /// `<psi| P |psi>` for a Pauli string of length `n_qubits`.
    pub fn pauli_expectation(&self, paulis: &[Pauli]) -> f64 {
        debug_assert_eq!(paulis.len(), self.n_qubits);
        let action = PauliAction::new(paulis);
        let mut acc = ZERO;
        for (x, a) in self.amps.iter().enumerate() {
            acc += self.amps[x ^ action.flip].conj() * action.phase(x) * a;
        }
        acc.re
    }

    /// Fidelity-style overlap `|<self|other>|^2`.
    pub fn overlap(&self, other: &StateVector) -> f64 {
        self.inner(other).norm_sqr()
    }
}

fn dim_to_qubits(dim: usize) -> Result<usize> {
    if dim < 2 || !dim.is_power_of_two() {
        return Err(invalid(format!("dimension {dim} is not a power of two >= 2")));
    }
    let n = dim.trailing_zeros() as usize;
    if n > MAX_QUBITS {
        return Err(invalid(format!("{n} qubits exceeds the dense limit of {MAX_QUBITS}")));
    }
    Ok(n)
}

/// Mixed state of `n` qubits.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    n_qubits: usize,
    mat: CMatrix,
}

impl DensityMatrix {
    pub fn maximally_mixed(n_qubits: usize) -> Self {
        let d = 1 << n_qubits;
        DensityMatrix { n_qubits, mat: CMatrix::identity(d, d) / C64::new(d as f64, 0.0) }
    }

    /// Validates Hermiticity and unit trace (1e-10) and the spectrum
    /// (eigenvalues >= -1e-9).
    pub fn from_matrix(mat: CMatrix) -> Result<Self> {
        if mat.nrows() != mat.ncols() {
            return Err(Error::DimensionMismatch { expected: mat.nrows(), got: mat.ncols() });
        }
        let n_qubits = dim_to_qubits(mat.nrows())?;
        let herm = (&mat - mat.adjoint()).iter().fold(0.0f64, |m, z| m.max(z.norm()));
        if herm > NORM_TOL {
            return Err(invalid(format!("matrix is not Hermitian (defect {herm:.3e})")));
        }
        let tr = mat.trace();
        if (tr - ONE).norm() > NORM_TOL {
            return Err(invalid(format!("trace {tr} differs from 1")));
        }
        let rho = DensityMatrix { n_qubits, mat };
        let min_eig = rho.eigenvalues().into_iter().fold(f64::INFINITY, f64::min);
        if min_eig < -1e-9 {
            return Err(invalid(format!("matrix has negative eigenvalue {min_eig:.3e}")));
        }
        Ok(rho)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.mat
    }

    pub fn trace(&self) -> C64 {
        self.mat.trace()
    }

    /// Ascending eigenvalues of the Hermitian matrix.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let herm = (&self.mat + self.mat.adjoint()) * C64::new(0.5, 0.0);
        let mut eig: Vec<f64> = herm.symmetric_eigenvalues().iter().copied().collect();
        eig.sort_by(|a, b| a.total_cmp(b));
        eig
    }

    pub fn apply_unitary(&self, u: &CMatrix, targets: &[usize]) -> Result<DensityMatrix> {
        check_targets(self.n_qubits, targets)?;
        check_unitary(u, targets.len())?;
        Ok(self.conjugate_trusted(u, targets))
    }

    /// `K rho K^dagger` without validation.
    pub(crate) fn conjugate_trusted(&self, k: &CMatrix, targets: &[usize]) -> DensityMatrix {
        let n = self.n_qubits;
        // Column-major storage: each column is a contiguous vector, so
        // applying K to all columns computes K rho. Repeating on the adjoint
        // gives K (K rho)^dagger = (K rho K^dagger)^dagger.
        let mut left = self.mat.clone();
        apply_local(left.as_mut_slice(), n, k, targets);
        let mut right = left.adjoint();
        apply_local(right.as_mut_slice(), n, k, targets);
        DensityMatrix { n_qubits: n, mat: right.adjoint() }
    }

    /// `rho -> sum_i K_i rho K_i^dagger` on `targets`.
    pub fn apply_kraus(&self, kraus: &[CMatrix], targets: &[usize]) -> Result<DensityMatrix> {
        check_targets(self.n_qubits, targets)?;
        let d = 1 << targets.len();
        if kraus.is_empty() {
            return Err(Error::IncompleteKraus(1.0));
        }
        let mut completeness = CMatrix::zeros(d, d);
        for k in kraus {
            if k.nrows() != d || k.ncols() != d {
                return Err(Error::DimensionMismatch { expected: d, got: k.nrows() });
            }
            completeness += k.adjoint() * k;
        }
        let defect = (completeness - CMatrix::identity(d, d))
            .iter()
            .fold(0.0f64, |m, z| m.max(z.norm()));
        if defect > NORM_TOL {
            return Err(Error::IncompleteKraus(defect));
        }
        Ok(self.apply_kraus_trusted(kraus, targets))
    }

    pub(crate) fn apply_kraus_trusted(&self, kraus: &[CMatrix], targets: &[usize]) -> DensityMatrix {
        let mut acc = CMatrix::zeros(self.dim(), self.dim());
        for k in kraus {
            acc += self.conjugate_trusted(k, targets).mat;
        }
        DensityMatrix { n_qubits: self.n_qubits, mat: acc }
    }

    /// Reduced state on `keep`, in the listed order.
    pub fn partial_trace(&self, keep: &[usize]) -> Result<DensityMatrix> {
        check_targets(self.n_qubits, keep)?;
        let n = self.n_qubits;
        let traced: Vec<usize> = (0..n).filter(|q| !keep.contains(q)).collect();
        let embed = |qubits: &[usize], local: usize| -> usize {
            let k = qubits.len();
            qubits.iter().enumerate().fold(0usize, |acc, (t, &q)| {
                if local >> (k - 1 - t) & 1 == 1 {
                    acc | 1 << (n - 1 - q)
                } else {
                    acc
                }
            })
        };
        let dk = 1 << keep.len();
        let keep_idx: Vec<usize> = (0..dk).map(|l| embed(keep, l)).collect();
        let env_idx: Vec<usize> = (0..1usize << traced.len()).map(|l| embed(&traced, l)).collect();
        let mat = CMatrix::from_fn(dk, dk, |i, j| {
            env_idx.iter().map(|e| self.mat[(keep_idx[i] | e, keep_idx[j] | e)]).sum()
        });
        Ok(DensityMatrix { n_qubits: keep.len(), mat })
    }

    /// `Tr(rho O)` for a full-register observable.
    pub fn expectation(&self, obs: &HermitianObservable) -> Result<f64> {
        if obs.arity() != self.n_qubits {
            return Err(Error::DimensionMismatch { expected: self.n_qubits, got: obs.arity() });
        }
        let tr: C64 = (0..self.dim())
            .map(|i| (0..self.dim()).map(|j| self.mat[(i, j)] * obs.mat[(j, i)]).sum::<C64>())
            .sum();
        debug_assert!(tr.im.abs() < 1e-9 * (1.0 + tr.re.abs()));
        Ok(tr.re)
    }

    /// `Tr(rho P)` for a Pauli string, in `O(2^n)`.
    pub fn pauli_expectation(&self, paulis: &[Pauli]) -> f64 {
        debug_assert_eq!(paulis.len(), self.n_qubits);
        let action = PauliAction::new(paulis);
        // Tr(rho P) = sum_x <x|rho P|x> = sum_x phase(x) rho[x, x ^ flip].
        (0..self.dim())
            .map(|x| action.phase(x) * self.mat[(x, x ^ action.flip)])
            .sum::<C64>()
            .re
    }

    pub fn purity(&self) -> f64 {
        self.mat.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Probabilities of computational-basis outcomes.
    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.mat[(i, i)].re.max(0.0)).collect()
    }

    pub fn tensor(&self, other: &DensityMatrix) -> DensityMatrix {
        DensityMatrix {
            n_qubits: self.n_qubits + other.n_qubits,
            mat: self.mat.kronecker(&other.mat),
        }
    }
}

/// Hermitian operator on `arity` qubits.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianObservable {
    arity: usize,
    mat: CMatrix,
}

impl HermitianObservable {
    pub fn new(mat: CMatrix) -> Result<Self> {
        if mat.nrows() != mat.ncols() {
            return Err(Error::DimensionMismatch { expected: mat.nrows(), got: mat.ncols() });
        }
        let arity = dim_to_qubits(mat.nrows()).or_else(|e| {
            if mat.nrows() == 1 {
                Ok(0)
            } else {
                Err(e)
            }
        })?;
        let scale = mat.iter().fold(1.0f64, |m, z| m.max(z.norm()));
        let herm = (&mat - mat.adjoint()).iter().fold(0.0f64, |m, z| m.max(z.norm()));
        if herm > 1e-12 * scale {
            return Err(invalid(format!("observable is not Hermitian (defect {herm:.3e})")));
        }
        Ok(HermitianObservable { arity, mat })
    }

    pub fn pauli_string(paulis: &[Pauli]) -> Self {
        HermitianObservable { arity: paulis.len(), mat: pauli_string_matrix(paulis) }
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.mat
    }

    pub fn into_matrix(self) -> CMatrix {
        self.mat
    }

    /// Ascending eigenvalues.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut eig: Vec<f64> = self.mat.clone().symmetric_eigenvalues().iter().copied().collect();
        eig.sort_by(|a, b| a.total_cmp(b));
        eig
    }

    /// Largest absolute eigenvalue.
    pub fn operator_norm(&self) -> f64 {
        self.eigenvalues().into_iter().fold(0.0, |m, e| m.max(e.abs()))
    }
}

/// Depolarizing channel on one or two qubits.
///
/// One qubit: `{sqrt(1-3p/4) I, sqrt(p/4) X, sqrt(p/4) Y, sqrt(p/4) Z}`.
/// Two qubits: all 16 Pauli pairs, `p/16` weight on each non-identity pair.
pub fn depolarizing_kraus(p: f64, n_targets: usize) -> Result<Vec<CMatrix>> {
    if !(0.0..=1.0).contains(&p) {
        return Err(invalid(format!("depolarizing parameter {p} outside [0, 1]")));
    }
    match n_targets {
        1 => {
            let w0 = (1.0 - 0.75 * p).sqrt();
            let w = (p / 4.0).sqrt();
            Ok(Pauli::ALL
                .iter()
                .map(|&s| s.matrix() * C64::new(if s == Pauli::I { w0 } else { w }, 0.0))
                .collect())
        }
        2 => {
            let w0 = (1.0 - 15.0 * p / 16.0).sqrt();
            let w = (p / 16.0).sqrt();
            let mut out = Vec::with_capacity(16);
            for a in Pauli::ALL {
                for b in Pauli::ALL {
                    let weight = if a == Pauli::I && b == Pauli::I { w0 } else { w };
                    out.push(a.matrix().kronecker(&b.matrix()) * C64::new(weight, 0.0));
                }
            }
            Ok(out)
        }
        k => Err(invalid(format!("depolarizing channel defined on 1 or 2 qubits, not {k}"))),
    }
}
