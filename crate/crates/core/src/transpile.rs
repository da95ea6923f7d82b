//! Rewriting circuits into hardware-native gate sets.
//!
//! Two targets are modelled: an IQM-like set (`PRX`, `CZ`) and an IonQ-like
//! set (`GPI`, `GPI2`, `MS`). Z rotations are never emitted as gates; each
//! qubit carries a virtual frame `Rz(f)` that is folded into the phase of the
//! next native gate. Whatever frame remains at the end is either compiled to
//! two pi pulses or dropped when a computational-basis measurement follows.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use serde::{Deserialize, Serialize};

use crate::circuit::{gate_counts, gate_matrix, Circuit, Connectivity, Ensemble, GateCounts, GateKind, GateSpec};
use crate::error::{invalid, Error, Result};
use crate::inequality::Direction;
use crate::qstate::{CMatrix, StateVector, C64};

/// Largest register for which full unitaries are built.
pub const UNITARY_MAX_QUBITS: usize = 6;

const ANGLE_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TargetKind {
    #[serde(rename = "IQM_like")]
    IqmLike,
    #[serde(rename = "IonQ_like")]
    IonqLike,
}

impl std::str::FromStr for TargetKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "iqm" | "iqmlike" => Ok(TargetKind::IqmLike),
            "ionq" | "ionqlike" => Ok(TargetKind::IonqLike),
            _ => Err(invalid(format!("unknown native target '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NativeTarget {
    pub name: TargetKind,
    pub connectivity: Connectivity,
}

impl NativeTarget {
    pub fn new(name: TargetKind, connectivity: Connectivity) -> Result<Self> {
        let t = NativeTarget { name, connectivity };
        t.validate()?;
        Ok(t)
    }

    pub fn iqm_like(connectivity: Connectivity) -> Result<Self> {
        Self::new(TargetKind::IqmLike, connectivity)
    }

    pub fn ionq_like(connectivity: Connectivity) -> Result<Self> {
        Self::new(TargetKind::IonqLike, connectivity)
    }

    pub fn validate(&self) -> Result<()> {
        Connectivity::new(self.connectivity.n_qubits, self.connectivity.edges.clone()).map(|_| ())
    }

    pub fn single_qubit_natives(&self) -> &'static [GateKind] {
        match self.name {
            TargetKind::IqmLike => &[GateKind::Prx],
            TargetKind::IonqLike => &[GateKind::Gpi, GateKind::Gpi2],
        }
    }

    pub fn two_qubit_native(&self) -> GateKind {
        match self.name {
            TargetKind::IqmLike => GateKind::Cz,
            TargetKind::IonqLike => GateKind::Ms,
        }
    }

    pub fn is_native(&self, kind: GateKind) -> bool {
        kind == self.two_qubit_native() || self.single_qubit_natives().contains(&kind)
    }

    /// The random-circuit ensemble whose gates are native here.
    pub fn ensemble(&self) -> Ensemble {
        match self.name {
            TargetKind::IqmLike => Ensemble::NativeIqm,
            TargetKind::IonqLike => Ensemble::NativeIonq,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecomposeOptions {
    /// Insert SWAP chains for two-qubit gates on uncoupled pairs.
    pub route: bool,
    /// Discard the residual Z frames. Only valid when every qubit is
    /// measured in the computational basis right after the circuit.
    pub drop_final_frame: bool,
}

impl Default for DecomposeOptions {
    fn default() -> Self {
        DecomposeOptions { route: true, drop_final_frame: false }
    }
}

/// `V = e^{i alpha} Rz(a) Ry(b) Rz(c)`; returns `(a, b, c)`.
pub fn zyz_angles(v: &CMatrix) -> (f64, f64, f64) {
    let det = v[(0, 0)] * v[(1, 1)] - v[(0, 1)] * v[(1, 0)];
    let w = v / det.sqrt();
    let b = 2.0 * w[(1, 0)].norm().atan2(w[(0, 0)].norm());
    let (cos_small, sin_small) = (w[(0, 0)].norm() < 1e-12, w[(1, 0)].norm() < 1e-12);
    let (sum, diff) = match (cos_small, sin_small) {
        (true, _) => (0.0, 2.0 * w[(1, 0)].arg()),
        (_, true) => (2.0 * w[(1, 1)].arg(), 0.0),
        _ => (2.0 * w[(1, 1)].arg(), 2.0 * w[(1, 0)].arg()),
    };
    ((sum + diff) / 2.0, b, (sum - diff) / 2.0)
}

fn wrap(a: f64) -> f64 {
    let r = a.rem_euclid(TAU);
    if (TAU - r).abs() < ANGLE_EPS { 0.0 } else { r }
}

fn near(a: f64, b: f64) -> bool {
    (a - b).abs() < 1e-12
}

struct Emitter<'a> {
    target: &'a NativeTarget,
    opts: DecomposeOptions,
    frames: Vec<f64>,
    out: Vec<GateSpec>,
}

impl Emitter<'_> {
    fn rz(&mut self, q: usize, a: f64) {
        self.frames[q] += a;
    }

    /// Logical `PRX(theta, phi)` after everything emitted so far.
    fn rotation(&mut self, q: usize, theta: f64, phi: f64) {
        let (theta, phi) = if theta < 0.0 { (-theta, phi + PI) } else { (theta, phi) };
        let theta = theta.rem_euclid(2.0 * TAU);
        // PRX(theta + 2pi) = -PRX(theta).
        let (theta, phi) = if theta > PI + ANGLE_EPS {
            let t = theta.rem_euclid(TAU);
            if t > PI { (TAU - t, phi + PI) } else { (t, phi) }
        } else {
            (theta, phi)
        };
        if theta.abs() < ANGLE_EPS {
            return;
        }
        let phys = wrap(phi - self.frames[q]);
        match self.target.name {
            TargetKind::IqmLike => self.out.push(GateSpec::prx(q, theta, phys)),
            TargetKind::IonqLike => {
                if near(theta, PI) {
                    self.out.push(GateSpec::gpi(q, phys));
                } else if near(theta, FRAC_PI_2) {
                    self.out.push(GateSpec::gpi2(q, phys));
                } else {
                    // R_phi(theta) = GPI2(phi + pi/2) Rz(theta) GPI2(phi - pi/2).
                    self.rotation(q, FRAC_PI_2, phi - FRAC_PI_2);
                    self.rz(q, theta);
                    self.rotation(q, FRAC_PI_2, phi + FRAC_PI_2);
                }
            }
        }
    }

    fn single(&mut self, q: usize, u: &CMatrix) {
        let (a, b, c) = zyz_angles(u);
        self.rz(q, c);
        self.rotation(q, b, FRAC_PI_2);
        self.rz(q, a);
    }

    fn h(&mut self, q: usize) {
        let m = gate_matrix(&GateSpec::h(q)).expect("H is valid");
        self.single(q, &m);
    }

    /// Symmetric Molmer-Sorensen `exp(-i pi/4 sigma_phi0 sigma_phi1)`.
    fn ms(&mut self, a: usize, b: usize, phi0: f64, phi1: f64) {
        match self.target.name {
            TargetKind::IonqLike => {
                let (p0, p1) = (wrap(phi0 - self.frames[a]), wrap(phi1 - self.frames[b]));
                self.out.push(GateSpec::ms(a, b, p0, p1));
            }
            TargetKind::IqmLike => {
                // MS(p0,p1) = Rz(p0)Rz(p1) H H exp(-i pi/4 ZZ) H H Rz(-p0)Rz(-p1)
                // and exp(-i pi/4 ZZ) ~ CZ Rz(pi/2) Rz(pi/2).
                self.rz(a, -phi0);
                self.rz(b, -phi1);
                self.h(a);
                self.h(b);
                self.rz(a, FRAC_PI_2);
                self.rz(b, FRAC_PI_2);
                self.out.push(GateSpec::cz(a, b));
                self.h(a);
                self.h(b);
                self.rz(a, phi0);
                self.rz(b, phi1);
            }
        }
    }

    fn cz(&mut self, a: usize, b: usize) {
        match self.target.name {
            TargetKind::IqmLike => self.out.push(GateSpec::cz(a, b)),
            TargetKind::IonqLike => {
                // CZ ~ Rz(-pi/2)Rz(-pi/2) H H MS(0,0) H H.
                self.h(a);
                self.h(b);
                self.ms(a, b, 0.0, 0.0);
                self.h(a);
                self.h(b);
                self.rz(a, -FRAC_PI_2);
                self.rz(b, -FRAC_PI_2);
            }
        }
    }

    fn cnot(&mut self, c: usize, t: usize) {
        self.h(t);
        self.cz(c, t);
        self.h(t);
    }

    fn two_qubit_direct(&mut self, g: &GateSpec, a: usize, b: usize) -> Result<()> {
        match g.kind {
            GateKind::Cnot => self.cnot(a, b),
            GateKind::Cz => self.cz(a, b),
            GateKind::Ms => self.ms(a, b, g.params[0], g.params[1]),
            _ => return Err(invalid(format!("cannot decompose {}", g.kind))),
        }
        Ok(())
    }

    fn swap(&mut self, a: usize, b: usize) {
        self.cnot(a, b);
        self.cnot(b, a);
        self.cnot(a, b);
    }

    fn two_qubit(&mut self, g: &GateSpec) -> Result<()> {
        let (a, b) = (g.targets[0], g.targets[1]);
        let conn = &self.target.connectivity;
        if conn.connected(a, b) {
            return self.two_qubit_direct(g, a, b);
        }
        if !self.opts.route {
            return Err(Error::InvalidTargets(format!("qubits {a} and {b} are not coupled and routing is off")));
        }
        let path = conn
            .shortest_path(a, b)
            .ok_or_else(|| Error::InvalidTargets(format!("no path between qubits {a} and {b}")))?;
        let hops = path.len() - 2;
        for w in path[..=hops].windows(2) {
            self.swap(w[0], w[1]);
        }
        self.two_qubit_direct(g, path[hops], b)?;
        for w in path[..=hops].windows(2).rev() {
            self.swap(w[0], w[1]);
        }
        Ok(())
    }

    fn gate(&mut self, g: &GateSpec) -> Result<()> {
        match g.kind {
            GateKind::Prx => self.rotation(g.targets[0], g.params[0], g.params[1]),
            GateKind::Gpi => self.rotation(g.targets[0], PI, g.params[0]),
            GateKind::Gpi2 => self.rotation(g.targets[0], FRAC_PI_2, g.params[0]),
            GateKind::Cnot | GateKind::Cz | GateKind::Ms => self.two_qubit(g)?,
            GateKind::RawUnitary if g.targets.len() != 1 => {
                return Err(invalid("multi-qubit raw unitaries cannot be decomposed"));
            }
            _ => self.single(g.targets[0], &gate_matrix(g)?),
        }
        Ok(())
    }

    fn finish(mut self) -> Vec<GateSpec> {
        if !self.opts.drop_final_frame {
            for q in 0..self.frames.len() {
                let f = wrap(self.frames[q]);
                if f.abs() < ANGLE_EPS {
                    continue;
                }
                // Rz(f) ~ PRX(pi, f/2) PRX(pi, 0).
                match self.target.name {
                    TargetKind::IqmLike => {
                        self.out.push(GateSpec::prx(q, PI, 0.0));
                        self.out.push(GateSpec::prx(q, PI, f / 2.0));
                    }
                    TargetKind::IonqLike => {
                        self.out.push(GateSpec::gpi(q, 0.0));
                        self.out.push(GateSpec::gpi(q, f / 2.0));
                    }
                }
            }
        }
        self.out
    }
}

/// Native rewrite of `c` with default options (routing on, frames kept).
pub fn decompose(c: &Circuit, target: &NativeTarget) -> Result<Circuit> {
    decompose_with(c, target, DecomposeOptions::default())
}

pub fn decompose_with(c: &Circuit, target: &NativeTarget, opts: DecomposeOptions) -> Result<Circuit> {
    c.validate()?;
    target.validate()?;
    if target.connectivity.n_qubits < c.n_qubits {
        return Err(invalid("target has fewer qubits than the circuit"));
    }
    let mut em = Emitter { target, opts, frames: vec![0.0; c.n_qubits], out: Vec::new() };
    for g in &c.gates {
        em.gate(g)?;
    }
    Ok(Circuit { gates: em.finish(), ..c.clone() })
}

/// Full unitary of a circuit (`n <= 6`).
pub fn circuit_unitary(c: &Circuit) -> Result<CMatrix> {
    c.validate()?;
    if c.n_qubits > UNITARY_MAX_QUBITS {
        return Err(invalid(format!("unitary construction limited to {UNITARY_MAX_QUBITS} qubits")));
    }
    let mats = c.gates.iter().map(gate_matrix).collect::<Result<Vec<_>>>()?;
    let d = 1 << c.n_qubits;
    let mut u = CMatrix::zeros(d, d);
    for j in 0..d {
        let mut psi = StateVector::basis(c.n_qubits, j)?;
        for (g, m) in c.gates.iter().zip(&mats) {
            psi.apply_trusted(m, &g.targets);
        }
        for (i, a) in psi.amplitudes().iter().enumerate() {
            u[(i, j)] = *a;
        }
    }
    Ok(u)
}

/// `1 - |Tr(U_a^dagger U_b)| / 2^n`, insensitive to global phase.
pub fn unitary_distance(a: &Circuit, b: &Circuit) -> Result<f64> {
    if a.n_qubits != b.n_qubits {
        return Err(Error::DimensionMismatch { expected: a.n_qubits, got: b.n_qubits });
    }
    let (ua, ub) = (circuit_unitary(a)?, circuit_unitary(b)?);
    // Tr(A^dagger B) = sum_ij conj(A_ij) B_ij.
    let tr: C64 = ua.iter().zip(ub.iter()).map(|(x, y)| x.conj() * y).sum();
    Ok((1.0 - tr.norm() / (1u64 << a.n_qubits) as f64).max(0.0))
}

/// Appends, per qubit, the rotation that maps `sigma . n` onto `Z`, so a
/// computational-basis readout measures the requested observable.
pub fn with_measurement_basis(c: &Circuit, dirs: &[Direction]) -> Result<Circuit> {
    if dirs.len() != c.n_qubits {
        return Err(Error::DimensionMismatch { expected: c.n_qubits, got: dirs.len() });
    }
    let mut out = c.clone();
    for (q, d) in dirs.iter().enumerate() {
        out.push(GateSpec::prx(q, d.theta, d.phi - FRAC_PI_2));
    }
    Ok(out)
}

/// Native circuit for one setting string: state preparation followed by the
/// basis change, with the trailing frames dropped ahead of readout.
pub fn native_measurement_circuit(c: &Circuit, dirs: &[Direction], target: &NativeTarget) -> Result<Circuit> {
    let logical = with_measurement_basis(c, dirs)?;
    decompose_with(&logical, target, DecomposeOptions { route: true, drop_final_frame: true })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Representative {
    /// Position in the input list.
    pub index: usize,
    pub value: f64,
    pub seed: u64,
    pub gate_counts: GateCounts,
    pub circuit: Circuit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepresentativeBin {
    pub lo: f64,
    pub hi: f64,
    pub representative: Option<Representative>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepresentativeSet {
    pub origin: f64,
    pub width: f64,
    pub bins: Vec<RepresentativeBin>,
}

impl RepresentativeSet {
    pub fn occupied(&self) -> impl Iterator<Item = (usize, &Representative)> {
        self.bins.iter().enumerate().filter_map(|(i, b)| b.representative.as_ref().map(|r| (i, r)))
    }
}

/// Index of the half-open bin `[lo + k w, lo + (k+1) w)` holding `v`.
pub fn bin_index(v: f64, lo: f64, width: f64, count: usize) -> Option<usize> {
    if !v.is_finite() || v < lo {
        return None;
    }
    let edge = |k: usize| lo + k as f64 * width;
    let mut k = ((v - lo) / width).floor() as usize;
    while k > 0 && v < edge(k) {
        k -= 1;
    }
    while v >= edge(k + 1) {
        k += 1;
    }
    (k < count).then_some(k)
}

/// Per-bin representative: the circuit minimizing
/// `(two-qubit gates, total gates, seed)`.
pub fn select_representatives(results: &[(Circuit, f64)], lo: f64, width: f64, count: usize) -> Result<RepresentativeSet> {
    if !(width > 0.0) {
        return Err(invalid("bin width must be positive"));
    }
    let mut bins: Vec<RepresentativeBin> = (0..count)
        .map(|k| RepresentativeBin { lo: lo + k as f64 * width, hi: lo + (k + 1) as f64 * width, representative: None })
        .collect();
    for (index, (c, v)) in results.iter().enumerate() {
        let Some(k) = bin_index(*v, lo, width, count) else { continue };
        let counts = gate_counts(c);
        let key = (counts.two_qubit, counts.total, c.seed);
        let better = match &bins[k].representative {
            None => true,
            Some(r) => key < (r.gate_counts.two_qubit, r.gate_counts.total, r.seed),
        };
        if better {
            bins[k].representative =
                Some(Representative { index, value: *v, seed: c.seed, gate_counts: counts, circuit: c.clone() });
        }
    }
    Ok(RepresentativeSet { origin: lo, width, bins })
}
