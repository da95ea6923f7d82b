//! Gate library.
//!
//! Native-gate conventions:
//! - `PRX(theta, phi) = exp(-i theta/2 (cos(phi) X + sin(phi) Y))`
//! - `GPI(phi) = [[0, e^{-i phi}], [e^{i phi}, 0]]`
//! - `GPI2(phi) = PRX(pi/2, phi)`
//! - `MS(phi0, phi1) = exp(-i pi/4 (cos(phi0) X + sin(phi0) Y) (x) (cos(phi1) X + sin(phi1) Y))`

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_4};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::qstate::{unitarity_defect, CMatrix, C64, UNITARY_TOL};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum GateKind {
    H,
    S,
    T,
    X,
    Y,
    Z,
    #[serde(rename = "CNOT")]
    Cnot,
    #[serde(rename = "CZ")]
    Cz,
    #[serde(rename = "PRX")]
    Prx,
    #[serde(rename = "GPI")]
    Gpi,
    #[serde(rename = "GPI2")]
    Gpi2,
    #[serde(rename = "MS")]
    Ms,
    RawUnitary,
}

impl GateKind {
    /// Number of qubits, or `None` for `RawUnitary`.
    pub fn arity(self) -> Option<usize> {
        match self {
            GateKind::Cnot | GateKind::Cz | GateKind::Ms => Some(2),
            GateKind::RawUnitary => None,
            _ => Some(1),
        }
    }

    pub fn n_params(self) -> usize {
        match self {
            GateKind::Prx | GateKind::Ms => 2,
            GateKind::Gpi | GateKind::Gpi2 => 1,
            _ => 0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            GateKind::H => "H",
            GateKind::S => "S",
            GateKind::T => "T",
            GateKind::X => "X",
            GateKind::Y => "Y",
            GateKind::Z => "Z",
            GateKind::Cnot => "CNOT",
            GateKind::Cz => "CZ",
            GateKind::Prx => "PRX",
            GateKind::Gpi => "GPI",
            GateKind::Gpi2 => "GPI2",
            GateKind::Ms => "MS",
            GateKind::RawUnitary => "RawUnitary",
        }
    }
}

impl fmt::Display for GateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One gate application. `matrix` is only present for `RawUnitary`, stored
/// row-major as `[re, im]` pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateSpec {
    pub kind: GateKind,
    pub targets: Vec<usize>,
    #[serde(default)]
    pub params: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<Vec<[f64; 2]>>,
}

impl GateSpec {
    fn simple(kind: GateKind, targets: Vec<usize>, params: Vec<f64>) -> Self {
        GateSpec { kind, targets, params, matrix: None }
    }

    pub fn h(q: usize) -> Self {
        Self::simple(GateKind::H, vec![q], vec![])
    }
    pub fn s(q: usize) -> Self {
        Self::simple(GateKind::S, vec![q], vec![])
    }
    pub fn t(q: usize) -> Self {
        Self::simple(GateKind::T, vec![q], vec![])
    }
    pub fn x(q: usize) -> Self {
        Self::simple(GateKind::X, vec![q], vec![])
    }
    pub fn y(q: usize) -> Self {
        Self::simple(GateKind::Y, vec![q], vec![])
    }
    pub fn z(q: usize) -> Self {
        Self::simple(GateKind::Z, vec![q], vec![])
    }
    pub fn cnot(control: usize, target: usize) -> Self {
        Self::simple(GateKind::Cnot, vec![control, target], vec![])
    }
    pub fn cz(a: usize, b: usize) -> Self {
        Self::simple(GateKind::Cz, vec![a, b], vec![])
    }
    pub fn prx(q: usize, theta: f64, phi: f64) -> Self {
        Self::simple(GateKind::Prx, vec![q], vec![theta, phi])
    }
    pub fn gpi(q: usize, phi: f64) -> Self {
        Self::simple(GateKind::Gpi, vec![q], vec![phi])
    }
    pub fn gpi2(q: usize, phi: f64) -> Self {
        Self::simple(GateKind::Gpi2, vec![q], vec![phi])
    }
    pub fn ms(a: usize, b: usize, phi0: f64, phi1: f64) -> Self {
        Self::simple(GateKind::Ms, vec![a, b], vec![phi0, phi1])
    }

    pub fn raw_unitary(targets: Vec<usize>, u: &CMatrix) -> Self {
        let d = u.nrows();
        let mut data = Vec::with_capacity(d * d);
        for i in 0..d {
            for j in 0..d {
                data.push([u[(i, j)].re, u[(i, j)].im]);
            }
        }
        GateSpec { kind: GateKind::RawUnitary, targets, params: vec![], matrix: Some(data) }
    }

    pub fn arity(&self) -> usize {
        self.targets.len()
    }

    /// Structural checks: arity, parameter count and finiteness.
    pub fn validate(&self) -> Result<()> {
        match self.kind.arity() {
            Some(a) if a != self.targets.len() => {
                return Err(invalid(format!(
                    "{} acts on {a} qubits, got {} targets",
                    self.kind,
                    self.targets.len()
                )))
            }
            None if self.targets.is_empty() => return Err(invalid("RawUnitary without targets")),
            _ => {}
        }
        if self.params.len() != self.kind.n_params() {
            return Err(invalid(format!(
                "{} takes {} parameters, got {}",
                self.kind,
                self.kind.n_params(),
                self.params.len()
            )));
        }
        if self.params.iter().any(|p| !p.is_finite()) {
            return Err(invalid(format!("{} has non-finite parameters", self.kind)));
        }
        match (&self.matrix, self.kind) {
            (Some(m), GateKind::RawUnitary) => {
                let d = 1usize << self.targets.len();
                if m.len() != d * d {
                    return Err(Error::DimensionMismatch { expected: d * d, got: m.len() });
                }
            }
            (None, GateKind::RawUnitary) => return Err(invalid("RawUnitary without matrix")),
            (Some(_), k) => return Err(invalid(format!("{k} must not carry a matrix"))),
            (None, _) => {}
        }
        Ok(())
    }
}

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn prx_matrix(theta: f64, phi: f64) -> CMatrix {
    let (cs, sn) = ((theta / 2.0).cos(), (theta / 2.0).sin());
    let mi = c(0.0, -1.0);
    CMatrix::from_row_slice(
        2,
        2,
        &[
            c(cs, 0.0),
            mi * C64::from_polar(sn, -phi),
            mi * C64::from_polar(sn, phi),
            c(cs, 0.0),
        ],
    )
}

/// `exp(-i theta/2 Z)`.
pub fn rz_matrix(theta: f64) -> CMatrix {
    CMatrix::from_row_slice(
        2,
        2,
        &[C64::from_polar(1.0, -theta / 2.0), c(0.0, 0.0), c(0.0, 0.0), C64::from_polar(1.0, theta / 2.0)],
    )
}

/// Unitary matrix of a gate (first target = most significant local bit).
pub fn gate_matrix(g: &GateSpec) -> Result<CMatrix> {
    g.validate()?;
    let z = c(0.0, 0.0);
    let o = c(1.0, 0.0);
    let m = match g.kind {
        GateKind::H => {
            let h = c(FRAC_1_SQRT_2, 0.0);
            CMatrix::from_row_slice(2, 2, &[h, h, h, -h])
        }
        GateKind::S => CMatrix::from_row_slice(2, 2, &[o, z, z, c(0.0, 1.0)]),
        GateKind::T => CMatrix::from_row_slice(2, 2, &[o, z, z, C64::from_polar(1.0, FRAC_PI_4)]),
        GateKind::X => CMatrix::from_row_slice(2, 2, &[z, o, o, z]),
        GateKind::Y => CMatrix::from_row_slice(2, 2, &[z, c(0.0, -1.0), c(0.0, 1.0), z]),
        GateKind::Z => CMatrix::from_row_slice(2, 2, &[o, z, z, -o]),
        GateKind::Cnot => {
            let mut m = CMatrix::identity(4, 4);
            m[(2, 2)] = z;
            m[(3, 3)] = z;
            m[(2, 3)] = o;
            m[(3, 2)] = o;
            m
        }
        GateKind::Cz => {
            let mut m = CMatrix::identity(4, 4);
            m[(3, 3)] = -o;
            m
        }
        GateKind::Prx => prx_matrix(g.params[0], g.params[1]),
        GateKind::Gpi => {
            let phi = g.params[0];
            CMatrix::from_row_slice(2, 2, &[z, C64::from_polar(1.0, -phi), C64::from_polar(1.0, phi), z])
        }
        GateKind::Gpi2 => prx_matrix(std::f64::consts::FRAC_PI_2, g.params[0]),
        GateKind::Ms => {
            let (p0, p1) = (g.params[0], g.params[1]);
            let s = FRAC_1_SQRT_2;
            let mi = c(0.0, -s);
            let mut m = CMatrix::identity(4, 4) * c(s, 0.0);
            m[(0, 3)] = mi * C64::from_polar(1.0, -(p0 + p1));
            m[(1, 2)] = mi * C64::from_polar(1.0, -(p0 - p1));
            m[(2, 1)] = mi * C64::from_polar(1.0, p0 - p1);
            m[(3, 0)] = mi * C64::from_polar(1.0, p0 + p1);
            m
        }
        GateKind::RawUnitary => {
            let d = 1usize << g.targets.len();
            let data = g.matrix.as_ref().expect("validated");
            let m = CMatrix::from_fn(d, d, |i, j| {
                let [re, im] = data[i * d + j];
                c(re, im)
            });
            let defect = unitarity_defect(&m);
            if defect > UNITARY_TOL {
                return Err(Error::NotUnitary(defect));
            }
            m
        }
    };
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qstate::{Pauli, StateVector};
    use std::f64::consts::PI;

    fn max_diff(a: &CMatrix, b: &CMatrix) -> f64 {
        (a - b).iter().fold(0.0, |m, z| m.max(z.norm()))
    }

    /// Matrix exponential by truncated Taylor series; independent of the
    /// closed forms above.
    fn expm_series(a: &CMatrix) -> CMatrix {
        let d = a.nrows();
        let mut term = CMatrix::identity(d, d);
        let mut acc = term.clone();
        for k in 1..60 {
            term = &term * a / c(k as f64, 0.0);
            acc += &term;
        }
        acc
    }

    #[test]
    fn hadamard_definition() {
        let h = gate_matrix(&GateSpec::h(0)).unwrap();
        let s = FRAC_1_SQRT_2;
        let expect = CMatrix::from_row_slice(2, 2, &[c(s, 0.0), c(s, 0.0), c(s, 0.0), c(-s, 0.0)]);
        assert!(max_diff(&h, &expect) < 1e-15);
    }

    #[test]
    fn prx_zero_is_identity() {
        for phi in [0.0, 0.3, 2.0, -5.0] {
            let m = gate_matrix(&GateSpec::prx(0, 0.0, phi)).unwrap();
            assert!(max_diff(&m, &CMatrix::identity(2, 2)) < 1e-15);
        }
    }

    #[test]
    fn prx_matches_exponential() {
        for (theta, phi) in [(0.7f64, 0.2f64), (PI, 1.1), (2.5, -0.4)] {
            let gen = (Pauli::X.matrix() * c(phi.cos(), 0.0) + Pauli::Y.matrix() * c(phi.sin(), 0.0))
                * c(0.0, -theta / 2.0);
            let m = gate_matrix(&GateSpec::prx(0, theta, phi)).unwrap();
            assert!(max_diff(&m, &expm_series(&gen)) < 1e-12);
        }
    }

    #[test]
    fn ms_matches_exponential() {
        for (p0, p1) in [(0.0, 0.0), (0.3, 1.2), (PI, 0.0)] {
            let sa = Pauli::X.matrix() * c(f64::cos(p0), 0.0) + Pauli::Y.matrix() * c(f64::sin(p0), 0.0);
            let sb = Pauli::X.matrix() * c(f64::cos(p1), 0.0) + Pauli::Y.matrix() * c(f64::sin(p1), 0.0);
            let gen = sa.kronecker(&sb) * c(0.0, -FRAC_PI_4);
            let m = gate_matrix(&GateSpec::ms(0, 1, p0, p1)).unwrap();
            assert!(max_diff(&m, &expm_series(&gen)) < 1e-12);
        }
    }

    #[test]
    fn ms_entangles_zero_state() {
        let u = gate_matrix(&GateSpec::ms(0, 1, 0.0, 0.0)).unwrap();
        let out = StateVector::zero(2).apply_unitary(&u, &[0, 1]).unwrap();
        let s = FRAC_1_SQRT_2;
        let expect = [c(s, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, -s)];
        for (a, b) in out.amplitudes().iter().zip(expect) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn gpi_family_relations() {
        let phi = 0.8;
        let gpi = gate_matrix(&GateSpec::gpi(0, phi)).unwrap();
        let prx_pi = gate_matrix(&GateSpec::prx(0, PI, phi)).unwrap();
        // PRX(pi, phi) = -i GPI(phi)
        assert!(max_diff(&(gpi * c(0.0, -1.0)), &prx_pi) < 1e-12);
        let gpi2 = gate_matrix(&GateSpec::gpi2(0, phi)).unwrap();
        assert!(max_diff(&gpi2, &gate_matrix(&GateSpec::prx(0, PI / 2.0, phi)).unwrap()) < 1e-15);
    }

    #[test]
    fn every_kind_is_unitary() {
        let gates = [
            GateSpec::h(0),
            GateSpec::s(0),
            GateSpec::t(0),
            GateSpec::x(0),
            GateSpec::y(0),
            GateSpec::z(0),
            GateSpec::cnot(0, 1),
            GateSpec::cz(0, 1),
            GateSpec::prx(0, 1.3, 0.4),
            GateSpec::gpi(0, 0.2),
            GateSpec::gpi2(0, 2.2),
            GateSpec::ms(0, 1, 0.1, 0.9),
        ];
        for g in &gates {
            assert!(unitarity_defect(&gate_matrix(g).unwrap()) < 1e-12, "{}", g.kind);
        }
    }

    #[test]
    fn validation_errors() {
        let mut g = GateSpec::cnot(0, 1);
        g.targets.pop();
        assert!(gate_matrix(&g).is_err());
        assert!(gate_matrix(&GateSpec::prx(0, f64::NAN, 0.0)).is_err());
        let mut bad = GateSpec::raw_unitary(vec![0], &CMatrix::identity(2, 2));
        bad.matrix.as_mut().unwrap()[0] = [2.0, 0.0];
        assert!(matches!(gate_matrix(&bad), Err(Error::NotUnitary(_))));
    }

    #[test]
    fn json_shape() {
        let g = GateSpec::prx(2, 0.5, 1.0);
        let v = serde_json::to_value(&g).unwrap();
        assert_eq!(v["kind"], "PRX");
        assert_eq!(v["targets"], serde_json::json!([2]));
        assert!(v.get("matrix").is_none());
        let back: GateSpec = serde_json::from_value(v).unwrap();
        assert_eq!(back, g);
    }
}
