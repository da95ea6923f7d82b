//! CHSH, Mermin and Svetlichny inequalities for `N` parties.
//!
//! A coefficient table assigns a weight to every setting string
//! `s in {0,1}^N` (0 = unprimed, 1 = primed observable of that party). Entries
//! are stored densely, indexed by the integer whose most significant bit is
//! party 0's setting.

use std::f64::consts::{PI, SQRT_2, TAU};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::qstate::{CMatrix, DensityMatrix, HermitianObservable, Pauli, StateVector, C64};

/// Largest party count for which tables are materialized.
pub const MAX_PARTIES: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Family {
    #[serde(rename = "CHSH")]
    Chsh,
    Mermin,
    SvetlichnyPlus,
    #[serde(alias = "Svetlichny")]
    SvetlichnyMinus,
}

impl Family {
    pub fn label(self) -> &'static str {
        match self {
            Family::Chsh => "CHSH",
            Family::Mermin => "Mermin",
            Family::SvetlichnyPlus => "SvetlichnyPlus",
            Family::SvetlichnyMinus => "SvetlichnyMinus",
        }
    }

    /// `"+"`, `"-"` for the Svetlichny variants.
    pub fn sign(self) -> Option<&'static str> {
        match self {
            Family::SvetlichnyPlus => Some("+"),
            Family::SvetlichnyMinus => Some("-"),
            _ => None,
        }
    }

    pub fn is_svetlichny(self) -> bool {
        matches!(self, Family::SvetlichnyPlus | Family::SvetlichnyMinus)
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl std::str::FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_', ' '], "").as_str() {
            "chsh" => Ok(Family::Chsh),
            "mermin" => Ok(Family::Mermin),
            "svetlichnyplus" | "svetlichny+" => Ok(Family::SvetlichnyPlus),
            "svetlichny" | "svetlichnyminus" => Ok(Family::SvetlichnyMinus),
            _ => Err(invalid(format!("unknown inequality family '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct InequalitySpec {
    pub family: Family,
    pub n_parties: usize,
}

impl InequalitySpec {
    pub fn new(family: Family, n_parties: usize) -> Result<Self> {
        let spec = InequalitySpec { family, n_parties };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.family == Family::Chsh && self.n_parties != 2 {
            return Err(invalid(format!("CHSH is bipartite, got N={}", self.n_parties)));
        }
        if !(2..=MAX_PARTIES).contains(&self.n_parties) {
            return Err(invalid(format!(
                "party count {} outside 2..={MAX_PARTIES}",
                self.n_parties
            )));
        }
        Ok(())
    }

    pub fn table(&self) -> Result<CoefficientTable> {
        self.validate()?;
        match self.family {
            Family::Chsh => chsh_table(),
            Family::Mermin => mermin_table(self.n_parties),
            Family::SvetlichnyPlus => svetlichny_table(self.n_parties, true),
            Family::SvetlichnyMinus => svetlichny_table(self.n_parties, false),
        }
    }
}

/// Dense coefficient table with its local and quantum bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientTable {
    pub family: Family,
    pub n_parties: usize,
    pub coeffs: Vec<f64>,
    pub classical_bound: f64,
    pub quantum_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableEntry {
    pub s: String,
    pub coeff: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub classical: f64,
    pub quantum: f64,
}

/// Audit form of a coefficient table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableExport {
    pub family: Family,
    #[serde(rename = "N")]
    pub n: usize,
    pub sign: Option<String>,
    pub entries: Vec<TableEntry>,
    pub bounds: Bounds,
}

impl CoefficientTable {
    /// Coefficient of a setting string given as one `0`/`1` per party.
    pub fn coeff(&self, settings: &[u8]) -> Result<f64> {
        if settings.len() != self.n_parties || settings.iter().any(|&b| b > 1) {
            return Err(invalid("setting string must hold one 0/1 per party"));
        }
        let idx = settings.iter().fold(0usize, |acc, &b| (acc << 1) | b as usize);
        Ok(self.coeffs[idx])
    }

    pub fn setting_string(&self, idx: usize) -> String {
        (0..self.n_parties)
            .map(|i| if idx >> (self.n_parties - 1 - i) & 1 == 1 { '1' } else { '0' })
            .collect()
    }

    pub fn nonzero_count(&self) -> usize {
        self.coeffs.iter().filter(|c| c.abs() > 1e-15).count()
    }

    pub fn export(&self) -> TableExport {
        TableExport {
            family: self.family,
            n: self.n_parties,
            sign: self.family.sign().map(str::to_string),
            entries: self
                .coeffs
                .iter()
                .enumerate()
                .filter(|(_, c)| c.abs() > 1e-15)
                .map(|(i, &coeff)| TableEntry { s: self.setting_string(i), coeff })
                .collect(),
            bounds: Bounds { classical: self.classical_bound, quantum: self.quantum_bound },
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.export())?)
    }

    /// Whether `value` exceeds the classical bound (strictly, with a 1e-9
    /// guard against values sitting exactly on it).
    pub fn violates(&self, value: f64) -> bool {
        value > self.classical_bound + 1e-9
    }
}

fn check_parties(n: usize) -> Result<()> {
    if !(2..=MAX_PARTIES).contains(&n) {
        return Err(invalid(format!("party count {n} outside 2..={MAX_PARTIES}")));
    }
    Ok(())
}

/// Mermin polynomial from the recursion
/// `M_N = 1/2 M_{N-1}(A_N + A_N') + 1/2 M'_{N-1}(A_N - A_N')`, where `M'`
/// exchanges primed and unprimed observables.
pub fn mermin_table(n: usize) -> Result<CoefficientTable> {
    check_parties(n)?;
    let mut m = vec![0.5, 0.5, 0.5, -0.5];
    for k in 2..n {
        let full = (1usize << k) - 1;
        let mut next = vec![0.0; 1 << (k + 1)];
        for (s, &c) in m.iter().enumerate() {
            let swapped = m[full ^ s];
            next[s << 1] = 0.5 * (c + swapped);
            next[(s << 1) | 1] = 0.5 * (c - swapped);
        }
        m = next;
    }
    Ok(CoefficientTable {
        family: Family::Mermin,
        n_parties: n,
        coeffs: m,
        classical_bound: 1.0,
        quantum_bound: 2f64.powf((n as f64 - 1.0) / 2.0),
    })
}

/// CHSH in the halved normalization: the two-party Mermin polynomial.
pub fn chsh_table() -> Result<CoefficientTable> {
    Ok(CoefficientTable { family: Family::Chsh, ..mermin_table(2)? })
}

/// Svetlichny polynomial with weights `(-1)^{t(t+1)/2}` (`plus`) or
/// `(-1)^{t(t-1)/2}`, `t` the number of primed observables.
pub fn svetlichny_table(n: usize, plus: bool) -> Result<CoefficientTable> {
    check_parties(n)?;
    let coeffs = (0..1usize << n)
        .map(|s| {
            let t = s.count_ones() as i64;
            let e = if plus { t * (t + 1) / 2 } else { t * (t - 1) / 2 };
            if e % 2 == 0 { 1.0 } else { -1.0 }
        })
        .collect();
    let classical = 2f64.powi(n as i32 - 1);
    Ok(CoefficientTable {
        family: if plus { Family::SvetlichnyPlus } else { Family::SvetlichnyMinus },
        n_parties: n,
        coeffs,
        classical_bound: classical,
        quantum_bound: classical * SQRT_2,
    })
}

/// Measurement direction in polar coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Direction {
    pub theta: f64,
    pub phi: f64,
}

impl Direction {
    pub fn new(theta: f64, phi: f64) -> Result<Self> {
        if !theta.is_finite() || !phi.is_finite() {
            return Err(Error::NonFinite);
        }
        Ok(Direction { theta, phi })
    }

    /// Direction of a nonzero Bloch vector, with `theta in [0, pi]` and
    /// `phi in [0, 2pi)`.
    pub fn from_bloch(v: [f64; 3]) -> Self {
        let r = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        let theta = (v[2] / r).clamp(-1.0, 1.0).acos();
        let mut phi = v[1].atan2(v[0]);
        if phi < 0.0 {
            phi += TAU;
        }
        if phi >= TAU {
            phi = 0.0;
        }
        Direction { theta, phi }
    }

    pub fn bloch(&self) -> [f64; 3] {
        let (st, ct) = self.theta.sin_cos();
        let (sp, cp) = self.phi.sin_cos();
        [st * cp, st * sp, ct]
    }

    pub const Z: Direction = Direction { theta: 0.0, phi: 0.0 };
    pub const X: Direction = Direction { theta: PI / 2.0, phi: 0.0 };
    pub const Y: Direction = Direction { theta: PI / 2.0, phi: PI / 2.0 };
}

/// Two directions (unprimed, primed) per party.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementSettings {
    pub angles: Vec<[Direction; 2]>,
}

impl MeasurementSettings {
    pub fn new(angles: Vec<[Direction; 2]>) -> Result<Self> {
        if angles.iter().flatten().any(|d| !d.theta.is_finite() || !d.phi.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(MeasurementSettings { angles })
    }

    /// Every party measures `a` (unprimed) and `b` (primed).
    pub fn uniform(n: usize, a: Direction, b: Direction) -> Self {
        MeasurementSettings { angles: vec![[a, b]; n] }
    }

    pub fn n_parties(&self) -> usize {
        self.angles.len()
    }

    pub fn bloch_vectors(&self) -> Vec<[[f64; 3]; 2]> {
        self.angles.iter().map(|[a, b]| [a.bloch(), b.bloch()]).collect()
    }

    pub fn from_bloch_vectors(v: &[[[f64; 3]; 2]]) -> Self {
        MeasurementSettings {
            angles: v.iter().map(|[a, b]| [Direction::from_bloch(*a), Direction::from_bloch(*b)]).collect(),
        }
    }
}

/// `sin(theta)cos(phi) X + sin(theta)sin(phi) Y + cos(theta) Z`.
pub fn local_observable(theta: f64, phi: f64) -> Result<HermitianObservable> {
    let n = Direction::new(theta, phi)?.bloch();
    HermitianObservable::new(bloch_matrix(n))
}

fn bloch_matrix(n: [f64; 3]) -> CMatrix {
    let r = |x: f64| C64::new(x, 0.0);
    Pauli::X.matrix() * r(n[0]) + Pauli::Y.matrix() * r(n[1]) + Pauli::Z.matrix() * r(n[2])
}

fn check_arity(table: &CoefficientTable, got: usize) -> Result<()> {
    if table.n_parties != got {
        return Err(Error::DimensionMismatch { expected: table.n_parties, got });
    }
    Ok(())
}

/// Explicit `2^N x 2^N` Bell operator.
pub fn bell_operator(table: &CoefficientTable, ms: &MeasurementSettings) -> Result<HermitianObservable> {
    check_arity(table, ms.n_parties())?;
    let locals: Vec<[CMatrix; 2]> = ms
        .bloch_vectors()
        .into_iter()
        .map(|[a, b]| [bloch_matrix(a), bloch_matrix(b)])
        .collect();
    let n = table.n_parties;
    let d = 1 << n;
    let mut op = CMatrix::zeros(d, d);
    for (s, &c) in table.coeffs.iter().enumerate() {
        if c == 0.0 {
            continue;
        }
        let mut term = locals[0][s >> (n - 1) & 1].clone();
        for (i, loc) in locals.iter().enumerate().skip(1) {
            term = term.kronecker(&loc[s >> (n - 1 - i) & 1]);
        }
        op += term * C64::new(c, 0.0);
    }
    HermitianObservable::new(op)
}

/// Pauli correlation tensor `T[a_0..a_{N-1}] = Tr(rho sigma_{a_0} x ... )`
/// over `a_i in {X, Y, Z}`, flattened row-major with party 0 slowest.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationTensor {
    n_parties: usize,
    data: Vec<f64>,
}

fn xyz_strings(n: usize) -> impl Iterator<Item = Vec<Pauli>> {
    (0..3usize.pow(n as u32)).map(move |mut k| {
        let mut s = vec![Pauli::X; n];
        for slot in s.iter_mut().rev() {
            *slot = Pauli::XYZ[k % 3];
            k /= 3;
        }
        s
    })
}

impl CorrelationTensor {
    pub fn from_density(rho: &DensityMatrix) -> Result<Self> {
        let n = rho.n_qubits();
        check_parties(n)?;
        let data: Vec<f64> = xyz_strings(n).map(|p| rho.pauli_expectation(&p)).collect();
        Self::from_data(n, data)
    }

    pub fn from_state(psi: &StateVector) -> Result<Self> {
        let n = psi.n_qubits();
        check_parties(n)?;
        let data: Vec<f64> = xyz_strings(n).map(|p| psi.pauli_expectation(&p)).collect();
        Self::from_data(n, data)
    }

    pub fn from_data(n_parties: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != 3usize.pow(n_parties as u32) {
            return Err(Error::DimensionMismatch { expected: 3usize.pow(n_parties as u32), got: data.len() });
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(CorrelationTensor { n_parties, data })
    }

    pub fn n_parties(&self) -> usize {
        self.n_parties
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Contracts every party except `skip` against its two Bloch vectors.
    ///
    /// The result has a setting index (size 2) for every contracted party and
    /// the Pauli index (size 3) for `skip`, row-major with party 0 slowest.
    pub fn contract(&self, dirs: &[[[f64; 3]; 2]], skip: Option<usize>) -> Vec<f64> {
        let n = self.n_parties;
        let mut shape = vec![3usize; n];
        let mut cur = self.data.clone();
        for j in 0..n {
            if Some(j) == skip {
                continue;
            }
            let outer: usize = shape[..j].iter().product();
            let inner: usize = shape[j + 1..].iter().product();
            let mut next = vec![0.0; outer * 2 * inner];
            for o in 0..outer {
                for k in 0..2 {
                    let v = &dirs[j][k];
                    let dst = &mut next[(o * 2 + k) * inner..(o * 2 + k + 1) * inner];
                    for (a, &w) in v.iter().enumerate() {
                        let src = &cur[(o * 3 + a) * inner..(o * 3 + a + 1) * inner];
                        for (d, &x) in dst.iter_mut().zip(src) {
                            *d += w * x;
                        }
                    }
                }
            }
            shape[j] = 2;
            cur = next;
        }
        cur
    }

    /// Signed expectation `Tr(rho O)` of the Bell operator.
    pub fn signed_value(&self, table: &CoefficientTable, dirs: &[[[f64; 3]; 2]]) -> f64 {
        self.contract(dirs, None).iter().zip(&table.coeffs).map(|(x, c)| x * c).sum()
    }

    /// The two vectors `v_0, v_1` with `<O> = n_{i,0}.v_0 + n_{i,1}.v_1`
    /// when every party but `i` is held fixed.
    pub fn party_gradient(&self, table: &CoefficientTable, dirs: &[[[f64; 3]; 2]], i: usize) -> [[f64; 3]; 2] {
        let n = self.n_parties;
        let r = self.contract(dirs, Some(i));
        let inner = 1usize << (n - 1 - i);
        let outer = 1usize << i;
        let mut g = [[0.0; 3]; 2];
        for o in 0..outer {
            for a in 0..3 {
                let src = &r[(o * 3 + a) * inner..(o * 3 + a + 1) * inner];
                for (k, gk) in g.iter_mut().enumerate() {
                    let cs = &table.coeffs[(o * 2 + k) * inner..(o * 2 + k + 1) * inner];
                    gk[a] += src.iter().zip(cs).map(|(x, c)| x * c).sum::<f64>();
                }
            }
        }
        g
    }
}

/// `|Tr(rho O)|` for the Bell operator of `table` at settings `ms`.
pub fn evaluate(rho: &DensityMatrix, table: &CoefficientTable, ms: &MeasurementSettings) -> Result<f64> {
    check_arity(table, rho.n_qubits())?;
    check_arity(table, ms.n_parties())?;
    let t = CorrelationTensor::from_density(rho)?;
    Ok(t.signed_value(table, &ms.bloch_vectors()).abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::random::haar_unitary;
    use crate::seed::rng_from_seed;
    use proptest::prelude::*;

    fn coeffs_of(t: &CoefficientTable, pairs: &[(&str, f64)]) -> bool {
        let mut expected = vec![0.0; 1 << t.n_parties];
        for (s, c) in pairs {
            expected[usize::from_str_radix(s, 2).unwrap()] = *c;
        }
        expected.iter().zip(&t.coeffs).all(|(a, b)| (a - b).abs() < 1e-15)
    }

    #[test]
    fn mermin_small_tables() {
        let m2 = mermin_table(2).unwrap();
        assert!(coeffs_of(&m2, &[("00", 0.5), ("10", 0.5), ("01", 0.5), ("11", -0.5)]));
        let m3 = mermin_table(3).unwrap();
        assert!(coeffs_of(&m3, &[("100", 0.5), ("010", 0.5), ("001", 0.5), ("111", -0.5)]));
        assert_eq!(mermin_table(5).unwrap().quantum_bound, 4.0);
        assert!(mermin_table(1).is_err());
        assert!(mermin_table(11).is_err());
    }

    #[test]
    fn mermin_support_sizes() {
        // Odd N: half the strings carry weight 2^{-(N-1)/2}. Even N: every
        // string carries weight 2^{-N/2}.
        for n in 2..=8 {
            let t = mermin_table(n).unwrap();
            let (count, mag) = if n % 2 == 1 {
                (1 << (n - 1), 2f64.powf(-((n - 1) as f64) / 2.0))
            } else {
                (1 << n, 2f64.powf(-(n as f64) / 2.0))
            };
            assert_eq!(t.nonzero_count(), count, "N={n}");
            for c in t.coeffs.iter().filter(|c| c.abs() > 1e-15) {
                assert!((c.abs() - mag).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn svetlichny_tables_and_bounds() {
        let s3 = svetlichny_table(3, false).unwrap();
        for idx in 0..8usize {
            let expected = if idx.count_ones() <= 1 { 1.0 } else { -1.0 };
            assert_eq!(s3.coeffs[idx], expected);
        }
        assert!((s3.quantum_bound - 4.0 * SQRT_2).abs() < 1e-12);
        let plus = svetlichny_table(3, true).unwrap();
        assert_eq!(plus.coeffs, vec![1.0, -1.0, -1.0, -1.0, -1.0, -1.0, -1.0, 1.0]);
        for n in 2..=6 {
            for sign in [true, false] {
                let t = svetlichny_table(n, sign).unwrap();
                assert!(t.coeffs.iter().all(|c| c.abs() == 1.0));
                assert_eq!(t.classical_bound, 2f64.powi(n as i32 - 1));
                assert_eq!(t.quantum_bound, 2f64.powi(n as i32 - 1) * SQRT_2);
            }
            let m = mermin_table(n).unwrap();
            assert_eq!(m.classical_bound, 1.0);
            assert!((m.quantum_bound - 2f64.powf((n as f64 - 1.0) / 2.0)).abs() < 1e-15);
        }
    }

    #[test]
    fn two_party_svetlichny_is_chsh() {
        // (+,+,+,-) on t = (0,1,1,2): unnormalized CHSH with bound 2.
        let s2 = svetlichny_table(2, false).unwrap();
        assert_eq!(s2.coeffs, vec![1.0, 1.0, 1.0, -1.0]);
        assert_eq!(s2.classical_bound, 2.0);
        let c = chsh_table().unwrap();
        for (a, b) in s2.coeffs.iter().zip(&c.coeffs) {
            assert_eq!(*a, 2.0 * b);
        }
        assert_eq!((c.classical_bound, c.quantum_bound), (1.0, SQRT_2));
    }

    #[test]
    fn spec_validation() {
        assert!(InequalitySpec::new(Family::Chsh, 3).is_err());
        assert!(InequalitySpec::new(Family::Mermin, 1).is_err());
        let t = InequalitySpec::new(Family::SvetlichnyMinus, 4).unwrap().table().unwrap();
        assert_eq!(t.n_parties, 4);
        assert_eq!("svetlichny".parse::<Family>().unwrap(), Family::SvetlichnyMinus);
    }

    #[test]
    fn export_shape() {
        let v: serde_json::Value =
            serde_json::from_str(&svetlichny_table(3, false).unwrap().to_json().unwrap()).unwrap();
        assert_eq!(v["family"], "SvetlichnyMinus");
        assert_eq!(v["N"], 3);
        assert_eq!(v["sign"], "-");
        assert_eq!(v["entries"].as_array().unwrap().len(), 8);
        assert_eq!(v["entries"][3]["s"], "011");
        assert_eq!(v["entries"][3]["coeff"], -1.0);
        assert_eq!(v["bounds"]["classical"], 4.0);
    }

    #[test]
    fn local_observables() {
        let close = |a: &CMatrix, b: &CMatrix| (a - b).norm() < 1e-15;
        assert!(close(local_observable(0.0, 1.234).unwrap().matrix(), &Pauli::Z.matrix()));
        assert!(close(local_observable(PI / 2.0, 0.0).unwrap().matrix(), &Pauli::X.matrix()));
        assert!(close(local_observable(PI / 2.0, PI / 2.0).unwrap().matrix(), &Pauli::Y.matrix()));
        let ev = local_observable(0.4, 2.0).unwrap().eigenvalues();
        assert!((ev[0] + 1.0).abs() < 1e-12 && (ev[1] - 1.0).abs() < 1e-12);
        assert!(local_observable(f64::NAN, 0.0).is_err());
    }

    #[test]
    fn bloch_round_trip() {
        for &(t, p) in &[(0.3, 5.9), (PI / 2.0, 0.0), (2.9, 3.0), (1.0, 6.2)] {
            let d = Direction::from_bloch(Direction { theta: t, phi: p }.bloch());
            assert!((d.theta - t).abs() < 1e-12 && (d.phi - p).abs() < 1e-12);
        }
        let pole = Direction::from_bloch([0.0, 0.0, -1.0]);
        assert!((pole.theta - PI).abs() < 1e-15);
    }

    #[test]
    fn mermin_two_party_operator() {
        let t = mermin_table(2).unwrap();
        let ms = MeasurementSettings::uniform(2, Direction::Z, Direction::X);
        let op = bell_operator(&t, &ms).unwrap();
        let (z, x) = (Pauli::Z.matrix(), Pauli::X.matrix());
        let expected = (z.kronecker(&z) + x.kronecker(&z) + z.kronecker(&x) - x.kronecker(&x))
            * C64::new(0.5, 0.0);
        assert!((op.matrix() - expected).norm() < 1e-14);
    }

    #[test]
    fn ghz_values() {
        let ghz = StateVector::ghz(3).to_density();
        let zs = MeasurementSettings::uniform(3, Direction::Z, Direction::Z);
        let sv = svetlichny_table(3, false).unwrap();
        assert!(evaluate(&ghz, &sv, &zs).unwrap() < 1e-14);
        let ms = MeasurementSettings::uniform(3, Direction::Y, Direction::X);
        assert!((evaluate(&ghz, &mermin_table(3).unwrap(), &ms).unwrap() - 2.0).abs() < 1e-12);
        assert!(evaluate(&ghz, &mermin_table(2).unwrap(), &MeasurementSettings::uniform(2, Direction::Z, Direction::X)).is_err());
    }

    #[test]
    fn product_state_reaches_hybrid_bound() {
        // Deterministic strategy: every party measures Z for both settings
        // except the primed setting of party 0, which measures -Z.
        let zero = StateVector::zero(3).to_density();
        let down = Direction { theta: PI, phi: 0.0 };
        let sv = svetlichny_table(3, false).unwrap();
        let mut best: f64 = 0.0;
        for mask in 0..64u32 {
            let angles = (0..3)
                .map(|i| {
                    let pick = |b: u32| if mask >> b & 1 == 1 { down } else { Direction::Z };
                    [pick(2 * i), pick(2 * i + 1)]
                })
                .collect();
            let ms = MeasurementSettings::new(angles).unwrap();
            best = best.max(evaluate(&zero, &sv, &ms).unwrap());
        }
        assert!((best - 4.0).abs() < 1e-12);
    }

    #[test]
    fn maximally_mixed_gives_zero() {
        let rho = DensityMatrix::maximally_mixed(3);
        let ms = MeasurementSettings::uniform(3, Direction::X, Direction { theta: 1.0, phi: 2.0 });
        assert!(evaluate(&rho, &svetlichny_table(3, true).unwrap(), &ms).unwrap() < 1e-15);
    }

    #[test]
    fn operator_norm_within_quantum_bound() {
        let t = svetlichny_table(3, false).unwrap();
        let mut rng = rng_from_seed(21);
        for _ in 0..50 {
            let ms = random_settings(3, &mut rng);
            assert!(bell_operator(&t, &ms).unwrap().operator_norm() <= t.quantum_bound + 1e-9);
        }
    }

    fn random_settings(n: usize, rng: &mut crate::seed::Rng) -> MeasurementSettings {
        use rand::Rng as _;
        let mut d = || Direction { theta: rng.random_range(0.0..PI), phi: rng.random_range(0.0..TAU) };
        MeasurementSettings::new((0..n).map(|_| [d(), d()]).collect()).unwrap()
    }

    fn random_pure_density(n: usize, rng: &mut crate::seed::Rng) -> DensityMatrix {
        let u = haar_unitary(1 << n, rng).unwrap();
        StateVector::zero(n).apply_unitary(&u, &(0..n).collect::<Vec<_>>()).unwrap().to_density()
    }

    #[test]
    fn tensor_evaluation_matches_operator() {
        let mut rng = rng_from_seed(8);
        for (n, table) in [
            (2, chsh_table().unwrap()),
            (3, svetlichny_table(3, false).unwrap()),
            (4, mermin_table(4).unwrap()),
        ] {
            let rho = random_pure_density(n, &mut rng);
            let ms = random_settings(n, &mut rng);
            let op = bell_operator(&table, &ms).unwrap();
            let direct = rho.expectation(&op).unwrap().abs();
            assert!((evaluate(&rho, &table, &ms).unwrap() - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn party_gradient_is_exact() {
        let mut rng = rng_from_seed(9);
        let rho = random_pure_density(4, &mut rng);
        let t = CorrelationTensor::from_density(&rho).unwrap();
        let table = svetlichny_table(4, true).unwrap();
        let dirs = random_settings(4, &mut rng).bloch_vectors();
        let total = t.signed_value(&table, &dirs);
        for i in 0..4 {
            let g = t.party_gradient(&table, &dirs, i);
            let lin: f64 = (0..2).map(|k| (0..3).map(|a| g[k][a] * dirs[i][k][a]).sum::<f64>()).sum();
            assert!((lin - total).abs() < 1e-12);
        }
    }

    /// Permutation matrix sending qubit `j` of the input to position `perm[j]`.
    fn permute_parties(rho: &DensityMatrix, perm: &[usize]) -> DensityMatrix {
        let n = perm.len();
        let d = 1 << n;
        let map = |x: usize| {
            (0..n).fold(0usize, |acc, j| {
                let bit = x >> (n - 1 - j) & 1;
                acc | bit << (n - 1 - perm[j])
            })
        };
        let m = CMatrix::from_fn(d, d, |r, c| rho.matrix()[(
            (0..d).find(|&x| map(x) == r).unwrap(),
            (0..d).find(|&x| map(x) == c).unwrap(),
        )]);
        DensityMatrix::from_matrix(m).unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn bell_operator_is_hermitian(seed in any::<u64>(), n in 2usize..=4) {
            let mut rng = rng_from_seed(seed);
            let ms = random_settings(n, &mut rng);
            let op = bell_operator(&svetlichny_table(n, seed % 2 == 0).unwrap(), &ms).unwrap();
            prop_assert!((op.matrix() - op.matrix().adjoint()).norm() < 1e-12);
        }

        #[test]
        fn party_relabeling_equivariance(seed in any::<u64>()) {
            let mut rng = rng_from_seed(seed);
            let rho = random_pure_density(3, &mut rng);
            let ms = random_settings(3, &mut rng);
            let perm = [2usize, 0, 1];
            let permuted = permute_parties(&rho, &perm);
            let mut angles = ms.angles.clone();
            for (j, &p) in perm.iter().enumerate() {
                angles[p] = ms.angles[j];
            }
            let ms_p = MeasurementSettings::new(angles).unwrap();
            for table in [mermin_table(3).unwrap(), svetlichny_table(3, false).unwrap()] {
                let a = evaluate(&rho, &table, &ms).unwrap();
                let b = evaluate(&permuted, &table, &ms_p).unwrap();
                prop_assert!((a - b).abs() < 1e-10);
            }
        }
    }
}
