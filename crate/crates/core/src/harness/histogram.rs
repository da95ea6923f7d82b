use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::transpile::bin_index;

/// Slack above the quantum bound still binned into the last bin.
pub const BOUND_SLACK: f64 = 1e-6;

/// Values above this margin over the classical bound count as violations.
pub const VIOLATION_EPS: f64 = 1e-9;

/// Uniform-width histogram of violation values over `[0, quantum_bound]`.
///
/// Shot-estimated values can land above the quantum bound; they are counted
/// in `overflow` (and in `total`) rather than in a bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub width: f64,
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
    pub overflow: u64,
    pub total: u64,
    /// Instances that failed before producing a value.
    pub failures: u64,
    pub violations: u64,
    pub classical_bound: f64,
    pub quantum_bound: f64,
    pub violation_fraction: f64,
    pub standard_error: f64,
}

impl Histogram {
    pub fn new(width: f64, classical_bound: f64, quantum_bound: f64) -> Result<Self> {
        if !(width > 0.0) || !width.is_finite() {
            return Err(invalid(format!("bin width must be positive, got {width}")));
        }
        if !(quantum_bound > 0.0) || !(classical_bound <= quantum_bound) {
            return Err(invalid("histogram bounds must satisfy 0 < classical <= quantum"));
        }
        let n_bins = ((quantum_bound / width) - 1e-9).ceil().max(1.0) as usize;
        let edges = (0..=n_bins).map(|k| k as f64 * width).collect();
        Ok(Histogram {
            width,
            edges,
            counts: vec![0; n_bins],
            overflow: 0,
            total: 0,
            failures: 0,
            violations: 0,
            classical_bound,
            quantum_bound,
            violation_fraction: 0.0,
            standard_error: 0.0,
        })
    }

    pub fn from_values(values: &[f64], width: f64, classical_bound: f64, quantum_bound: f64) -> Result<Self> {
        let mut h = Histogram::new(width, classical_bound, quantum_bound)?;
        for &v in values {
            h.add(v)?;
        }
        Ok(h)
    }

    pub fn n_bins(&self) -> usize {
        self.counts.len()
    }

    pub fn add(&mut self, v: f64) -> Result<()> {
        if !v.is_finite() || v < -BOUND_SLACK {
            return Err(invalid(format!("cannot bin value {v}")));
        }
        let v = v.max(0.0);
        if v > self.quantum_bound + BOUND_SLACK {
            self.overflow += 1;
        } else {
            let k = bin_index(v, 0.0, self.width, self.n_bins()).unwrap_or(self.n_bins() - 1);
            self.counts[k] += 1;
        }
        self.total += 1;
        if v > self.classical_bound + VIOLATION_EPS {
            self.violations += 1;
        }
        self.refresh();
        Ok(())
    }

    pub fn add_failure(&mut self) {
        self.failures += 1;
    }

    pub fn same_binning(&self, other: &Histogram) -> bool {
        self.n_bins() == other.n_bins()
            && (self.width - other.width).abs() < 1e-12
            && (self.quantum_bound - other.quantum_bound).abs() < 1e-12
            && (self.classical_bound - other.classical_bound).abs() < 1e-12
    }

    /// Adds `other`'s counts into `self`; commutative and associative.
    pub fn merge(&mut self, other: &Histogram) -> Result<()> {
        if !self.same_binning(other) {
            return Err(Error::Schema("cannot merge histograms with different binning".into()));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.overflow += other.overflow;
        self.total += other.total;
        self.failures += other.failures;
        self.violations += other.violations;
        self.refresh();
        Ok(())
    }

    /// `(lo, hi, count)` per bin.
    pub fn bins(&self) -> impl Iterator<Item = (f64, f64, u64)> + '_ {
        self.counts.iter().enumerate().map(|(k, &c)| (self.edges[k], self.edges[k + 1], c))
    }

    /// Normalized bin masses, overflow folded into the last bin.
    pub fn masses(&self) -> Vec<f64> {
        let mut m: Vec<f64> = self.counts.iter().map(|&c| c as f64).collect();
        if let Some(last) = m.last_mut() {
            *last += self.overflow as f64;
        }
        if self.total > 0 {
            for x in &mut m {
                *x /= self.total as f64;
            }
        }
        m
    }

    fn refresh(&mut self) {
        if self.total == 0 {
            self.violation_fraction = 0.0;
            self.standard_error = 0.0;
            return;
        }
        let n = self.total as f64;
        let f = self.violations as f64 / n;
        self.violation_fraction = f;
        self.standard_error = (f * (1.0 - f) / n).sqrt();
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistogramComparison {
    pub ks_distance: f64,
    pub total_variation: f64,
    /// `measured - ideal` violation fraction.
    pub fraction_delta: f64,
}

/// Binned Kolmogorov-Smirnov distance, total variation and fraction delta.
pub fn compare_histograms(ideal: &Histogram, measured: &Histogram) -> Result<HistogramComparison> {
    if !ideal.same_binning(measured) {
        return Err(Error::Schema(format!(
            "binning mismatch: {} bins of width {} vs {} bins of width {}",
            ideal.n_bins(),
            ideal.width,
            measured.n_bins(),
            measured.width
        )));
    }
    let (a, b) = (ideal.masses(), measured.masses());
    let (mut ca, mut cb, mut ks, mut tv) = (0.0, 0.0, 0.0f64, 0.0);
    for (x, y) in a.iter().zip(&b) {
        ca += x;
        cb += y;
        ks = ks.max((ca - cb).abs());
        tv += (x - y).abs();
    }
    Ok(HistogramComparison {
        ks_distance: ks,
        total_variation: 0.5 * tv,
        fraction_delta: measured.violation_fraction - ideal.violation_fraction,
    })
}

/// Two-sample Kolmogorov-Smirnov statistic on raw values.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> f64 {
    if a.is_empty() || b.is_empty() {
        return if a.len() == b.len() { 0.0 } else { 1.0 };
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}
