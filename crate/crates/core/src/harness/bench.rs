use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::histogram::{compare_histograms, Histogram, HistogramComparison};
use super::shots::{estimate_bell_value, exact_bell_value, setting_directions};
use super::{mean_std, run_distribution, simulate, ExperimentConfig};
use crate::circuit::{qasm::to_qasm, Circuit, GateCounts, NoiseModel};
use crate::error::{invalid, Error, Result};
use crate::inequality::{Family, MeasurementSettings};
use crate::seed::{child_seed, rng_from_seed};
use crate::transpile::{decompose, native_measurement_circuit, select_representatives, NativeTarget, TargetKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QasmFile {
    /// Setting string, party 0 first; `1` selects the primed observable.
    pub settings: String,
    /// Relative to the manifest's directory.
    pub path: String,
    #[serde(skip)]
    pub source: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub bin: usize,
    pub lo: f64,
    pub hi: f64,
    pub seed: u64,
    pub ideal_value: f64,
    pub settings: MeasurementSettings,
    pub gate_counts: GateCounts,
    /// Native state-preparation circuit, trailing frames kept.
    pub circuit: Circuit,
    pub qasm: Vec<QasmFile>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub target: TargetKind,
    pub family: Family,
    pub n_qubits: usize,
    pub origin: f64,
    pub width: f64,
    pub bin_count: usize,
    pub classical_bound: f64,
    pub quantum_bound: f64,
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    /// Writes `manifest.json` and every QASM file under `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        for e in &self.entries {
            for q in &e.qasm {
                std::fs::write(dir.join(&q.path), &q.source)?;
            }
        }
        std::fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Schema(format!("manifest: {e}")))
    }
}

/// Runs `cfg`, transpiles every successful circuit to `target`, picks one
/// representative per bin of `[origin, origin + count * width)` and exports
/// one native QASM program per nonzero setting string.
pub fn build_manifest(cfg: &ExperimentConfig, target: TargetKind, origin: f64, width: f64, count: usize) -> Result<Manifest> {
    let run = run_distribution(cfg)?;
    let table = cfg.table()?;
    let native = NativeTarget::new(target, cfg.connectivity.graph(cfg.n_qubits))?;
    let mut pairs = Vec::new();
    let mut owners = Vec::new();
    for r in &run.records {
        let Some(v) = r.exact_value else { continue };
        pairs.push((decompose(&cfg.instance_circuit(r.index)?, &native)?, v));
        owners.push(r.index);
    }
    let reps = select_representatives(&pairs, origin, width, count)?;
    let mut entries = Vec::new();
    for (bin, rep) in reps.occupied() {
        let record = &run.records[owners[rep.index]];
        let settings = record.settings.clone().ok_or_else(|| invalid("record without settings"))?;
        let logical = cfg.instance_circuit(record.index)?;
        let mut qasm = Vec::new();
        for (s, &c) in table.coeffs.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            let label = table.setting_string(s);
            let prog = native_measurement_circuit(&logical, &setting_directions(&settings, s), &native)?;
            qasm.push(QasmFile { path: format!("bin{bin:02}_{label}.qasm"), settings: label, source: to_qasm(&prog, true)? });
        }
        entries.push(ManifestEntry {
            bin,
            lo: reps.bins[bin].lo,
            hi: reps.bins[bin].hi,
            seed: rep.seed,
            ideal_value: rep.value,
            settings,
            gate_counts: rep.gate_counts.clone(),
            circuit: rep.circuit.clone(),
            qasm,
        });
    }
    Ok(Manifest {
        target,
        family: cfg.inequality,
        n_qubits: cfg.n_qubits,
        origin,
        width,
        bin_count: count,
        classical_bound: table.classical_bound,
        quantum_bound: table.quantum_bound,
        entries,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasuredBin {
    pub bin: usize,
    /// Repeated measurements of the Bell value at the manifest's settings.
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasuredData {
    pub target: TargetKind,
    pub family: Family,
    pub n_qubits: usize,
    pub bins: Vec<MeasuredBin>,
}

impl MeasuredData {
    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Schema(format!("measured data: {e}")))
    }
}

/// Stand-in for a device run: simulates each representative under `noise`,
/// `repeats` times with `shots` shots (exact values when `shots == 0`).
pub fn simulate_device(manifest: &Manifest, noise: &NoiseModel, shots: usize, repeats: usize, seed: u64) -> Result<MeasuredData> {
    if repeats == 0 {
        return Err(invalid("need at least one repeat"));
    }
    let table = crate::inequality::InequalitySpec::new(manifest.family, manifest.n_qubits)?.table()?;
    let mut bins = Vec::new();
    for e in &manifest.entries {
        let state = simulate(&e.circuit, noise)?;
        let values = if shots == 0 {
            vec![exact_bell_value(&state, &table, &e.settings)?; repeats]
        } else {
            let mut rng = rng_from_seed(child_seed(seed, e.bin as u64));
            (0..repeats)
                .map(|_| estimate_bell_value(&state, &table, &e.settings, shots, &mut rng))
                .collect::<Result<Vec<_>>>()?
        };
        bins.push(MeasuredBin { bin: e.bin, values });
    }
    Ok(MeasuredData { target: manifest.target, family: manifest.family, n_qubits: manifest.n_qubits, bins })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchThresholds {
    /// Largest tolerated mean `|measured - ideal|` over reported bins.
    pub max_mean_abs_delta: f64,
    pub max_ks: f64,
}

impl Default for BenchThresholds {
    fn default() -> Self {
        BenchThresholds { max_mean_abs_delta: 0.25, max_ks: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinDelta {
    pub bin: usize,
    pub lo: f64,
    pub hi: f64,
    pub ideal: f64,
    pub measured_mean: Option<f64>,
    pub measured_std: Option<f64>,
    pub repeats: usize,
    pub delta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub target: TargetKind,
    pub bins: Vec<BinDelta>,
    pub missing: Vec<usize>,
    pub mean_abs_delta: Option<f64>,
    pub comparison: Option<HistogramComparison>,
    pub thresholds: BenchThresholds,
    pub pass: bool,
    pub warnings: Vec<String>,
}

/// Joins measured values to the manifest's ideal values per bin and
/// compares the two value histograms.
pub fn bench_protocol(manifest: &Manifest, measured: &MeasuredData, thresholds: BenchThresholds) -> Result<BenchReport> {
    if measured.target != manifest.target || measured.family != manifest.family || measured.n_qubits != manifest.n_qubits {
        return Err(Error::Schema(format!(
            "measured data is for {:?}/{}/{} qubits, manifest for {:?}/{}/{} qubits",
            measured.target,
            measured.family.label(),
            measured.n_qubits,
            manifest.target,
            manifest.family.label(),
            manifest.n_qubits
        )));
    }
    let mut by_bin: BTreeMap<usize, &MeasuredBin> = BTreeMap::new();
    for b in &measured.bins {
        if !manifest.entries.iter().any(|e| e.bin == b.bin) {
            return Err(Error::Schema(format!("measured bin {} is not in the manifest", b.bin)));
        }
        if b.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Schema(format!("measured bin {} has non-finite values", b.bin)));
        }
        if by_bin.insert(b.bin, b).is_some() {
            return Err(Error::Schema(format!("measured bin {} appears twice", b.bin)));
        }
    }
    let width = manifest.width;
    let mut ideal_hist = Histogram::new(width, manifest.classical_bound, manifest.quantum_bound)?;
    let mut measured_hist = ideal_hist.clone();
    let mut bins = Vec::new();
    let mut missing = Vec::new();
    let mut warnings = Vec::new();
    for e in &manifest.entries {
        let found = by_bin.get(&e.bin).filter(|b| !b.values.is_empty());
        let mut row = BinDelta {
            bin: e.bin,
            lo: e.lo,
            hi: e.hi,
            ideal: e.ideal_value,
            measured_mean: None,
            measured_std: None,
            repeats: 0,
            delta: None,
        };
        match found {
            Some(b) => {
                let (mean, std) = mean_std(&b.values);
                row.measured_mean = Some(mean);
                row.measured_std = Some(std);
                row.repeats = b.values.len();
                row.delta = Some(mean - e.ideal_value);
                ideal_hist.add(e.ideal_value)?;
                measured_hist.add(mean.max(0.0))?;
            }
            None => {
                let msg = format!("bin {} [{}, {}) has no measured data", e.bin, e.lo, e.hi);
                log::warn!("{msg}");
                warnings.push(msg);
                missing.push(e.bin);
            }
        }
        bins.push(row);
    }
    let deltas: Vec<f64> = bins.iter().filter_map(|b| b.delta).collect();
    let (mean_abs_delta, comparison) = if deltas.is_empty() {
        warnings.push("no bin has measured data".into());
        (None, None)
    } else {
        let m = deltas.iter().map(|d| d.abs()).sum::<f64>() / deltas.len() as f64;
        (Some(m), Some(compare_histograms(&ideal_hist, &measured_hist)?))
    };
    let pass = match (mean_abs_delta, comparison) {
        (Some(m), Some(c)) => m <= thresholds.max_mean_abs_delta && c.ks_distance <= thresholds.max_ks,
        _ => false,
    };
    Ok(BenchReport { target: manifest.target, bins, missing, mean_abs_delta, comparison, thresholds, pass, warnings })
}

#[cfg(test)]
mod tests {
    use super::super::DepthSpec;
    use super::*;
    use crate::circuit::{gate_counts, qasm::from_qasm, Ensemble};

    fn manifest() -> Manifest {
        let mut cfg = ExperimentConfig::new(Family::SvetlichnyMinus, Ensemble::CliffordT, 3, 40, DepthSpec::Fixed(20));
        cfg.seed = 5;
        cfg.optimizer.restarts = 4;
        cfg.measures = false;
        build_manifest(&cfg, TargetKind::IqmLike, 4.0, 0.2, 10).unwrap()
    }

    #[test]
    fn manifest_contents() {
        let m = manifest();
        assert!(!m.entries.is_empty());
        let target = NativeTarget::iqm_like(crate::circuit::Connectivity::linear(3)).unwrap();
        for e in &m.entries {
            assert!(e.lo <= e.ideal_value && e.ideal_value < e.hi);
            assert!(e.circuit.gates.iter().all(|g| target.is_native(g.kind)));
            assert_eq!(e.qasm.len(), 8);
            for q in &e.qasm {
                let parsed = from_qasm(&q.source).unwrap();
                assert!(parsed.gates.iter().all(|g| target.is_native(g.kind)));
            }
            assert_eq!(gate_counts(&e.circuit), e.gate_counts);
        }
        let json = serde_json::to_string(&m).unwrap();
        let back = Manifest::from_json(&json).unwrap();
        assert_eq!(back.entries.len(), m.entries.len());
        assert!(back.entries[0].qasm[0].source.is_empty());
        assert_eq!(m, manifest());
    }

    #[test]
    fn manifest_circuit_prepares_ideal_state() {
        let m = manifest();
        let table = crate::inequality::svetlichny_table(3, false).unwrap();
        for e in &m.entries {
            let state = simulate(&e.circuit, &NoiseModel::noiseless()).unwrap();
            let v = exact_bell_value(&state, &table, &e.settings).unwrap();
            assert!((v - e.ideal_value).abs() < 1e-8);
        }
    }

    #[test]
    fn ideal_measurements_pass() {
        let m = manifest();
        let ideal = MeasuredData {
            target: m.target,
            family: m.family,
            n_qubits: m.n_qubits,
            bins: m.entries.iter().map(|e| MeasuredBin { bin: e.bin, values: vec![e.ideal_value; 3] }).collect(),
        };
        let r = bench_protocol(&m, &ideal, BenchThresholds::default()).unwrap();
        assert!(r.pass);
        assert!(r.missing.is_empty());
        assert!(r.bins.iter().all(|b| b.delta.unwrap().abs() < 1e-12));
        let c = r.comparison.unwrap();
        assert_eq!((c.ks_distance, c.total_variation, c.fraction_delta), (0.0, 0.0, 0.0));

        let simulated = simulate_device(&m, &NoiseModel::noiseless(), 0, 3, 1).unwrap();
        let r = bench_protocol(&m, &simulated, BenchThresholds::default()).unwrap();
        assert!(r.pass);
        assert!(r.bins.iter().all(|b| b.delta.unwrap().abs() < 1e-9));
    }

    #[test]
    fn noisy_device_lowers_every_bin() {
        let m = manifest();
        let data = simulate_device(&m, &NoiseModel::uniform(0.05).unwrap(), 0, 1, 1).unwrap();
        let r = bench_protocol(&m, &data, BenchThresholds::default()).unwrap();
        for b in &r.bins {
            assert!(b.delta.unwrap() < 0.0, "{b:?}");
        }
        let shot = simulate_device(&m, &NoiseModel::uniform(0.05).unwrap(), 200, 4, 1).unwrap();
        assert!(shot.bins.iter().all(|b| b.values.len() == 4));
    }

    #[test]
    fn missing_bins_and_schema_errors() {
        let m = manifest();
        let mut data = simulate_device(&m, &NoiseModel::noiseless(), 0, 1, 1).unwrap();
        let dropped = data.bins.remove(0).bin;
        let r = bench_protocol(&m, &data, BenchThresholds::default()).unwrap();
        assert_eq!(r.missing, vec![dropped]);
        assert_eq!(r.warnings.len(), 1);
        assert!(r.bins.iter().find(|b| b.bin == dropped).unwrap().delta.is_none());

        let mut wrong = data.clone();
        wrong.target = TargetKind::IonqLike;
        assert!(matches!(bench_protocol(&m, &wrong, BenchThresholds::default()), Err(Error::Schema(_))));
        let mut extra = data.clone();
        extra.bins.push(MeasuredBin { bin: 99, values: vec![4.0] });
        assert!(matches!(bench_protocol(&m, &extra, BenchThresholds::default()), Err(Error::Schema(_))));
        assert!(MeasuredData::from_json("{\"target\": \"IQM_like\"}").is_err());

        data.bins.clear();
        let r = bench_protocol(&m, &data, BenchThresholds::default()).unwrap();
        assert!(!r.pass);
    }
}
