//! Experiment orchestration: distribution runs, sweeps, GHZ suites, shot
//! simulation, histogram comparison and persistence.

mod bench;
mod histogram;
mod io;
mod shots;

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuit::{gate_counts, random_circuit, random_depth, simulate_noisy, simulate_pure, Circuit, Connectivity, Ensemble, GateCounts, NoiseModel};
use crate::error::{invalid, Error, Result};
use crate::inequality::{CoefficientTable, Family, InequalitySpec, MeasurementSettings};
use crate::measures::{measure_density, measure_state, MeasureReport};
use crate::optimize::{seesaw_maximize_tensor, OptimizerConfig};
use crate::qstate::MAX_QUBITS;
use crate::seed::{child_seed, rng_from_seed};
use crate::transpile::{decompose, NativeTarget, TargetKind};

pub use bench::{bench_protocol, build_manifest, simulate_device, BenchReport, BenchThresholds, BinDelta, Manifest, ManifestEntry, MeasuredBin, MeasuredData, QasmFile};
pub use histogram::{compare_histograms, ks_statistic, Histogram, HistogramComparison, BOUND_SLACK, VIOLATION_EPS};
pub use io::{persist_run, read_histogram_csv, render_svg, write_histogram_csv, write_jsonl, CsvBin};
pub use shots::{basis_rotation, estimate_bell_value, exact_bell_value, sample_correlator, setting_directions, SimState};

pub const ENV_SEED: &str = "QRC_SEED";
pub const ENV_WORKERS: &str = "QRC_WORKERS";

/// Default bin width as a fraction of the classical bound.
pub const DEFAULT_RELATIVE_WIDTH: f64 = 0.05;

/// Default per-instance depth range for gate-set ensembles: the lowest
/// 50-layer window (starting at a multiple of 10) whose 3-qubit Clifford+T
/// Svetlichny histogram sits within KS distance 0.05 of the Haar one.
pub const DEFAULT_DEPTH: DepthSpec = DepthSpec::Range { min: 30, max: 80 };

pub fn default_depth() -> DepthSpec {
    DEFAULT_DEPTH
}

/// Circuit depth: fixed, or drawn uniformly per instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DepthSpec {
    Fixed(usize),
    Range { min: usize, max: usize },
}

impl DepthSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            DepthSpec::Fixed(0) => Err(invalid("depth must be at least 1")),
            DepthSpec::Range { min, max } if min == 0 || min > max => {
                Err(invalid(format!("invalid depth range [{min}, {max}]")))
            }
            _ => Ok(()),
        }
    }

    fn draw(&self, seed: u64) -> Result<usize> {
        match *self {
            DepthSpec::Fixed(d) => Ok(d),
            DepthSpec::Range { min, max } => random_depth(&mut rng_from_seed(seed), min, max),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Topology {
    #[default]
    Linear,
    AllToAll,
}

impl Topology {
    pub fn graph(self, n_qubits: usize) -> Connectivity {
        match self {
            Topology::Linear => Connectivity::linear(n_qubits),
            Topology::AllToAll => Connectivity::all_to_all(n_qubits),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputPaths {
    /// Directory receiving `<stem>.jsonl`, `<stem>.summary.json`, `<stem>.csv`, `<stem>.svg`.
    pub dir: Option<PathBuf>,
    pub stem: Option<String>,
    pub svg: bool,
}

fn default_true() -> bool {
    true
}

/// One distribution run. Loaded from TOML; see `configs/` in the repository root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub inequality: Family,
    pub ensemble: Ensemble,
    pub n_qubits: usize,
    pub instances: usize,
    #[serde(default = "default_depth")]
    pub depth: DepthSpec,
    #[serde(default)]
    pub noise: NoiseModel,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    /// 0 means exact expectation values.
    #[serde(default)]
    pub shots: usize,
    #[serde(default)]
    pub seed: u64,
    /// Thread count, 0 for all cores. Never affects results.
    #[serde(default, skip_serializing)]
    pub workers: usize,
    /// Coupling graph for the native ensembles.
    #[serde(default)]
    pub connectivity: Topology,
    /// Histogram bin width; defaults to 5% of the classical bound.
    #[serde(default)]
    pub bin_width: Option<f64>,
    #[serde(default = "default_true")]
    pub measures: bool,
    #[serde(default, skip_serializing)]
    pub output: OutputPaths,
}

impl ExperimentConfig {
    pub fn new(inequality: Family, ensemble: Ensemble, n_qubits: usize, instances: usize, depth: DepthSpec) -> Self {
        ExperimentConfig {
            inequality,
            ensemble,
            n_qubits,
            instances,
            depth,
            noise: NoiseModel::noiseless(),
            optimizer: OptimizerConfig::default(),
            shots: 0,
            seed: 0,
            workers: 0,
            connectivity: Topology::default(),
            bin_width: None,
            measures: true,
            output: OutputPaths::default(),
        }
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a TOML file and applies `QRC_SEED` / `QRC_WORKERS` overrides.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_toml_str(&text)?;
        cfg.apply_env_overrides()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn apply_env_overrides(&mut self) -> Result<()> {
        let parse = |key: &str| -> Result<Option<u64>> {
            match std::env::var(key) {
                Ok(v) => v.trim().parse().map(Some).map_err(|_| Error::Config(format!("{key}={v} is not an integer"))),
                Err(_) => Ok(None),
            }
        };
        if let Some(seed) = parse(ENV_SEED)? {
            self.seed = seed;
        }
        if let Some(w) = parse(ENV_WORKERS)? {
            self.workers = w as usize;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let cfg_err = |e: Error| Error::Config(e.to_string());
        if self.instances == 0 {
            return Err(Error::Config("instances must be at least 1".into()));
        }
        if self.n_qubits == 0 || self.n_qubits > MAX_QUBITS {
            return Err(Error::Config(format!("n_qubits must be in 1..={MAX_QUBITS}")));
        }
        InequalitySpec::new(self.inequality, self.n_qubits).map_err(cfg_err)?;
        self.depth.validate().map_err(cfg_err)?;
        self.noise.validate().map_err(cfg_err)?;
        self.optimizer.validate().map_err(cfg_err)?;
        if self.ensemble == Ensemble::Custom {
            return Err(Error::Config("the custom ensemble cannot be sampled".into()));
        }
        if let Some(w) = self.bin_width {
            if !(w > 0.0) || !w.is_finite() {
                return Err(Error::Config(format!("bin_width must be positive, got {w}")));
            }
        }
        Ok(())
    }

    pub fn table(&self) -> Result<CoefficientTable> {
        InequalitySpec::new(self.inequality, self.n_qubits)?.table()
    }

    pub fn bin_width_for(&self, table: &CoefficientTable) -> f64 {
        self.bin_width.unwrap_or(DEFAULT_RELATIVE_WIDTH * table.classical_bound)
    }

    fn connectivity_graph(&self) -> Option<Connectivity> {
        self.ensemble.needs_connectivity().then(|| self.connectivity.graph(self.n_qubits))
    }

    pub fn instance_seed(&self, index: usize) -> u64 {
        child_seed(self.seed, index as u64)
    }

    /// The circuit of instance `index`; a pure function of the config.
    pub fn instance_circuit(&self, index: usize) -> Result<Circuit> {
        let inst = self.instance_seed(index);
        let depth = self.depth.draw(child_seed(inst, 3))?;
        random_circuit(self.ensemble, self.n_qubits, depth, child_seed(inst, 0), self.connectivity_graph().as_ref())
    }

    fn with_pool<T: Send>(&self, f: impl FnOnce() -> T + Send) -> Result<T> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(self.workers)
            .build()
            .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
        Ok(pool.install(f))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub index: usize,
    /// Circuit seed.
    pub seed: u64,
    pub depth: usize,
    pub digest: String,
    /// Reported value: exact optimum, or its shot estimate when `shots > 0`.
    pub value: Option<f64>,
    pub exact_value: Option<f64>,
    pub violated: bool,
    pub settings: Option<MeasurementSettings>,
    pub measures: Option<MeasureReport>,
    pub gate_counts: Option<GateCounts>,
    pub error: Option<String>,
}

/// Simulates a circuit: pure when noiseless, density matrix otherwise.
pub fn simulate(c: &Circuit, noise: &NoiseModel) -> Result<SimState> {
    if noise.is_noiseless() {
        Ok(SimState::Pure(simulate_pure(c)?))
    } else {
        Ok(SimState::Mixed(simulate_noisy(c, noise)?))
    }
}

fn run_instance(cfg: &ExperimentConfig, table: &CoefficientTable, index: usize) -> RunRecord {
    let inst = cfg.instance_seed(index);
    let mut rec = RunRecord {
        index,
        seed: child_seed(inst, 0),
        depth: 0,
        digest: String::new(),
        value: None,
        exact_value: None,
        violated: false,
        settings: None,
        measures: None,
        gate_counts: None,
        error: None,
    };
    let body = |rec: &mut RunRecord| -> Result<()> {
        let circuit = cfg.instance_circuit(index)?;
        rec.depth = circuit.depth;
        rec.digest = circuit.digest();
        rec.gate_counts = Some(gate_counts(&circuit));
        let state = simulate(&circuit, &cfg.noise)?;
        let opt_cfg = OptimizerConfig { seed: child_seed(child_seed(inst, 1), cfg.optimizer.seed), ..cfg.optimizer };
        let opt = seesaw_maximize_tensor(&state.correlation_tensor()?, table, &opt_cfg)?;
        let value = if cfg.shots > 0 {
            let mut rng = rng_from_seed(child_seed(inst, 2));
            estimate_bell_value(&state, table, &opt.settings, cfg.shots, &mut rng)?
        } else {
            opt.value
        };
        if cfg.measures {
            rec.measures = Some(match &state {
                SimState::Pure(s) => measure_state(s)?,
                SimState::Mixed(r) => measure_density(r)?,
            });
        }
        rec.exact_value = Some(opt.value);
        rec.value = Some(value);
        rec.violated = table.violates(value);
        rec.settings = Some(opt.settings);
        Ok(())
    };
    if let Err(e) = body(&mut rec) {
        log::warn!("instance {index} failed: {e}");
        rec.error = Some(e.to_string());
    }
    rec
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub config: ExperimentConfig,
    pub family_sign: Option<String>,
    pub magic_log_base: String,
    pub histogram: Histogram,
    pub mean_value: Option<f64>,
    pub max_value: Option<f64>,
}

impl RunSummary {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub summary: RunSummary,
    pub records: Vec<RunRecord>,
}

impl RunOutput {
    pub fn histogram(&self) -> &Histogram {
        &self.summary.histogram
    }

    /// Values of the successful instances, in instance order.
    pub fn values(&self) -> Vec<f64> {
        self.records.iter().filter_map(|r| r.value).collect()
    }
}

/// Runs every instance of `cfg` and aggregates a histogram.
///
/// Instances are independent and seeded by index, so the output does not
/// depend on `cfg.workers`.
pub fn run_distribution(cfg: &ExperimentConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let table = cfg.table()?;
    let records: Vec<RunRecord> =
        cfg.with_pool(|| (0..cfg.instances).into_par_iter().map(|i| run_instance(cfg, &table, i)).collect())?;
    let mut hist = Histogram::new(cfg.bin_width_for(&table), table.classical_bound, table.quantum_bound)?;
    let mut sum = 0.0;
    let mut max: Option<f64> = None;
    for r in &records {
        match r.value {
            Some(v) => {
                hist.add(v)?;
                sum += v;
                max = Some(max.map_or(v, |m| m.max(v)));
            }
            None => hist.add_failure(),
        }
    }
    let mean_value = (hist.total > 0).then(|| sum / hist.total as f64);
    let summary = RunSummary {
        config: cfg.clone(),
        family_sign: cfg.inequality.sign().map(str::to_string),
        magic_log_base: "e".into(),
        histogram: hist,
        mean_value,
        max_value: max,
    };
    Ok(RunOutput { summary, records })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FractionRow {
    pub ensemble: Ensemble,
    pub family: Family,
    pub n_qubits: usize,
    pub instances: usize,
    pub failures: u64,
    pub violations: u64,
    pub fraction: f64,
    pub standard_error: f64,
}

/// One distribution run per config, reduced to Table-1 style rows.
pub fn violation_fraction_table(cfgs: &[ExperimentConfig]) -> Result<Vec<FractionRow>> {
    if cfgs.is_empty() {
        return Err(invalid("need at least one config"));
    }
    cfgs.iter()
        .map(|cfg| {
            let h = run_distribution(cfg)?.summary.histogram;
            Ok(FractionRow {
                ensemble: cfg.ensemble,
                family: cfg.inequality,
                n_qubits: cfg.n_qubits,
                instances: cfg.instances,
                failures: h.failures,
                violations: h.violations,
                fraction: h.violation_fraction,
                standard_error: h.standard_error,
            })
        })
        .collect()
}

/// Plain-text grid: one line per ensemble, one column per (family, N).
pub fn format_fraction_table(rows: &[FractionRow]) -> String {
    let mut cols: Vec<(Family, usize)> = rows.iter().map(|r| (r.family, r.n_qubits)).collect();
    cols.sort();
    cols.dedup();
    let mut ensembles: Vec<Ensemble> = rows.iter().map(|r| r.ensemble).collect();
    ensembles.sort();
    ensembles.dedup();
    let mut out = format!("{:<12}", "ensemble");
    for (f, n) in &cols {
        out += &format!(" {:>18}", format!("{} n={n}", f.label()));
    }
    out.push('\n');
    for e in ensembles {
        out += &format!("{:<12}", e.label());
        for (f, n) in &cols {
            let cell = rows
                .iter()
                .find(|r| r.ensemble == e && r.family == *f && r.n_qubits == *n)
                .map(|r| format!("{:.2}% +- {:.2}", 100.0 * r.fraction, 100.0 * r.standard_error))
                .unwrap_or_else(|| "-".into());
            out += &format!(" {cell:>18}");
        }
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub parameter: f64,
    pub histogram: Histogram,
}

/// One run per depolarizing strength `p` (applied to both `p1` and `p2`), same seed.
pub fn noise_sweep(cfg: &ExperimentConfig, ps: &[f64]) -> Result<Vec<SweepPoint>> {
    if ps.is_empty() {
        return Err(invalid("noise sweep needs at least one value"));
    }
    ps.iter()
        .map(|&p| {
            let c = ExperimentConfig { noise: NoiseModel::uniform(p)?, ..cfg.clone() };
            Ok(SweepPoint { parameter: p, histogram: run_distribution(&c)?.summary.histogram })
        })
        .collect()
}

/// One run per fixed depth, same seed.
pub fn depth_sweep(cfg: &ExperimentConfig, depths: &[usize]) -> Result<Vec<SweepPoint>> {
    if depths.is_empty() {
        return Err(invalid("depth sweep needs at least one value"));
    }
    depths
        .iter()
        .map(|&d| {
            let c = ExperimentConfig { depth: DepthSpec::Fixed(d), ..cfg.clone() };
            Ok(SweepPoint { parameter: d as f64, histogram: run_distribution(&c)?.summary.histogram })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GhzOptions {
    pub family: Family,
    pub n_values: Vec<usize>,
    /// Transpile to these targets before simulation; `None` keeps the logical circuit.
    pub targets: Vec<Option<TargetKind>>,
    pub noise: NoiseModel,
    pub shots: usize,
    pub repeats: usize,
    pub seed: u64,
    pub optimizer: OptimizerConfig,
}

impl Default for GhzOptions {
    fn default() -> Self {
        GhzOptions {
            family: Family::SvetlichnyMinus,
            n_values: vec![2, 3, 4, 5],
            targets: vec![None],
            noise: NoiseModel::noiseless(),
            shots: 0,
            repeats: 10,
            seed: 0,
            optimizer: OptimizerConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GhzRow {
    pub n_qubits: usize,
    pub family: Family,
    pub target: Option<TargetKind>,
    pub gate_counts: GateCounts,
    /// Optimum of the simulated state.
    pub exact_value: f64,
    pub ideal_bound: f64,
    pub shots: usize,
    /// Shot estimates at the optimal settings, one per repeat.
    pub samples: Vec<f64>,
    pub mean: Option<f64>,
    pub std_dev: Option<f64>,
}

/// Sample mean and (n - 1)-normalized standard deviation.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = if xs.len() > 1 { xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    (mean, var.sqrt())
}

/// GHZ states from an H + CNOT chain, optimized, optionally transpiled,
/// noised and shot-sampled.
pub fn ghz_suite(opts: &GhzOptions) -> Result<Vec<GhzRow>> {
    opts.noise.validate()?;
    opts.optimizer.validate()?;
    if opts.shots > 0 && opts.repeats == 0 {
        return Err(invalid("shot sampling needs at least one repeat"));
    }
    let mut rows = Vec::new();
    for &n in &opts.n_values {
        if !(2..=8).contains(&n) {
            return Err(invalid(format!("GHZ suite supports 2..=8 qubits, got {n}")));
        }
        let table = InequalitySpec::new(opts.family, n)?.table()?;
        for (ti, target) in opts.targets.iter().enumerate() {
            let logical = Circuit::ghz(n);
            let circuit = match target {
                None => logical,
                Some(kind) => decompose(&logical, &NativeTarget::new(*kind, Connectivity::linear(n))?)?,
            };
            let state = simulate(&circuit, &opts.noise)?;
            let seed = child_seed(child_seed(opts.seed, n as u64), ti as u64);
            let opt_cfg = OptimizerConfig { seed: child_seed(seed, 1), ..opts.optimizer };
            let opt = seesaw_maximize_tensor(&state.correlation_tensor()?, &table, &opt_cfg)?;
            let mut samples = Vec::new();
            if opts.shots > 0 {
                let mut rng = rng_from_seed(child_seed(seed, 2));
                for _ in 0..opts.repeats {
                    samples.push(estimate_bell_value(&state, &table, &opt.settings, opts.shots, &mut rng)?);
                }
            }
            let stats = (!samples.is_empty()).then(|| mean_std(&samples));
            rows.push(GhzRow {
                n_qubits: n,
                family: opts.family,
                target: *target,
                gate_counts: gate_counts(&circuit),
                exact_value: opt.value,
                ideal_bound: table.quantum_bound,
                shots: opts.shots,
                samples,
                mean: stats.map(|s| s.0),
                std_dev: stats.map(|s| s.1),
            });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(family: Family, ensemble: Ensemble, n: usize, instances: usize) -> ExperimentConfig {
        let mut c = ExperimentConfig::new(family, ensemble, n, instances, DepthSpec::Fixed(12));
        c.optimizer.restarts = 4;
        c.seed = 11;
        c
    }

    #[test]
    fn shipped_configs_load() {
        let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
        let mut count = 0;
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.extension().is_some_and(|e| e == "toml") {
                let text = std::fs::read_to_string(&path).unwrap();
                ExperimentConfig::from_toml_str(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
                count += 1;
            }
        }
        assert!(count >= 4);
    }

    #[test]
    fn toml_round_trip_and_defaults() {
        let text = r#"
            inequality = "SvetlichnyMinus"
            ensemble = "CliffordT"
            n_qubits = 3
            instances = 50
            depth = { min = 10, max = 60 }
            seed = 7
            bin_width = 0.2
            [optimizer]
            restarts = 4
        "#;
        let cfg = ExperimentConfig::from_toml_str(text).unwrap();
        assert_eq!(cfg.depth, DepthSpec::Range { min: 10, max: 60 });
        assert_eq!(cfg.optimizer.max_iterations, 200);
        assert_eq!(cfg.optimizer.restarts, 4);
        assert!(cfg.noise.is_noiseless());
        assert!(cfg.measures);
        let again = ExperimentConfig::from_toml_str(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(again, cfg);
        let fixed = ExperimentConfig::from_toml_str(&text.replace("{ min = 10, max = 60 }", "25")).unwrap();
        assert_eq!(fixed.depth, DepthSpec::Fixed(25));
        let implicit = ExperimentConfig::from_toml_str(&text.replace("depth = { min = 10, max = 60 }", "")).unwrap();
        assert_eq!(implicit.depth, DEFAULT_DEPTH);
    }

    #[test]
    fn config_errors() {
        let base = "inequality = \"Mermin\"\nensemble = \"Clifford\"\nn_qubits = 3\ndepth = 5\n";
        for bad in [
            format!("{base}instances = 0"),
            format!("{base}instances = 5\nshots = -1"),
            format!("{base}instances = 5\nbogus = 1"),
            base.replace("depth = 5", "depth = 0") + "instances = 5",
            base.replace("n_qubits = 3", "n_qubits = 1") + "instances = 5",
            format!("{base}instances = 5\n[noise]\np1 = 1.5"),
        ] {
            assert!(matches!(ExperimentConfig::from_toml_str(&bad), Err(Error::Config(_))), "{bad}");
        }
        let chsh3 = base.replace("Mermin", "CHSH") + "instances = 5";
        assert!(ExperimentConfig::from_toml_str(&chsh3).is_err());
    }

    #[test]
    fn env_overrides() {
        let mut cfg = small(Family::Mermin, Ensemble::Clifford, 3, 5);
        std::env::set_var(ENV_SEED, "99");
        std::env::set_var(ENV_WORKERS, "2");
        cfg.apply_env_overrides().unwrap();
        let (seed, workers) = (cfg.seed, cfg.workers);
        std::env::set_var(ENV_WORKERS, "two");
        assert!(cfg.apply_env_overrides().is_err());
        std::env::remove_var(ENV_SEED);
        std::env::remove_var(ENV_WORKERS);
        assert_eq!((seed, workers), (99, 2));
    }

    #[test]
    fn distribution_is_reproducible_across_worker_counts() {
        let mut cfg = small(Family::SvetlichnyMinus, Ensemble::CliffordT, 3, 24);
        cfg.workers = 1;
        let a = run_distribution(&cfg).unwrap();
        cfg.workers = 3;
        let b = run_distribution(&cfg).unwrap();
        assert_eq!(a.summary.to_json().unwrap(), b.summary.to_json().unwrap());
        assert_eq!(serde_json::to_string(&a.records).unwrap(), serde_json::to_string(&b.records).unwrap());
        assert_eq!(a.histogram().total, 24);
        for (i, r) in a.records.iter().enumerate() {
            assert_eq!(r.index, i);
            assert!(r.value.unwrap() <= 4.0 * 2f64.sqrt() + 1e-6);
            assert!(r.measures.unwrap().tangle3.is_some());
        }
    }

    #[test]
    fn fully_depolarized_outputs_never_violate() {
        let mut cfg = small(Family::Mermin, Ensemble::Clifford, 3, 6);
        cfg.noise = NoiseModel::uniform(1.0).unwrap();
        let out = run_distribution(&cfg).unwrap();
        assert_eq!(out.histogram().violation_fraction, 0.0);
        for v in out.values() {
            assert!(v < 1e-9);
        }
        let m = out.records[0].measures.unwrap();
        assert!(m.magic_m2.is_none());
    }

    #[test]
    fn native_ensembles_run() {
        for e in [Ensemble::NativeIqm, Ensemble::NativeIonq, Ensemble::Haar] {
            let out = run_distribution(&small(Family::Mermin, e, 3, 4)).unwrap();
            assert_eq!(out.histogram().failures, 0, "{e:?}");
        }
    }

    #[test]
    fn shots_path_reports_both_values() {
        let mut cfg = small(Family::Mermin, Ensemble::CliffordT, 3, 4);
        cfg.shots = 500;
        let out = run_distribution(&cfg).unwrap();
        for r in &out.records {
            let (v, e) = (r.value.unwrap(), r.exact_value.unwrap());
            assert!((v - e).abs() < 0.6, "{v} vs {e}");
        }
    }

    #[test]
    fn sweeps_share_seed() {
        let cfg = small(Family::SvetlichnyMinus, Ensemble::CliffordT, 3, 30);
        let pts = noise_sweep(&cfg, &[0.0, 0.3]).unwrap();
        assert_eq!(pts.len(), 2);
        assert!(pts[0].histogram.violation_fraction >= pts[1].histogram.violation_fraction);
        let direct = run_distribution(&cfg).unwrap();
        assert_eq!(pts[0].histogram, direct.summary.histogram);
        let d = depth_sweep(&cfg, &[3, 9]).unwrap();
        assert_eq!(d[1].parameter, 9.0);
        assert!(noise_sweep(&cfg, &[]).is_err());
        assert!(depth_sweep(&cfg, &[]).is_err());
    }

    #[test]
    fn fraction_table_shape() {
        let rows = violation_fraction_table(&[
            small(Family::Chsh, Ensemble::Clifford, 2, 10),
            small(Family::Mermin, Ensemble::Clifford, 3, 10),
        ])
        .unwrap();
        assert_eq!(rows.len(), 2);
        let text = format_fraction_table(&rows);
        assert!(text.contains("CHSH n=2") && text.contains("Mermin n=3") && text.contains("Clifford"));
        assert!(violation_fraction_table(&[]).is_err());
    }

    #[test]
    fn ghz_exact_values() {
        let rows = ghz_suite(&GhzOptions { n_values: vec![2, 3], ..Default::default() }).unwrap();
        assert!((rows[1].exact_value - 4.0 * 2f64.sqrt()).abs() < 1e-6);
        assert!(rows.iter().all(|r| r.exact_value <= r.ideal_bound + 1e-9));
        let mermin = ghz_suite(&GhzOptions { family: Family::Mermin, n_values: vec![2], ..Default::default() }).unwrap();
        assert!((mermin[0].exact_value - 2f64.sqrt()).abs() < 1e-6);
        assert!(ghz_suite(&GhzOptions { n_values: vec![9], ..Default::default() }).is_err());
    }

    #[test]
    fn ghz_transpiled_and_sampled() {
        let opts = GhzOptions {
            n_values: vec![3],
            targets: vec![Some(TargetKind::IqmLike), Some(TargetKind::IonqLike)],
            shots: 1000,
            repeats: 10,
            ..Default::default()
        };
        for row in ghz_suite(&opts).unwrap() {
            assert!((row.exact_value - 4.0 * 2f64.sqrt()).abs() < 1e-6);
            let sigma = (8.0 * 0.5 / 1000.0f64).sqrt() / (10f64).sqrt();
            assert!((row.mean.unwrap() - row.ideal_bound).abs() < 3.0 * sigma, "{row:?}");
            assert!(row.gate_counts.per_kind.keys().all(|k| k != "CNOT" && k != "H"));
        }
    }
}
