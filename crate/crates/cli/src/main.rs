use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use qrc_bell::circuit::qasm::{from_qasm, to_qasm};
use qrc_bell::circuit::{random_circuit, random_depth, Circuit, Ensemble, NoiseModel};
use qrc_bell::harness::{
    bench_protocol, build_manifest, depth_sweep, format_fraction_table, ghz_suite, noise_sweep, persist_run, read_histogram_csv,
    render_svg, run_distribution, simulate, simulate_device, violation_fraction_table, BenchThresholds, ExperimentConfig,
    GhzOptions, Manifest, MeasuredData, SimState, SweepPoint, Topology,
};
use qrc_bell::inequality::{Family, InequalitySpec};
use qrc_bell::measures::{measure_density, measure_state};
use qrc_bell::optimize::{grid_oracle, seesaw_maximize_tensor, OptimizerConfig};
use qrc_bell::seed::{child_seed, rng_from_seed};
use qrc_bell::transpile::TargetKind;

/// Exit code for unusable input (arguments, config files, input documents).
const EXIT_CONFIG: u8 = 1;
/// Exit code for failures while running an otherwise valid request.
const EXIT_RUNTIME: u8 = 2;

enum Failure {
    Config(String),
    Runtime(String),
}

type CliResult<T> = Result<T, Failure>;

trait Classify<T> {
    fn cfg(self) -> CliResult<T>;
    fn rt(self) -> CliResult<T>;
}

impl<T, E: std::fmt::Display> Classify<T> for Result<T, E> {
    fn cfg(self) -> CliResult<T> {
        self.map_err(|e| Failure::Config(e.to_string()))
    }
    fn rt(self) -> CliResult<T> {
        self.map_err(|e| Failure::Runtime(e.to_string()))
    }
}

#[derive(Parser)]
#[command(name = "qrc-bell", version, about = "Bell-inequality violations of states prepared by random quantum circuits")]
struct Cli {
    /// Worker threads for distribution runs (0 = all cores). Overrides QRC_WORKERS.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// More log output (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Qasm,
}

#[derive(Clone, Copy, ValueEnum)]
enum TopologyArg {
    Linear,
    AllToAll,
}

impl From<TopologyArg> for Topology {
    fn from(t: TopologyArg) -> Self {
        match t {
            TopologyArg::Linear => Topology::Linear,
            TopologyArg::AllToAll => Topology::AllToAll,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Emit random circuits as JSON lines or OpenQASM files.
    Generate {
        #[arg(long)]
        ensemble: String,
        #[arg(long)]
        qubits: usize,
        #[arg(long, default_value_t = 20)]
        depth: usize,
        /// Draw each depth uniformly from [depth, depth-max].
        #[arg(long)]
        depth_max: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        count: usize,
        #[arg(long, value_enum, default_value = "linear")]
        connectivity: TopologyArg,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
        /// Write one file per circuit here instead of printing.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Optimize one state (circuit file, .json or .qasm) against an inequality.
    Violate {
        circuit: PathBuf,
        #[arg(long, default_value = "svetlichny")]
        inequality: String,
        /// Depolarizing strength per gate.
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        #[arg(long, default_value_t = 10)]
        restarts: usize,
        #[arg(long, default_value_t = 200)]
        iterations: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also run the exhaustive lattice search with this angular step (radians).
        #[arg(long)]
        grid: Option<f64>,
    },
    /// Distribution runs, noise sweeps and depth sweeps from TOML configs.
    Sweep {
        /// One or more config files; several produce a violation-fraction table.
        #[arg(long = "config", required = true)]
        configs: Vec<PathBuf>,
        #[arg(long, value_delimiter = ',')]
        noise: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',')]
        depths: Option<Vec<usize>>,
        /// Output directory; overrides the config's.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Print the fraction table as text instead of JSON.
        #[arg(long)]
        table: bool,
    },
    /// Entanglement and magic measures over sampled circuits.
    Measures {
        #[arg(long)]
        ensemble: String,
        #[arg(long)]
        qubits: usize,
        #[arg(long, default_value_t = 20)]
        depth: usize,
        #[arg(long, default_value_t = 100)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        #[arg(long, value_enum, default_value = "linear")]
        connectivity: TopologyArg,
    },
    /// GHZ states: optimum, optional transpilation, noise and shot sampling.
    Ghz {
        #[arg(long, default_value = "svetlichny")]
        inequality: String,
        #[arg(long, value_delimiter = ',', default_value = "2,3,4,5")]
        n: Vec<usize>,
        /// `logical`, `iqm` or `ionq`; comma separated.
        #[arg(long, value_delimiter = ',', default_value = "logical")]
        targets: Vec<String>,
        #[arg(long, default_value_t = 0)]
        shots: usize,
        #[arg(long, default_value_t = 10)]
        repeats: usize,
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Representative circuit per violation bin, exported as native OpenQASM.
    Reps {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "iqm")]
        target: String,
        #[arg(long, default_value_t = 4.0)]
        lo: f64,
        #[arg(long, default_value_t = 0.2)]
        width: f64,
        #[arg(long, default_value_t = 10)]
        count: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare measured (or simulated-device) values against a manifest.
    Bench {
        #[arg(long)]
        manifest: PathBuf,
        /// Measured values in the MeasuredData JSON schema.
        #[arg(long, conflicts_with = "simulate_noise")]
        measured: Option<PathBuf>,
        /// Simulate the device instead, with this depolarizing strength.
        #[arg(long)]
        simulate_noise: Option<f64>,
        #[arg(long, default_value_t = 0)]
        shots: usize,
        #[arg(long, default_value_t = 10)]
        repeats: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        max_delta: Option<f64>,
        #[arg(long)]
        max_ks: Option<f64>,
        /// Also write the simulated measurements here.
        #[arg(long)]
        save_measured: Option<PathBuf>,
    },
    /// Render a histogram CSV (bin_lo,bin_hi,count) as SVG.
    Plot {
        csv: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        classical: Option<f64>,
        #[arg(long)]
        quantum: Option<f64>,
        #[arg(long, default_value = "")]
        title: String,
    },
}

fn print_json<T: Serialize>(v: &T) -> CliResult<()> {
    println!("{}", serde_json::to_string_pretty(v).rt()?);
    Ok(())
}

fn read(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| Failure::Config(format!("cannot read {}: {e}", path.display())))
}

fn load_circuit(path: &Path) -> CliResult<Circuit> {
    let text = read(path)?;
    if path.extension().is_some_and(|e| e == "qasm") {
        from_qasm(&text).cfg()
    } else {
        Circuit::from_json(&text).cfg()
    }
}

fn load_config(path: &Path, workers: Option<usize>) -> CliResult<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(path).cfg()?;
    if let Some(w) = workers {
        cfg.workers = w;
    }
    Ok(cfg)
}

fn noise_model(p: f64) -> CliResult<NoiseModel> {
    NoiseModel::uniform(p).cfg()
}

#[derive(Serialize)]
struct SweepRow {
    parameter: f64,
    fraction: f64,
    standard_error: f64,
    total: u64,
    failures: u64,
}

fn sweep_rows(points: &[SweepPoint]) -> Vec<SweepRow> {
    points
        .iter()
        .map(|p| SweepRow {
            parameter: p.parameter,
            fraction: p.histogram.violation_fraction,
            standard_error: p.histogram.standard_error,
            total: p.histogram.total,
            failures: p.histogram.failures,
        })
        .collect()
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Generate { ensemble, qubits, depth, depth_max, seed, count, connectivity, format, out } => {
            let ensemble: Ensemble = ensemble.parse().cfg()?;
            if depth_max.is_some_and(|m| m < depth) {
                return Err(Failure::Config("depth-max must be at least depth".into()));
            }
            if matches!(format, Format::Qasm) && ensemble == Ensemble::Haar {
                return Err(Failure::Config("Haar circuits are raw unitaries and have no OpenQASM form".into()));
            }
            let graph = ensemble.needs_connectivity().then(|| Topology::from(connectivity).graph(qubits));
            if let Some(dir) = &out {
                fs::create_dir_all(dir).rt()?;
            }
            for i in 0..count {
                let s = child_seed(seed, i as u64);
                let d = match depth_max {
                    Some(m) => random_depth(&mut rng_from_seed(child_seed(s, 3)), depth, m).cfg()?,
                    None => depth,
                };
                let c = random_circuit(ensemble, qubits, d, s, graph.as_ref()).cfg()?;
                let (text, ext) = match format {
                    Format::Json => (serde_json::to_string(&c).rt()?, "json"),
                    Format::Qasm => (to_qasm(&c, true).rt()?, "qasm"),
                };
                match &out {
                    Some(dir) => fs::write(dir.join(format!("circuit_{i:05}.{ext}")), text + "\n").rt()?,
                    None => println!("{text}"),
                }
            }
            Ok(())
        }
        Command::Violate { circuit, inequality, noise, restarts, iterations, seed, grid } => {
            let c = load_circuit(&circuit)?;
            let family: Family = inequality.parse().cfg()?;
            let table = InequalitySpec::new(family, c.n_qubits).and_then(|s| s.table()).cfg()?;
            let opt = OptimizerConfig { restarts, max_iterations: iterations, seed, ..Default::default() };
            opt.validate().cfg()?;
            let state = simulate(&c, &noise_model(noise)?).rt()?;
            let result = seesaw_maximize_tensor(&state.correlation_tensor().rt()?, &table, &opt).rt()?;
            let grid_value = match grid {
                Some(step) => {
                    let rho = match &state {
                        SimState::Pure(s) => s.to_density(),
                        SimState::Mixed(r) => r.clone(),
                    };
                    Some(grid_oracle(&rho, &table, step).cfg()?)
                }
                None => None,
            };
            print_json(&serde_json::json!({
                "inequality": family.label(),
                "n_qubits": c.n_qubits,
                "classical_bound": table.classical_bound,
                "quantum_bound": table.quantum_bound,
                "result": result,
                "grid_value": grid_value,
            }))
        }
        Command::Sweep { configs, noise, depths, out, table } => {
            let mut cfgs = configs.iter().map(|p| load_config(p, cli.workers)).collect::<CliResult<Vec<_>>>()?;
            if let Some(dir) = &out {
                for c in &mut cfgs {
                    c.output.dir = Some(dir.clone());
                }
            }
            if cfgs.len() > 1 {
                if noise.is_some() || depths.is_some() {
                    return Err(Failure::Config("sweeps take a single config".into()));
                }
                let rows = violation_fraction_table(&cfgs).rt()?;
                if table {
                    print!("{}", format_fraction_table(&rows));
                    return Ok(());
                }
                return print_json(&rows);
            }
            let cfg = &cfgs[0];
            match (noise, depths) {
                (Some(_), Some(_)) => Err(Failure::Config("choose either --noise or --depths".into())),
                (Some(ps), None) => print_json(&sweep_rows(&noise_sweep(cfg, &ps).cfg()?)),
                (None, Some(ds)) => print_json(&sweep_rows(&depth_sweep(cfg, &ds).cfg()?)),
                (None, None) => {
                    let result = run_distribution(cfg).rt()?;
                    if let Some(dir) = &cfg.output.dir {
                        let stem = cfg.output.stem.as_deref().unwrap_or("run");
                        for p in persist_run(&result, dir, stem, cfg.output.svg).rt()? {
                            log::info!("wrote {}", p.display());
                        }
                    }
                    if table {
                        let rows = violation_fraction_table(std::slice::from_ref(cfg)).rt()?;
                        print!("{}", format_fraction_table(&rows));
                        Ok(())
                    } else {
                        print_json(&result.summary)
                    }
                }
            }
        }
        Command::Measures { ensemble, qubits, depth, count, seed, noise, connectivity } => {
            let ensemble: Ensemble = ensemble.parse().cfg()?;
            let nm = noise_model(noise)?;
            let graph = ensemble.needs_connectivity().then(|| Topology::from(connectivity).graph(qubits));
            let mut rows = Vec::with_capacity(count);
            for i in 0..count {
                let s = child_seed(seed, i as u64);
                let c = random_circuit(ensemble, qubits, depth, s, graph.as_ref()).cfg()?;
                let report = match simulate(&c, &nm).rt()? {
                    SimState::Pure(psi) => measure_state(&psi),
                    SimState::Mixed(rho) => measure_density(&rho),
                }
                .rt()?;
                rows.push(serde_json::json!({ "index": i, "seed": s, "digest": c.digest(), "measures": report }));
            }
            print_json(&rows)
        }
        Command::Ghz { inequality, n, targets, shots, repeats, noise, seed } => {
            let targets = targets
                .iter()
                .map(|t| if t == "logical" { Ok(None) } else { t.parse::<TargetKind>().map(Some) })
                .collect::<Result<Vec<_>, _>>()
                .cfg()?;
            let opts = GhzOptions {
                family: inequality.parse().cfg()?,
                n_values: n,
                targets,
                noise: noise_model(noise)?,
                shots,
                repeats,
                seed,
                optimizer: OptimizerConfig::default(),
            };
            print_json(&ghz_suite(&opts).cfg()?)
        }
        Command::Reps { config, target, lo, width, count, out } => {
            let cfg = load_config(&config, cli.workers)?;
            let target: TargetKind = target.parse().cfg()?;
            if !(width > 0.0) || count == 0 {
                return Err(Failure::Config("need a positive bin width and at least one bin".into()));
            }
            let manifest = build_manifest(&cfg, target, lo, width, count).rt()?;
            manifest.write(&out).rt()?;
            for e in &manifest.entries {
                eprintln!(
                    "bin {:2} [{:.2}, {:.2}) value {:.4} seed {} two-qubit {} total {}",
                    e.bin, e.lo, e.hi, e.ideal_value, e.seed, e.gate_counts.two_qubit, e.gate_counts.total
                );
            }
            println!("{}", out.join("manifest.json").display());
            Ok(())
        }
        Command::Bench { manifest, measured, simulate_noise, shots, repeats, seed, max_delta, max_ks, save_measured } => {
            let manifest = Manifest::from_json(&read(&manifest)?).cfg()?;
            let data = match (measured, simulate_noise) {
                (Some(path), None) => MeasuredData::from_json(&read(&path)?).cfg()?,
                (None, Some(p)) => simulate_device(&manifest, &noise_model(p)?, shots, repeats, seed).rt()?,
                _ => return Err(Failure::Config("pass exactly one of --measured or --simulate-noise".into())),
            };
            if let Some(path) = save_measured {
                fs::write(path, serde_json::to_string_pretty(&data).rt()?).rt()?;
            }
            let mut thresholds = BenchThresholds::default();
            if let Some(d) = max_delta {
                thresholds.max_mean_abs_delta = d;
            }
            if let Some(k) = max_ks {
                thresholds.max_ks = k;
            }
            let report = bench_protocol(&manifest, &data, thresholds).cfg()?;
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            print_json(&report)
        }
        Command::Plot { csv, out, classical, quantum, title } => {
            let bins = read_histogram_csv(&csv).cfg()?;
            fs::write(&out, render_svg(&bins, classical, quantum, &title).cfg()?).rt()?;
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_RUNTIME)
        }
    }
}
