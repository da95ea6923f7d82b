//! Python bindings. Every function takes and returns JSON (or TOML) text so
//! the Python side needs nothing beyond `json`.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use qrc_bell::circuit::qasm::{from_qasm, to_qasm};
use qrc_bell::circuit::{random_circuit, Circuit, Ensemble, NoiseModel};
use qrc_bell::error::{Error, Result};
use qrc_bell::harness::{run_distribution, simulate, ExperimentConfig, SimState, Topology};
use qrc_bell::inequality::{Family, InequalitySpec};
use qrc_bell::measures::{measure_density, measure_state};
use qrc_bell::optimize::{seesaw_maximize_tensor, OptimizerConfig};

fn json<T: serde::Serialize>(v: &T) -> Result<String> {
    Ok(serde_json::to_string(v)?)
}

fn parse_circuit(text: &str) -> Result<Circuit> {
    if text.trim_start().starts_with("OPENQASM") {
        from_qasm(text)
    } else {
        Circuit::from_json(text)
    }
}

pub fn generate_impl(ensemble: &str, n_qubits: usize, depth: usize, seed: u64) -> Result<String> {
    let ensemble: Ensemble = ensemble.parse()?;
    let graph = ensemble.needs_connectivity().then(|| Topology::Linear.graph(n_qubits));
    json(&random_circuit(ensemble, n_qubits, depth, seed, graph.as_ref())?)
}

pub fn qasm_impl(circuit: &str) -> Result<String> {
    to_qasm(&parse_circuit(circuit)?, true)
}

pub fn bounds_impl(inequality: &str, n_qubits: usize) -> Result<(f64, f64)> {
    let table = InequalitySpec::new(inequality.parse::<Family>()?, n_qubits)?.table()?;
    Ok((table.classical_bound, table.quantum_bound))
}

pub fn violation_impl(circuit: &str, inequality: &str, noise: f64, seed: u64) -> Result<String> {
    let c = parse_circuit(circuit)?;
    let table = InequalitySpec::new(inequality.parse::<Family>()?, c.n_qubits)?.table()?;
    let state = simulate(&c, &NoiseModel::uniform(noise)?)?;
    let opt = OptimizerConfig { seed, ..Default::default() };
    json(&seesaw_maximize_tensor(&state.correlation_tensor()?, &table, &opt)?)
}

pub fn measures_impl(circuit: &str, noise: f64) -> Result<String> {
    let c = parse_circuit(circuit)?;
    let report = match simulate(&c, &NoiseModel::uniform(noise)?)? {
        SimState::Pure(psi) => measure_state(&psi)?,
        SimState::Mixed(rho) => measure_density(&rho)?,
    };
    json(&report)
}

pub fn run_impl(config_toml: &str) -> Result<String> {
    let cfg = ExperimentConfig::from_toml_str(config_toml)?;
    run_distribution(&cfg)?.summary.to_json()
}

fn py_err(e: Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Random circuit as JSON.
#[pyfunction]
#[pyo3(signature = (ensemble, n_qubits, depth, seed=0))]
fn generate_circuit(ensemble: &str, n_qubits: usize, depth: usize, seed: u64) -> PyResult<String> {
    generate_impl(ensemble, n_qubits, depth, seed).map_err(py_err)
}

/// OpenQASM 3 text for a JSON circuit.
#[pyfunction]
fn circuit_to_qasm(circuit: &str) -> PyResult<String> {
    qasm_impl(circuit).map_err(py_err)
}

/// `(classical, quantum)` bounds.
#[pyfunction]
fn bounds(inequality: &str, n_qubits: usize) -> PyResult<(f64, f64)> {
    bounds_impl(inequality, n_qubits).map_err(py_err)
}

/// Optimized violation of the state a circuit (JSON or QASM) prepares.
#[pyfunction]
#[pyo3(signature = (circuit, inequality="svetlichny", noise=0.0, seed=0))]
fn max_violation(circuit: &str, inequality: &str, noise: f64, seed: u64) -> PyResult<String> {
    violation_impl(circuit, inequality, noise, seed).map_err(py_err)
}

#[pyfunction]
#[pyo3(signature = (circuit, noise=0.0))]
fn measures(circuit: &str, noise: f64) -> PyResult<String> {
    measures_impl(circuit, noise).map_err(py_err)
}

/// Runs a TOML experiment config and returns the summary JSON.
#[pyfunction]
fn run_config(py: Python<'_>, config_toml: &str) -> PyResult<String> {
    py.allow_threads(|| run_impl(config_toml)).map_err(py_err)
}

#[pymodule]
fn qrcbell(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(generate_circuit, m)?)?;
    m.add_function(wrap_pyfunction!(circuit_to_qasm, m)?)?;
    m.add_function(wrap_pyfunction!(bounds, m)?)?;
    m.add_function(wrap_pyfunction!(max_violation, m)?)?;
    m.add_function(wrap_pyfunction!(measures, m)?)?;
    m.add_function(wrap_pyfunction!(run_config, m)?)?;
    Ok(())
}
