use std::path::Path;
use std::process::{Command, Output};

fn qrc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qrc-bell"))
        .args(args)
        .env_remove("QRC_SEED")
        .env_remove("QRC_WORKERS")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn write_config(dir: &Path, extra: &str) -> String {
    let path = dir.join("run.toml");
    std::fs::write(
        &path,
        format!(
            "inequality = \"SvetlichnyMinus\"\nensemble = \"CliffordT\"\nn_qubits = 3\ninstances = 30\ndepth = 15\nseed = 4\n{extra}\n[optimizer]\nrestarts = 4\n"
        ),
    )
    .unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn generate_is_deterministic_and_round_trips_through_violate() {
    let a = qrc(&["generate", "--ensemble", "clifft", "--qubits", "3", "--depth", "12", "--seed", "5", "--count", "3"]);
    let b = qrc(&["generate", "--ensemble", "clifft", "--qubits", "3", "--depth", "12", "--seed", "5", "--count", "3"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(stdout(&a).lines().count(), 3);

    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let q = qrc(&["generate", "--ensemble", "clifft", "--qubits", "3", "--depth", "12", "--seed", "5", "--format", "qasm", "--out", out]);
    assert!(q.status.success());
    let qasm = dir.path().join("circuit_00000.qasm");
    let json = dir.path().join("first.json");
    std::fs::write(&json, stdout(&a).lines().next().unwrap()).unwrap();

    let from_qasm = qrc(&["violate", qasm.to_str().unwrap(), "--seed", "1"]);
    let from_json = qrc(&["violate", json.to_str().unwrap(), "--seed", "1"]);
    assert!(from_qasm.status.success(), "{}", String::from_utf8_lossy(&from_qasm.stderr));
    let vq: serde_json::Value = serde_json::from_slice(&from_qasm.stdout).unwrap();
    let vj: serde_json::Value = serde_json::from_slice(&from_json.stdout).unwrap();
    let (x, y) = (vq["result"]["value"].as_f64().unwrap(), vj["result"]["value"].as_f64().unwrap());
    assert!((x - y).abs() < 1e-9);
    assert_eq!(vq["quantum_bound"].as_f64().unwrap(), 4.0 * 2f64.sqrt());
}

#[test]
fn violate_with_grid_on_ghz() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ghz.qasm");
    std::fs::write(&path, "OPENQASM 3.0;\nqubit[2] q;\nh q[0];\ncx q[0], q[1];\n").unwrap();
    let o = qrc(&["violate", path.to_str().unwrap(), "--inequality", "chsh", "--grid", "0.2617993877991494"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!((v["result"]["value"].as_f64().unwrap() - 2f64.sqrt()).abs() < 1e-6);
    assert!(v["grid_value"].as_f64().unwrap() <= 2f64.sqrt() + 1e-9);
}

#[test]
fn sweep_persists_and_ignores_worker_count() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "");
    let out1 = dir.path().join("w1");
    let out3 = dir.path().join("w3");
    let a = qrc(&["sweep", "--config", &cfg, "--workers", "1", "--out", out1.to_str().unwrap()]);
    let b = qrc(&["sweep", "--config", &cfg, "--workers", "3", "--out", out3.to_str().unwrap()]);
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(a.stdout, b.stdout);
    for f in ["run.jsonl", "run.summary.json", "run.csv"] {
        assert_eq!(std::fs::read(out1.join(f)).unwrap(), std::fs::read(out3.join(f)).unwrap(), "{f}");
    }
    assert_eq!(std::fs::read_to_string(out1.join("run.jsonl")).unwrap().lines().count(), 30);

    let svg = dir.path().join("h.svg");
    let p = qrc(&["plot", out1.join("run.csv").to_str().unwrap(), "--out", svg.to_str().unwrap(), "--classical", "4", "--quantum", "5.657"]);
    assert!(p.status.success());
    assert!(std::fs::read_to_string(svg).unwrap().contains("stroke-dasharray"));
}

#[test]
fn env_seed_override_changes_results() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "measures = false");
    let base = qrc(&["sweep", "--config", &cfg]);
    let other = Command::new(env!("CARGO_BIN_EXE_qrc-bell")).args(["sweep", "--config", &cfg]).env("QRC_SEED", "77").output().unwrap();
    assert!(other.status.success());
    let a: serde_json::Value = serde_json::from_slice(&base.stdout).unwrap();
    let b: serde_json::Value = serde_json::from_slice(&other.stdout).unwrap();
    assert_eq!(a["config"]["seed"], 4);
    assert_eq!(b["config"]["seed"], 77);
    let bad = Command::new(env!("CARGO_BIN_EXE_qrc-bell")).args(["sweep", "--config", &cfg]).env("QRC_WORKERS", "many").output().unwrap();
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn noise_sweep_and_table() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "measures = false");
    let o = qrc(&["sweep", "--config", &cfg, "--noise", "0,0.5"]);
    assert!(o.status.success());
    let rows: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(rows.as_array().unwrap().len(), 2);
    assert_eq!(rows[1]["fraction"].as_f64().unwrap(), 0.0);
    let t = qrc(&["sweep", "--config", &cfg, "--config", &cfg, "--table"]);
    assert!(stdout(&t).contains("Svetlichny"));
}

#[test]
fn exit_codes() {
    assert_eq!(qrc(&["sweep", "--config", "/nonexistent.toml"]).status.code(), Some(1));
    assert_eq!(qrc(&["generate", "--ensemble", "bogus", "--qubits", "2"]).status.code(), Some(1));
    assert_eq!(qrc(&["nonsense"]).status.code(), Some(1));
    assert_eq!(qrc(&["--help"]).status.code(), Some(0));
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "inequality = \"Mermin\"\n").unwrap();
    assert_eq!(qrc(&["sweep", "--config", bad.to_str().unwrap()]).status.code(), Some(1));
    let broken = dir.path().join("broken.qasm");
    std::fs::write(&broken, "OPENQASM 3.0;\nqubit[2] q;\nfoo q[0];\n").unwrap();
    let o = qrc(&["violate", broken.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 3"));
    let csv = dir.path().join("empty.csv");
    std::fs::write(&csv, "bin_lo,bin_hi,count\n").unwrap();
    assert_eq!(qrc(&["plot", csv.to_str().unwrap(), "--out", dir.path().join("x.svg").to_str().unwrap()]).status.code(), Some(1));
}

#[test]
fn ghz_and_measures() {
    let o = qrc(&["ghz", "--n", "2,3", "--targets", "logical,ionq", "--shots", "200", "--repeats", "3"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(rows.as_array().unwrap().len(), 4);
    assert!((rows[2]["exact_value"].as_f64().unwrap() - 4.0 * 2f64.sqrt()).abs() < 1e-6);
    assert_eq!(qrc(&["ghz", "--n", "9"]).status.code(), Some(1));

    let m = qrc(&["measures", "--ensemble", "clifford", "--qubits", "3", "--count", "5"]);
    let rows: serde_json::Value = serde_json::from_slice(&m.stdout).unwrap();
    for r in rows.as_array().unwrap() {
        assert!(r["measures"]["magic_m2"].as_f64().unwrap().abs() < 1e-9);
    }
}

#[test]
fn reps_then_bench() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "measures = false");
    let reps = dir.path().join("reps");
    let o = qrc(&["reps", "--config", &cfg, "--target", "ionq", "--out", reps.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let manifest = reps.join("manifest.json");
    let m: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&manifest).unwrap()).unwrap();
    let entries = m["entries"].as_array().unwrap();
    assert!(!entries.is_empty());
    for e in entries {
        for q in e["qasm"].as_array().unwrap() {
            let text = std::fs::read_to_string(reps.join(q["path"].as_str().unwrap())).unwrap();
            assert!(text.contains("gpi") || text.contains("ms"));
        }
    }

    let measured = dir.path().join("measured.json");
    let ideal = qrc(&["bench", "--manifest", manifest.to_str().unwrap(), "--simulate-noise", "0", "--repeats", "2", "--save-measured", measured.to_str().unwrap()]);
    let r: serde_json::Value = serde_json::from_slice(&ideal.stdout).unwrap();
    assert_eq!(r["pass"], true);

    let noisy = qrc(&["bench", "--manifest", manifest.to_str().unwrap(), "--simulate-noise", "0.05", "--repeats", "1"]);
    let r: serde_json::Value = serde_json::from_slice(&noisy.stdout).unwrap();
    for b in r["bins"].as_array().unwrap() {
        assert!(b["delta"].as_f64().unwrap() < 0.0);
    }

    let again = qrc(&["bench", "--manifest", manifest.to_str().unwrap(), "--measured", measured.to_str().unwrap()]);
    assert!(again.status.success());
    let text = std::fs::read_to_string(&measured).unwrap().replace("IonQ_like", "IQM_like");
    std::fs::write(&measured, text).unwrap();
    let mismatch = qrc(&["bench", "--manifest", manifest.to_str().unwrap(), "--measured", measured.to_str().unwrap()]);
    assert_eq!(mismatch.status.code(), Some(1));
}
