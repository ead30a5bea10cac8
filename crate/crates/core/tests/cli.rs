use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_quasikin"))
}

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(name)
}

fn run(cmd: &mut Command) -> Output {
    cmd.output().expect("binary runs")
}

const SMALL: &str = r#"
seed = 5
[grid]
dim = 1
n_x = 16
n_v = 48
[physics]
eps = 0.2
field_mode = "monge_ampere"
[time]
t_end = 0.05
[collision]
kind = "bgk"
tau = 0.05
[initial]
u0 = { kind = "uniform", value = [0.5] }
delta_power = 1.5
[output]
dir = "unused"
snapshot_every = 2
euler_reference = true
[sweep]
epsilons = [0.4, 0.2, 0.1]
"#;

#[test]
fn missing_config_exits_2_and_names_the_path() {
    let out = run(bin().args(["simulate", "--config", "/no/such/dir/run.cfg"]));
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("/no/such/dir/run.cfg"));
}

#[test]
fn invalid_thread_count_is_a_config_error() {
    let cfg = scenario("equilibrium.cfg");
    let dir = tempfile::tempdir().unwrap();
    let out = run(bin()
        .env("QUASIKIN_THREADS", "many")
        .args(["simulate", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path()));
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unknown_suite_is_a_config_error() {
    assert_eq!(run(bin().args(["check", "medium"])).status.code(), Some(2));
}

#[test]
fn equilibrium_run_writes_constant_rows_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(bin()
        .env("QUASIKIN_THREADS", "1")
        .args(["simulate", "--config"])
        .arg(scenario("equilibrium.cfg"))
        .arg("--out")
        .arg(dir.path()));
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("diagnostics.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "t,mass,momentum_x,momentum_y,e_kinetic,e_field,e_total,H_eps,h_eps,rho_Hm1,J_err_raw,J_err_divfree,clipped_mass,newton_iters,field_residual"
    );
    let rows: Vec<Vec<String>> = lines.map(|l| l.split(',').map(str::to_string).collect()).collect();
    assert!(rows.len() > 2);
    for r in &rows {
        assert_eq!(r.len(), 15);
        assert_eq!(r[3], "", "momentum_y is empty in d = 1");
        for c in [1, 2, 4, 5, 6, 7, 8, 9] {
            let (a, b): (f64, f64) = (r[c].parse().unwrap(), rows[0][c].parse().unwrap());
            assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0), "column {c}: {a} vs {b}");
        }
    }
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["status"], "complete");
    assert_eq!(manifest["partial"], false);
    assert_eq!(manifest["config_hash"].as_str().unwrap().len(), 64);
    let sidecar: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("snapshots/f_000000.json")).unwrap()).unwrap();
    assert_eq!(sidecar["dimension"], 1);
    assert_eq!(sidecar["n_x"], 16);
    let bytes = fs::read(dir.path().join("snapshots/f_000000.bin")).unwrap();
    assert_eq!(bytes.len(), 8 * 16 * 64);
}

#[test]
fn rerun_is_byte_identical() {
    let mut csvs = Vec::new();
    for _ in 0..2 {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("small.cfg");
        fs::write(&cfg, SMALL).unwrap();
        let out = run(bin().args(["simulate", "--config"]).arg(&cfg).arg("--out").arg(dir.path().join("o")));
        assert_eq!(out.status.code(), Some(0));
        csvs.push(fs::read(dir.path().join("o/diagnostics.csv")).unwrap());
    }
    assert_eq!(csvs[0], csvs[1]);
}

#[test]
fn runtime_error_keeps_partial_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, SMALL.replace("t_end = 0.05", "t_end = 0.05\ndt = 0.04")).unwrap();
    let out = run(bin().args(["simulate", "--config"]).arg(&cfg).arg("--out").arg(dir.path().join("o")));
    assert_eq!(out.status.code(), Some(3));
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("o/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["partial"], true);
    assert!(manifest["error"].as_str().unwrap().contains("CFL"));
    assert!(dir.path().join("o/diagnostics.csv").exists());
}

#[test]
fn sweep_writes_convergence_table() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("small.cfg");
    fs::write(&cfg, SMALL).unwrap();
    let out = run(bin().args(["sweep", "--config"]).arg(&cfg).arg("--out").arg(dir.path().join("s")));
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let table = fs::read_to_string(dir.path().join("s/convergence.csv")).unwrap();
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines[0], "epsilon,sup_H_eps,sup_h_eps,sup_rho_Hm1,final_J_err_divfree,status");
    assert_eq!(lines.len(), 5);
    assert!(lines[1].starts_with("0.4,") && lines[1].ends_with(",ok"));
    assert!(lines[4].starts_with("slope,"));
    assert!(dir.path().join("s/eps_0.1/diagnostics.csv").exists());
    assert!(dir.path().join("s/manifest.json").exists());
}

#[test]
fn sweep_without_list_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("nosweep.cfg");
    let text = SMALL.split("[sweep]").next().unwrap();
    fs::write(&cfg, text).unwrap();
    let out = run(bin().args(["sweep", "--config"]).arg(&cfg).arg("--out").arg(dir.path().join("s")));
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn euler_verb_writes_energy_history() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("tg.cfg");
    let text = fs::read_to_string(scenario("taylor_green_euler.cfg"))
        .unwrap()
        .replace("n_x = 64", "n_x = 16")
        .replace("t_end = 1.0", "t_end = 0.1");
    fs::write(&cfg, text).unwrap();
    let out = run(bin().args(["euler", "--config"]).arg(&cfg).arg("--out").arg(dir.path().join("e")));
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("e/euler.csv")).unwrap();
    let energies: Vec<f64> = csv.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert_eq!(energies.len(), 21);
    assert!(energies.iter().all(|e| (e - energies[0]).abs() < 1e-10));
    assert!(dir.path().join("e/snapshots/p_000020.bin").exists());
}
