use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn g2flow(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_g2flow"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("run.toml");
    fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

fn manifest(dir: &Path) -> serde_json::Value {
    serde_json::from_slice(&fs::read(dir.join("manifest.json")).unwrap()).unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

#[test]
fn verify_passes_and_is_deterministic() {
    let tmp = TempDir::new().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for dir in [&a, &b] {
        let out = g2flow(&["verify", "--seed", "5", "--out", dir.to_str().unwrap()]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    }
    let ra = fs::read(a.join("verify.json")).unwrap();
    assert_eq!(ra, fs::read(b.join("verify.json")).unwrap());
    let m = manifest(&a);
    assert_eq!(m["status"], "passed");
    assert_eq!(m["seed"], 5);
    assert_eq!(m["table_checksums"]["all"].as_str().unwrap().len(), 64);
}

#[test]
fn evolve_zero_data_is_stationary() {
    let tmp = TempDir::new().unwrap();
    let out_dir = tmp.path().join("run");
    let config = write_config(
        tmp.path(),
        "[grid]\nsizes = [8, 8]\n[initial]\nname = \"zero\"\n[integrator]\nt_end = 0.1\n",
    );
    let out = g2flow(&["evolve", "--config", &config, "--out", out_dir.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let m = manifest(&out_dir);
    assert_eq!(m["status"], "stationary");
    let series = fs::read_to_string(out_dir.join("series.csv")).unwrap();
    let mut energies = series
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(2).unwrap().parse::<f64>().unwrap());
    assert!(energies.all(|e| e == 0.0));
    assert!(out_dir.join("final_state.bin").exists());
    let files: Vec<&str> = m["files"].as_array().unwrap().iter().map(|f| f["path"].as_str().unwrap()).collect();
    assert!(files.contains(&"series.csv") && files.contains(&"final_state.bin"));
}

#[test]
fn evolve_is_bit_reproducible() {
    let tmp = TempDir::new().unwrap();
    let config = write_config(
        tmp.path(),
        "seed = 3\n[grid]\nsizes = [16]\n[initial]\nname = \"band_limited\"\namplitude = 0.2\n\
         [integrator]\nt_end = 0.05\n",
    );
    let dirs = [tmp.path().join("a"), tmp.path().join("b")];
    for dir in &dirs {
        let out = g2flow(&["evolve", "--config", &config, "--out", dir.to_str().unwrap()]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    }
    for name in ["series.csv", "final_state.bin", "manifest.json"] {
        let a = fs::read(dirs[0].join(name)).unwrap();
        let b = fs::read(dirs[1].join(name)).unwrap();
        // The manifests differ only through the echoed output directory.
        if name == "manifest.json" {
            let strip = |v: &[u8]| {
                let mut m: serde_json::Value = serde_json::from_slice(v).unwrap();
                m["config"]["output"]["dir"] = serde_json::Value::Null;
                m["files"] = m["files"]
                    .as_array()
                    .unwrap()
                    .iter()
                    .filter(|f| f["path"] != "config.toml")
                    .cloned()
                    .collect();
                m
            };
            assert_eq!(strip(&a), strip(&b));
        } else {
            assert_eq!(a, b, "{name}");
        }
    }
}

#[test]
fn checkpoint_restarts_the_run() {
    let tmp = TempDir::new().unwrap();
    let first = tmp.path().join("first");
    let config = write_config(
        tmp.path(),
        "[grid]\nsizes = [16]\n[initial]\nname = \"fourier_mode\"\namplitude = 0.1\n[integrator]\nt_end = 0.02\n",
    );
    assert_eq!(code(&g2flow(&["evolve", "--config", &config, "--out", first.to_str().unwrap()])), 0);
    let stem = first.join("final_state");
    let second = tmp.path().join("second");
    let restart = write_config(
        tmp.path(),
        &format!(
            "[grid]\nsizes = [16]\n[initial]\nname = \"checkpoint\"\npath = {:?}\n[integrator]\nt_end = 0.02\n",
            stem.to_str().unwrap()
        ),
    );
    let out = g2flow(&["evolve", "--config", &restart, "--out", second.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let m1 = manifest(&first);
    let m2 = manifest(&second);
    assert_eq!(m2["start"]["energy"], m1["end"]["energy"]);
    assert!(m2["end"]["energy"].as_f64().unwrap() < m1["end"]["energy"].as_f64().unwrap());
}

#[test]
fn config_errors_exit_with_two() {
    let tmp = TempDir::new().unwrap();
    let bad = write_config(tmp.path(), "[grid]\nsizes = [8]\nsize = 3\n");
    let out = g2flow(&["evolve", "--config", &bad, "--out", tmp.path().join("x").to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    assert!(!tmp.path().join("x").exists());

    let unknown = write_config(tmp.path(), "[flow]\nname = \"heat\"\n");
    let out = g2flow(&["evolve", "--config", &unknown]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("vector"));

    let out = g2flow(&["verify", "--config", tmp.path().join("missing.toml").to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    assert_eq!(code(&g2flow(&["verify", "--threads", "0"])), 2);
}

#[test]
fn chart_exit_is_a_numerical_abort() {
    let tmp = TempDir::new().unwrap();
    let out_dir = tmp.path().join("run");
    let config = write_config(
        tmp.path(),
        "[grid]\nsizes = [8]\n[initial]\nname = \"constant\"\nvalue = [0.995, 0, 0, 0, 0, 0, 0]\n",
    );
    let out = g2flow(&["evolve", "--config", &config, "--out", out_dir.to_str().unwrap()]);
    assert_eq!(code(&out), 3);
    assert_eq!(manifest(&out_dir)["status"], "chart_exit");
}

#[test]
fn failing_check_exits_with_one() {
    let tmp = TempDir::new().unwrap();
    let out_dir = tmp.path().join("run");
    let config = write_config(
        tmp.path(),
        "[grid]\nsizes = [8]\n[energy]\npairs = 2\ntolerance = 1e-30\n",
    );
    let out = g2flow(&["energy", "--config", &config, "--out", out_dir.to_str().unwrap()]);
    assert_eq!(code(&out), 1);
    assert_eq!(manifest(&out_dir)["status"], "failed");
}

#[test]
fn energy_gradient_check_passes() {
    let tmp = TempDir::new().unwrap();
    let out_dir = tmp.path().join("run");
    let config = write_config(tmp.path(), "[grid]\nsizes = [12, 12]\n[energy]\npairs = 4\n");
    let out = g2flow(&["energy", "--config", &config, "--out", out_dir.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let summary: serde_json::Value =
        serde_json::from_slice(&fs::read(out_dir.join("gradient_check.json")).unwrap()).unwrap();
    assert!(summary["max_relative_error"].as_f64().unwrap() <= 1e-4);
    assert!(summary["min_observed_order"].as_f64().unwrap() > 1.8);
    let rows = fs::read_to_string(out_dir.join("gradient_check.csv")).unwrap();
    assert_eq!(rows.lines().count(), 1 + 4 * 3);
}

#[test]
fn spectrum_on_constant_background_has_seven_dimensional_kernel() {
    let tmp = TempDir::new().unwrap();
    let out_dir = tmp.path().join("run");
    let config = write_config(tmp.path(), "[grid]\nsizes = [8, 8]\n[spectrum]\ncount = 10\n");
    let out = g2flow(&["spectrum", "--config", &config, "--out", out_dir.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value =
        serde_json::from_slice(&fs::read(out_dir.join("spectrum.json")).unwrap()).unwrap();
    assert_eq!(report["kernel_full"], 7);
    assert_eq!(report["kernel_laplacian"], 7);
    assert_eq!(report["obstruction_dimension"], 0);
    let csv = fs::read_to_string(out_dir.join("eigenvalues.csv")).unwrap();
    assert_eq!(csv.lines().count(), 11);
}

#[test]
fn spectrum_refuses_non_critical_background() {
    let tmp = TempDir::new().unwrap();
    let config = write_config(
        tmp.path(),
        "[grid]\nsizes = [8, 8]\n[background]\nname = \"twisted\"\n\
         w = { name = \"fourier_mode\", amplitude = 0.3, axis = 1, direction = 2 }\n",
    );
    let out = g2flow(&["spectrum", "--config", &config, "--out", tmp.path().join("r").to_str().unwrap()]);
    assert_eq!(code(&out), 2);
}

#[test]
fn symbol_sampling_has_no_violations() {
    let tmp = TempDir::new().unwrap();
    let out_dir = tmp.path().join("run");
    let config = write_config(tmp.path(), "[symbol]\nsamples = 2000\nmax_u = 0.9\n");
    let out = g2flow(&["symbol", "--config", &config, "--out", out_dir.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value =
        serde_json::from_slice(&fs::read(out_dir.join("symbol.json")).unwrap()).unwrap();
    assert_eq!(report["sampling"]["violations_additive"], 0);
    for order in report["discrete_orders"].as_array().unwrap() {
        assert!(order.as_f64().unwrap() > 1.9);
    }
}

#[test]
fn dump_tables_prints_json() {
    let out = g2flow(&["dump-tables"]);
    assert_eq!(code(&out), 0);
    let tables: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(tables["phi_terms"].as_array().unwrap().len(), 7);
    assert_eq!(tables["gamma"].as_array().unwrap().len(), 7);
}
