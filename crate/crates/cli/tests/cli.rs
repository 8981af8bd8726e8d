use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn corrdecay(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_corrdecay"))
        .args(args)
        .arg("--out-dir")
        .arg(out)
        .env_remove("CORRDECAY_THREADS")
        .output()
        .expect("binary runs")
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn gamma_writes_full_matrix_and_diagnostic() {
    let dir = tempfile::tempdir().unwrap();
    let out = corrdecay(&["gamma", "--dim", "2", "--n", "10", "--d", "0.4", "--pol", "x"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("gamma.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("i,j,gamma,jcoupling"));
    assert_eq!(lines.count(), 100 * 100);
    assert_eq!(read_json(&dir.path().join("psd.json"))["pass"], Value::Bool(true));
    let manifest = read_json(&dir.path().join("manifest.json"));
    assert_eq!(manifest["config_sha256"].as_str().unwrap().len(), 64);
    assert!(manifest["wall_time_s"].as_f64().is_some());
}

#[test]
fn zero_atoms_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = corrdecay(&["gamma", "--dim", "2", "--n", "0", "--d", "0.4", "--pol", "x"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("n_per_axis"));
}

#[test]
fn repeated_runs_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["gamma", "--dim", "2", "--n", "6", "--d", "0.3", "--pol", "z", "--eta", "0.05", "--binary"];
    assert!(corrdecay(&args, a.path()).status.success());
    assert!(corrdecay(&args, b.path()).status.success());
    for name in ["gamma.csv", "gamma.bin", "psd.json"] {
        assert_eq!(
            std::fs::read(a.path().join(name)).unwrap(),
            std::fs::read(b.path().join(name)).unwrap(),
            "{name}"
        );
    }
    let ha = read_json(&a.path().join("manifest.json"))["config_sha256"].clone();
    let hb = read_json(&b.path().join("manifest.json"))["config_sha256"].clone();
    assert_eq!(ha, hb);
}

#[test]
fn analyze_dicke_surrogate() {
    let dir = tempfile::tempdir().unwrap();
    let out = corrdecay(&["analyze", "--dicke", "8"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let r = read_json(&dir.path().join("analysis.json"));
    assert!((r["exact"]["rstar_exact"].as_f64().unwrap() - 20.0).abs() < 1e-9);
    assert!((r["bounds"]["ub"].as_f64().unwrap() - 92.0).abs() < 1e-9);
    assert!(r["bounds"]["lb_best"].as_f64().unwrap() >= 16.0);
}

#[test]
fn analyze_independent_emitters() {
    let dir = tempfile::tempdir().unwrap();
    assert!(corrdecay(&["analyze", "--independent", "8"], dir.path()).status.success());
    let r = read_json(&dir.path().join("analysis.json"));
    assert!((r["bounds"]["lb_best"].as_f64().unwrap() - 8.0).abs() < 1e-10);
    assert!((r["bounds"]["ub"].as_f64().unwrap() - 8.0).abs() < 1e-10);
}

#[test]
fn analyze_large_array_omits_exact_section() {
    let dir = tempfile::tempdir().unwrap();
    let out = corrdecay(&["analyze", "--dicke", "2000"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let r = read_json(&dir.path().join("analysis.json"));
    assert!(r.get("exact").is_none());
    for key in ["spectral", "bounds", "sdp", "driven"] {
        assert!(r.get(key).is_some(), "{key}");
    }
}

#[test]
fn analyze_reads_a_matrix_file() {
    let dir = tempfile::tempdir().unwrap();
    let g = dir.path().join("g");
    assert!(corrdecay(&["gamma", "--dim", "1", "--n", "6", "--d", "0.25", "--pol", "x"], &g).status.success());
    let a = dir.path().join("a");
    let input = g.join("gamma.csv");
    let out = corrdecay(&["analyze", "--input", input.to_str().unwrap()], &a);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let r = read_json(&a.join("analysis.json"));
    let exact = r["exact"]["rstar_exact"].as_f64().unwrap();
    assert!(r["bounds"]["lb_best"].as_f64().unwrap() <= exact + 1e-9);
    assert!(exact <= r["bounds"]["ub"].as_f64().unwrap() + 1e-9);
}

#[test]
fn scan_fits_a_chain() {
    let dir = tempfile::tempdir().unwrap();
    let out = corrdecay(
        &["scan", "--dim", "1", "--d", "0.4", "--pol", "parallel", "--n-min", "50", "--n-max", "800", "--points", "5"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("scan.csv")).unwrap();
    assert!(csv.starts_with("n_atoms,value,stderr\n"));
    assert_eq!(csv.lines().count(), 6);
    let fit = read_json(&dir.path().join("fit.json"));
    let alpha = fit["alpha"].as_f64().unwrap();
    let ci = fit["alpha_ci"].as_f64().unwrap();
    assert!(alpha.abs() < 0.01 && alpha.abs() <= 3.0 * ci + 1e-3, "{alpha} +- {ci}");
}

#[test]
fn scan_planar_exponent() {
    let dir = tempfile::tempdir().unwrap();
    let out = corrdecay(
        &["scan", "--dim", "2", "--d", "0.4", "--pol", "parallel", "--n-min", "6", "--n-max", "24", "--points", "4"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let alpha = read_json(&dir.path().join("fit.json"))["alpha"].as_f64().unwrap();
    assert!((alpha - 0.25).abs() < 0.1, "{alpha}");
}

#[test]
fn empty_scan_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = corrdecay(&["scan", "--dim", "2", "--d", "0.4", "--pol", "parallel", "--n-values"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let cfg = dir.path().join("scan.json");
    std::fs::write(
        &cfg,
        r#"{"scan":{"dimension":2,"spacing":0.4,"polarization":"parallel","n_values":[]}}"#,
    )
    .unwrap();
    let out = corrdecay(&["scan", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn config_file_rejects_unknown_keys_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, r#"{"lattice":{"dimension":1},"extra":true}"#).unwrap();
    let out = corrdecay(&["gamma", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(2));

    let cfg = dir.path().join("good.json");
    std::fs::write(
        &cfg,
        r#"{"seed":11,"lattice":{"dimension":1,"n_per_axis":4,"spacing":0.3,"polarization":"z"}}"#,
    )
    .unwrap();
    let out_dir = dir.path().join("run");
    let out = corrdecay(&["gamma", "--config", cfg.to_str().unwrap(), "--n", "5"], &out_dir);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(out_dir.join("gamma.csv")).unwrap();
    assert_eq!(csv.lines().count(), 26);
    assert_eq!(read_json(&out_dir.join("manifest.json"))["seed"], 11);
}

#[test]
fn sdp_and_exact_commands() {
    let dir = tempfile::tempdir().unwrap();
    assert!(corrdecay(&["sdp", "--dim", "1", "--n", "10", "--d", "0.3", "--pol", "x"], dir.path()).status.success());
    let s = read_json(&dir.path().join("sdp.json"));
    let value = s["solution"]["value"].as_f64().unwrap();
    assert!(value <= s["certificate"]["cap"].as_f64().unwrap() + 1e-6);
    assert!(s["rounded"]["value"].as_f64().unwrap() <= value + 1e-7 * value.abs().max(1.0));

    let out = corrdecay(&["exact", "--dicke", "6", "--force-lanczos", "--haar-samples", "20"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let e = read_json(&dir.path().join("exact.json"));
    assert!((e["exact"]["rstar_exact"].as_f64().unwrap() - 12.0).abs() < 1e-8);
    assert_eq!(e["exact"]["method"], "lanczos");
    assert_eq!(e["haar"]["samples"], 20);
}

#[test]
fn kspace_command() {
    let dir = tempfile::tempdir().unwrap();
    let out = corrdecay(&["kspace", "--dim", "1", "--d", "0.4", "--pol", "parallel", "--n", "400"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let k = read_json(&dir.path().join("kspace.json"));
    assert!((k["gamma_max_grid"].as_f64().unwrap() - 1.875).abs() < 0.01);
    let csv = std::fs::read_to_string(dir.path().join("kspace.csv")).unwrap();
    assert!(csv.starts_with("k1,rate\n"));
    assert_eq!(csv.lines().count(), 401);
    let out = corrdecay(&["kspace", "--dim", "1", "--d", "0.4", "--pol", "x", "--n", "10"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

fn rydberg_table(dir: &Path) -> String {
    let path = dir.join("transitions.csv");
    std::fs::write(&path, "label,wavelength_um,gamma0_2pi_hz,nbar\n53S-52P,10000,315,0\n").unwrap();
    path.to_str().unwrap().to_owned()
}

#[test]
fn rydberg_gate_array() {
    let dir = tempfile::tempdir().unwrap();
    let table = rydberg_table(dir.path());
    let base = [
        "rydberg", "--table", &table, "--spacing-um", "2", "--c6", "28.8", "--rabi-mhz", "4.6", "--dominant",
        "53S-52P", "--gamma-ind-hz", "3220",
    ];
    let mut args = base.to_vec();
    args.extend(["--n-atoms", "160", "--gamma-max-hz", "176"]);
    assert!(corrdecay(&args, dir.path()).status.success());
    let r = read_json(&dir.path().join("rydberg.json"));
    assert!((r["chi"].as_f64().unwrap() / 7.25e-6 - 1.0).abs() < 0.02);

    let mut args = base.to_vec();
    args.extend(["--n-atoms", "2"]);
    assert!(corrdecay(&args, dir.path()).status.success());
    assert_eq!(read_json(&dir.path().join("rydberg.json"))["gamma_collective"], 0.0);

    let mut args = base.to_vec();
    args.extend(["--n-atoms", "160"]);
    args[8] = "0";
    assert_eq!(corrdecay(&args, dir.path()).status.code(), Some(2));

    let mut args = base.to_vec();
    args.extend(["--n-atoms", "160"]);
    args[10] = "missing";
    assert_eq!(corrdecay(&args, dir.path()).status.code(), Some(2));
}

#[test]
fn indefinite_matrix_fails_validation() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.csv");
    std::fs::write(
        &path,
        "i,j,gamma,jcoupling\n0,0,1,0\n0,1,-1.5,0\n1,0,-1.5,0\n1,1,1,0\n",
    )
    .unwrap();
    let out = corrdecay(&["analyze", "--input", path.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(3));
}
