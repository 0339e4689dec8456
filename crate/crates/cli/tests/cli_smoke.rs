//! End-to-end CLI runs through the compiled binary.

use std::fs;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_pathslice"))
}

#[test]
fn converge_subcommand_with_config_and_out_dir() {
    let dir = std::env::temp_dir().join("pathslice_cli_smoke");
    let _ = fs::remove_dir_all(&dir);
    let cfg = serde_json::json!({
        "potential": {"label": "harmonic"},
        "grid": {"n": 512, "l_box": 9.0},
        "hbar_list": [1.0],
        "p_list": [2.0],
        "orders": [0],
        "time": {"s": 0.0, "t": 1.0},
        "subdivision": {"kind": "uniform", "l_list": [1, 2, 4, 8]},
        "test_family": {"hermites": 1, "shifts": [], "modulations": []},
        "guard": {"aperture": 5.0, "margin": 6.0}
    });
    let cfg_path = dir.join("cfg.json");
    fs::create_dir_all(&dir).unwrap();
    fs::write(&cfg_path, cfg.to_string()).unwrap();

    let output = bin()
        .args([
            "converge",
            "--config",
            cfg_path.to_str().unwrap(),
            "--out",
            dir.join("out").to_str().unwrap(),
            "--threads",
            "2",
        ])
        .output()
        .expect("binary runs");
    assert!(
        output.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&output.stderr)
    );
    let summary: serde_json::Value = serde_json::from_slice(
        &fs::read(dir.join("out").join("converge_summary.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(summary["pass"], serde_json::Value::Bool(true));
    let csv = fs::read_to_string(dir.join("out").join("converge_errors.csv")).unwrap();
    assert!(csv.starts_with("potential,order,p,hbar,l,omega,max_error,worst_function"));
    // harmonic N=0: first-order slope must have been fitted
    let slope = summary["fits"][0]["fit"]["slope"].as_f64().unwrap();
    assert!((slope - 1.0).abs() < 0.3, "slope {slope}");
}

#[test]
fn table_dump_writes_the_documented_columns() {
    let dir = std::env::temp_dir().join("pathslice_cli_tdump");
    let _ = fs::remove_dir_all(&dir);
    let output = bin()
        .args([
            "table-dump",
            "--tau",
            "0.3",
            "--radius",
            "4.0",
            "--count",
            "17",
            "--out",
            dir.to_str().unwrap(),
        ])
        .output()
        .expect("binary runs");
    assert!(
        output.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&output.stderr)
    );
    let csv = fs::read_to_string(dir.join("table_dump.csv")).unwrap();
    assert!(csv.starts_with("x,y,S,Sxx,Sxy,Syy,converged"));
    assert_eq!(csv.lines().count(), 1 + 17 * 17);
}

#[test]
fn flow_dump_streams_to_stdout_without_out_dir() {
    let output = bin()
        .args(["flow-dump", "--tau", "0.4", "--radius", "2.0", "--count", "5"])
        .output()
        .expect("binary runs");
    assert!(output.status.success());
    let text = String::from_utf8_lossy(&output.stdout);
    assert!(text.starts_with("y,eta,x,xi"));
    assert_eq!(text.lines().count(), 1 + 25);
}

#[test]
fn bad_config_exits_nonzero() {
    let dir = std::env::temp_dir().join("pathslice_cli_bad");
    fs::create_dir_all(&dir).unwrap();
    let cfg_path = dir.join("bad.json");
    fs::write(&cfg_path, "{\"potential\": {\"label\": \"coulomb\"}}").unwrap();
    let output = bin()
        .args(["converge", "--config", cfg_path.to_str().unwrap()])
        .output()
        .expect("binary runs");
    assert!(!output.status.success());
}
