//! Black-box tests of the command-line binary: exit codes, output
//! formats, determinism, and consistency between subcommands.

use std::path::Path;
use std::process::{Command, Output};

fn dmpa(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dmpa"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn steady_ground_state() {
    let out = dmpa(&["steady", "--chi", "0", "--mu", "0", "--n", "0"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("V_X  = 5.000000000000e-1"), "{text}");
    assert!(text.contains("V_Y  = 5.000000000000e-1"), "{text}");
    assert!(text.contains("C    = 0.000000000000e0"), "{text}");
}

#[test]
fn steady_unstable_exit_code() {
    let out = dmpa(&["steady", "--chi", "50", "--delta", "49", "--mu", "0.1"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("unstable: chi^2 >= delta^2 + gamma^2"), "{err}");
}

#[test]
fn usage_error_exit_code() {
    let out = dmpa(&["steady", "--no-such-flag"]);
    assert_eq!(out.status.code(), Some(1));
    let out = dmpa(&["no-such-command"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn invalid_params_exit_code() {
    let out = dmpa(&["steady", "--eta", "2.0"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn steady_json_is_machine_readable() {
    let out = dmpa(&[
        "steady", "--chi", "2", "--delta", "2.5", "--mu", "0.5", "--json",
    ]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert!(v["cov"]["v_x"].as_f64().unwrap() > 0.0);
    assert!(v["stable"].as_bool().unwrap());
    assert_eq!(v["params"]["chi"].as_f64().unwrap(), 2.0);
}

#[test]
fn optimize_matches_exact_no_measurement_answer() {
    let out = dmpa(&["optimize", "--chi", "5", "--json"]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    let delta_opt = v["delta_opt"].as_f64().unwrap();
    assert!((delta_opt - 6.0).abs() < 1e-5 * 6.0, "delta_opt = {delta_opt}");
}

#[test]
fn simulate_is_deterministic_for_fixed_seed() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for path in [&a, &b] {
        let out = dmpa(&[
            "simulate", "--chi", "2", "--delta", "2.5", "--mu", "0.5",
            "--t-final", "1.0", "--seed", "42",
            "--out", path.to_str().unwrap(),
        ]);
        assert!(out.status.success());
    }
    let bytes_a = std::fs::read(&a).unwrap();
    let bytes_b = std::fs::read(&b).unwrap();
    assert!(!bytes_a.is_empty());
    assert_eq!(bytes_a, bytes_b);
}

#[test]
fn sweep_degenerate_grid_matches_steady() {
    let dir = tempfile::tempdir().unwrap();
    let spec_path = dir.path().join("spec.json");
    std::fs::write(
        &spec_path,
        r#"{
            "axis1": {"param": "mu", "grid": {"kind": "values", "values": [0.5]}},
            "axis2": {"param": "n", "grid": {"kind": "values", "values": [1.0]}},
            "fixed": {"gamma": 1.0, "chi": 2.0, "delta": 2.5,
                      "theta": 0.7853981633974483, "mu": 0.0, "eta": 1.0,
                      "n_thermal": 0.0},
            "objective": "vx_at_given_delta"
        }"#,
    )
    .unwrap();
    let out_base = dir.path().join("sweep");
    let out = dmpa(&[
        "sweep",
        spec_path.to_str().unwrap(),
        "--out",
        out_base.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_base.with_extension("json")).unwrap())
            .unwrap();
    let swept_vx = json["rows"][0]["v_x"].as_f64().unwrap();

    let steady = dmpa(&[
        "steady", "--chi", "2", "--delta", "2.5", "--mu", "0.5", "--n", "1", "--json",
    ]);
    let sv: serde_json::Value = serde_json::from_str(&stdout(&steady)).unwrap();
    assert_eq!(swept_vx, sv["cov"]["v_x"].as_f64().unwrap());
}

#[test]
fn sweep_rejects_bad_spec() {
    let dir = tempfile::tempdir().unwrap();
    let spec_path = dir.path().join("bad.json");
    std::fs::write(&spec_path, "{\"axis1\": 3}").unwrap();
    let out = dmpa(&["sweep", spec_path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn fig3_panel_b_matches_equivalent_sweep_bitwise() {
    // the back-action-evading panel is cheap (closed form on the grid)
    let dir = tempfile::tempdir().unwrap();
    let csv_path = dir.path().join("panel_b.csv");
    let out = dmpa(&[
        "fig3",
        "--panel",
        "b",
        "--out",
        csv_path.to_str().unwrap(),
        "--json",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(csv_path.with_extension("json")).unwrap())
            .unwrap();
    let rows = json["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 3600);

    // same grid through the generic sweep engine
    let spec = serde_json::to_string(&dmpa::figures::map_panel_spec(
        dmpa::figures::MapPanel::B,
    ))
    .unwrap();
    let spec_path = dir.path().join("spec.json");
    std::fs::write(&spec_path, spec).unwrap();
    let out_base = dir.path().join("sweep");
    let out = dmpa(&[
        "sweep",
        spec_path.to_str().unwrap(),
        "--out",
        out_base.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let sweep_json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_base.with_extension("json")).unwrap())
            .unwrap();
    assert_eq!(json["rows"], sweep_json["rows"]);
    assert!(csv_has_header(&csv_path));
}

fn csv_has_header(path: &Path) -> bool {
    let text = std::fs::read_to_string(path).unwrap();
    text.lines()
        .any(|l| !l.starts_with('#') && l.starts_with("mu,"))
}
