use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_trapped"))
}

fn example(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("examples").join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn json_out(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&o.stdout)))
}

fn json_err(o: &Output) -> Value {
    serde_json::from_slice(&o.stderr).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&o.stderr)))
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("scene.toml");
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn clifford_torus_passes() {
    let cfg = example("clifford.toml");
    let o = run(&["run", "--config", cfg.to_str().unwrap(), "--json"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = json_out(&o);
    assert_eq!(r["schema"], 1);
    assert_eq!(r["passed"], true);
    for key in ["max_metric_defect", "max_Hnull", "max_Hnu", "max_2ff_defect", "spacelike_min_eig"] {
        assert!(r.get(key).is_some(), "missing {key}");
    }
    assert!(r["max_Hnu"].as_f64().unwrap() <= 1e-5);
    assert!(r["spacelike_min_eig"].as_f64().unwrap() > 0.0);
}

#[test]
fn sphere_slice_at_matching_height_passes() {
    let cfg = example("sphere_slice.toml");
    let o = run(&["run", "--config", cfg.to_str().unwrap(), "--json"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(json_out(&o)["slice_defect"].as_f64().unwrap(), 0.0);
}

#[test]
fn sphere_slice_at_wrong_height_fails_with_code_2() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(example("sphere_slice.toml")).unwrap();
    let cfg = write_config(dir.path(), &text.replace("t = \"-ln(2)\"", "t = 0"));
    let o = run(&["run", "--config", cfg.to_str().unwrap(), "--json"]);
    assert_eq!(o.status.code(), Some(2));
    let r = json_out(&o);
    assert_eq!(r["passed"], false);
    assert!((r["max_Hnu"].as_f64().unwrap() - 0.5).abs() < 1e-6);
}

#[test]
fn bad_config_is_a_json_error_with_code_1() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[spaceform]\nc = 3\nn = 2\n[warp]\nw = \"1\"\n[mode]\nkind = \"mt\"\n");
    let o = run(&["run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(json_err(&o)["error"]["kind"], "config");

    let o = run(&["run", "--config", dir.path().join("missing.toml").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(json_err(&o)["error"]["message"].as_str().unwrap().contains("missing.toml"));

    let o = run(&["run"]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(json_err(&o)["error"]["kind"], "usage");
}

#[test]
fn geometry_errors_exit_1() {
    // the only bracket of a hyperplane in flat space is inadmissible
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "[spaceform]\nc = 0\nn = 2\n[warp]\nw = \"1\"\n[chart]\nfamily = \"hyperplane\"\npoints_per_axis = 5\n[mode]\nkind = \"mt\"\n",
    );
    let o = run(&["run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(json_err(&o)["error"]["message"].is_string());
}

#[test]
fn branch_override_out_of_range() {
    let cfg = example("clifford.toml");
    let o = run(&["run", "--config", cfg.to_str().unwrap(), "--branch", "3"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(json_err(&o)["error"]["message"].as_str().unwrap().contains("branch 3"));
}

#[test]
fn run_writes_report_and_canonical_config() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = example("clifford.toml");
    let o = run(&["run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--grid", "9"]);
    assert_eq!(o.status.code(), Some(0));
    let first: Value = serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(first["points_checked"], 49);
    let canonical = std::fs::read_to_string(out.join("config.toml")).unwrap();

    // rerunning the emitted config reproduces the report and the config text
    let out2 = dir.path().join("again");
    let o = run(&["run", "--config", out.join("config.toml").to_str().unwrap(), "--out", out2.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let second: Value = serde_json::from_str(&std::fs::read_to_string(out2.join("report.json")).unwrap()).unwrap();
    assert_eq!(first, second);
    assert_eq!(canonical, std::fs::read_to_string(out2.join("config.toml")).unwrap());
}

#[test]
fn brackets_table() {
    let cfg = example("clifford.toml");
    let o = run(&["brackets", "--config", cfg.to_str().unwrap(), "--json"]);
    assert_eq!(o.status.code(), Some(0));
    let t = json_out(&o);
    assert_eq!(t["q"], 1);
    assert_eq!(t["admissible"], 1);
    let b = &t["brackets"][0];
    assert_eq!(b["reason"], "admissible");
    // the Clifford torus with a = pi/6 sits at tau = (pi/6 + pi/3 ... ) midpoint 5pi/12
    assert!((b["tau"].as_f64().unwrap() - 5.0 * std::f64::consts::PI / 12.0).abs() < 1e-9);
    assert!(b["g_lo"].as_f64().unwrap() * b["g_hi"].as_f64().unwrap() < 0.0);
}

#[test]
fn export_then_verify_replays() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = example("clifford.toml");
    let out = dir.path().to_str().unwrap();
    let o = run(&["export", "--config", cfg.to_str().unwrap(), "--out", out, "--json"]);
    assert_eq!(o.status.code(), Some(0));
    let w = json_out(&o);
    assert_eq!(w["mesh"]["faces"], 2 * 12 * 12);
    let csv = dir.path().join("immersion.csv");
    let o = run(&[
        "verify", "--config", cfg.to_str().unwrap(), "--immersion", csv.to_str().unwrap(), "--seed", "7", "--json",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    let v = json_out(&o);
    assert_eq!(v["probes"]["seed"], 7);
    assert_eq!(v["replay"]["passed"], true);

    // a different scene does not replay
    let text = std::fs::read_to_string(&cfg).unwrap().replace("pi/6", "pi/5");
    let other = write_config(dir.path(), &text);
    let o = run(&["verify", "--config", other.to_str().unwrap(), "--immersion", csv.to_str().unwrap(), "--json"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(json_out(&o)["replay"]["passed"], false);
}

#[test]
fn curve_and_de_sitter_modes() {
    for name in ["curve.toml", "desitter.toml"] {
        let cfg = example(name);
        let o = run(&["run", "--config", cfg.to_str().unwrap(), "--json"]);
        assert_eq!(o.status.code(), Some(0), "{name}: {}", String::from_utf8_lossy(&o.stdout));
    }
    let r = json_out(&run(&["run", "--config", example("desitter.toml").to_str().unwrap(), "--json"]));
    assert!(r["details"]["isometry_defect"].as_f64().unwrap() < 1e-8);
    assert!(r["max_2ff_defect"].as_f64().unwrap() <= 1e-7);
}

#[test]
fn null2ff_umbilic_with_height() {
    // static flat space: Omega vanishes, so any height over a hyperplane works
    let dir = tempfile::tempdir().unwrap();
    let base = "[spaceform]\nc = 0\nn = 2\n[warp]\nw = \"1\"\n[chart]\npoints_per_axis = 9\n[mode]\nkind = \"null2ff\"\n";
    let cfg = write_config(dir.path(), &format!("{base}tau = \"0.2*u1 + 0.1*u2^2\"\n"));
    let o = run(&["run", "--config", cfg.to_str().unwrap(), "--json"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    let r = json_out(&o);
    assert_eq!(r["details"]["recipe"]["recipe"], "umbilic");
    assert!(r["max_2ff_defect"].as_f64().unwrap() <= 1e-7);

    // w = cosh t has non-constant Omega in flat space: a height is refused
    let cfg = write_config(dir.path(), &format!("{base}tau = \"0.2*u1\"\n").replace("\"1\"", "\"cosh(t)\""));
    let o = run(&["run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}
