use std::path::Path;
use std::process::{Command, Output};

fn sphere_fv(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sphere-fv"))
        .args(args)
        .args(["--out-dir", dir.to_str().unwrap()])
        .output()
        .unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

const ROTATION: &str = r#"{
    "mesh": {"n_phi": 32, "n_theta": 16, "theta_min": 0.15},
    "flux": {"name": "solid_rotation"},
    "numerical_flux": {"kind": "godunov", "safety": 0.9},
    "initial": {"name": "cosine_bell"},
    "T": 6.283185307179586,
    "outputs": {"csv_cadence": 10},
    "reference": "rotation"
}"#;

fn column(csv: &str, name: &str) -> Vec<f64> {
    let mut lines = csv.lines();
    let k = lines.next().unwrap().split(',').position(|c| c == name).unwrap();
    lines.map(|l| l.split(',').nth(k).unwrap().parse().unwrap()).collect()
}

#[test]
fn full_rotation_returns_near_the_start() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "rot.json", ROTATION);
    let out = sphere_fv(&["run", &cfg], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("diag.csv")).unwrap();
    let mass = column(&csv, "mass");
    assert!(mass.iter().all(|m| (m - mass[0]).abs() <= 1e-12 * mass[0]));
    let t = column(&csv, "t");
    assert_eq!(*t.last().unwrap(), std::f64::consts::TAU);
    // smearing, not drift: the error is a fraction of the bell's mass
    let err = *column(&csv, "l1_error").last().unwrap();
    assert!(err > 0.0 && err < 0.6 * mass[0], "{err} {}", mass[0]);
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    let steps = report["summary"]["steps"].as_u64().unwrap();
    let vtk = std::fs::read_to_string(dir.path().join(format!("state_{steps}.vtk"))).unwrap();
    assert!(vtk.starts_with("# vtk DataFile Version"));
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.json", &ROTATION.replace("solid_rotation", "warp"));
    let out = sphere_fv(&["run", &cfg], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("latitude_burgers") && err.contains("potential"), "{err}");

    let cfg = write(dir.path(), "syntax.json", &ROTATION.replace("\"T\":", "\"T\" 1,"));
    let out = sphere_fv(&["run", &cfg], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line"));
}

#[test]
fn oracle_and_check_flux_subcommands() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "burgers.json",
        r#"{"mesh": {"n_phi": 32, "n_theta": 8, "theta_min": 0.2},
            "flux": {"name": "latitude_burgers", "params": {"c0": 1.0, "c1": 0.5}},
            "numerical_flux": {"kind": "engquist_osher", "safety": 0.9},
            "initial": {"name": "band_step"}, "T": 1.0}"#,
    );
    let out = sphere_fv(&["oracle", &cfg], dir.path());
    assert!(out.status.success());
    let rep: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(rep["max_discrepancy"].as_f64().unwrap() <= 1e-12);

    let out = sphere_fv(&["check-flux", &cfg, "--seed", "9"], dir.path());
    assert!(out.status.success());
    let again = sphere_fv(&["check-flux", &cfg, "--seed", "9"], dir.path());
    assert_eq!(out.stdout, again.stdout);
    let rep: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(rep["tvd"][0][1]["verdict"], "compatible");

    let out = sphere_fv(&["mesh-info", &cfg], dir.path());
    assert!(out.status.success());
    assert!(dir.path().join("faces.csv").exists());
}

#[test]
fn converge_subcommand_prints_a_table() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "rot.json", &ROTATION.replace("6.283185307179586", "1.0").replace("32, \"n_theta\": 16", "8, \"n_theta\": 4"));
    let out = sphere_fv(&["converge", &cfg, "--levels", "3"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8_lossy(&out.stdout);
    assert_eq!(text.lines().count(), 5, "{text}");
    assert!(text.contains("fitted order"));
    let out = sphere_fv(&["converge", &cfg, "--levels", "1"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}
