use std::path::Path;
use std::process::{Command, Output};

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cracklab"))
        .args(args)
        .arg("--out")
        .arg(dir.join("out"))
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join("out").join(name)).unwrap()
}

fn summary_value(dir: &Path, key: &str) -> f64 {
    read(dir, "summary.csv")
        .lines()
        .find_map(|l| l.strip_prefix(&format!("{key},")).map(|v| v.parse().unwrap()))
        .unwrap_or_else(|| panic!("no {key} in summary"))
}

const AFFINE: &str = r#"
p = 3.0
resolution = 8

[geometry]
domain = [0.0, 0.0, 1.0, 1.0]
dirichlet = [[[0.0, 0.0], [0.0, 1.0]], [[1.0, 0.0], [1.0, 1.0]]]

[boundary]
affine = [0.0, 1.0, 0.0]
"#;

#[test]
fn affine_solve_reports_exact_energy() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "affine.toml", AFFINE);
    let out = run(dir.path(), &["solve", "--config", &cfg]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!((summary_value(dir.path(), "energy") - 1.0 / 3.0).abs() < 1e-8);
    let u = read(dir.path(), "u.csv");
    assert!(u.starts_with("x,y,dof_id,side,value\n"));
    assert_eq!(u.lines().count() - 1, 81);
    let report = read(dir.path(), "report.txt");
    assert!(report.contains("energy: "));
}

#[test]
fn affine_dual_has_tiny_gap() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "affine.toml", AFFINE);
    let out = run(dir.path(), &["dual", "--config", &cfg]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(summary_value(dir.path(), "gap").abs() <= 1e-10);
    assert!(read(dir.path(), "components.csv").starts_with("component_id,value\n"));
    assert!(read(dir.path(), "v.csv").starts_with("x,y,edge_id,component,value\n"));
}

#[test]
fn example_member_dump_has_one_row_per_dof() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "ex.toml", "p = 2.0\nresolution = 16\n[geometry]\nexample = \"ex5_1\"\nh = 4\n");
    let out = run(dir.path(), &["solve", "--config", &cfg]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let dofs = summary_value(dir.path(), "dofs") as usize;
    assert_eq!(read(dir.path(), "u.csv").lines().count() - 1, dofs);
}

#[test]
fn missing_exponent_is_a_line_anchored_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.toml", "resolution = 8\n[geometry]\nexample = \"ex5_1\"\n");
    let out = run(dir.path(), &["solve", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("bad.toml:1:") && err.contains("`p`"), "{err}");

    let cfg = write(dir.path(), "bad2.toml", "p = 3.0\n[geometry]\nexample = \"ex9\"\n");
    let out = run(dir.path(), &["solve", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bad2.toml:3:"));
}

#[test]
fn non_convergence_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "slow.toml", &format!("{AFFINE}\n").replace("p = 3.0", "p = 3.0\nmax_iter = 1"));
    let out = run(dir.path(), &["solve", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn annulus_refuses_path_integration() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "ann.toml",
        "p = 2.0\nresolution = 8\nconjugate_from_primal = true\n[geometry]\nexample = \"ex5_5\"\n",
    );
    let out = run(dir.path(), &["dual", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("domain not simply connected"));
}

#[test]
fn hausdorff_of_identical_files_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    let a = write(dir.path(), "a.toml", "polylines = [[[-1.0, 0.0], [1.0, 0.0]]]\n");
    let out = run(dir.path(), &["hausdorff", &a, &a]);
    assert!(out.status.success());
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "0");
    let empty = write(dir.path(), "e.toml", "polylines = []\n");
    let out = run(dir.path(), &["hausdorff", &a, &empty]);
    let d: f64 = String::from_utf8_lossy(&out.stdout).trim().parse().unwrap();
    assert!((d - 8f64.sqrt()).abs() < 1e-12);
}

#[test]
fn capacity_table_has_one_row_per_resolution() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "cap.toml",
        "r = 2.0\nresolutions = [16, 32]\n[set]\nkind = \"disk\"\ncenter = [0.0, 0.0]\nradius = 0.25\n",
    );
    let out = run(dir.path(), &["capacity", "--config", &cfg]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = read(dir.path(), "capacity.csv");
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows[0], "resolution,delta,estimate");
    assert_eq!(rows.len(), 3);
    let last: f64 = rows[2].split(',').nth(2).unwrap().parse().unwrap();
    let exact = std::f64::consts::TAU / 4f64.ln();
    assert!((last / exact - 1.0).abs() < 0.15);
}

#[test]
fn gamma_output_is_deterministic() {
    let body = "example = \"ex5_7\"\np = 2.0\nhs = [2, 4]\nresolution = 16\n";
    let mut outputs = Vec::new();
    for _ in 0..2 {
        let dir = tempfile::tempdir().unwrap();
        let cfg = write(dir.path(), "j.toml", body);
        let out = run(dir.path(), &["gamma", "--config", &cfg, "--seed", "3"]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let stdout = String::from_utf8_lossy(&out.stdout).to_string();
        assert!(stdout.contains("verdict: euler_lagrange_max_relative"));
        outputs.push((read(dir.path(), "convergence.csv"), read(dir.path(), "metrics.csv")));
    }
    assert_eq!(outputs[0], outputs[1]);
    assert!(outputs[0].0.starts_with("h,energy_primal,energy_dual,gap,grad_dist,jump,comp_0"));
}

#[test]
fn gamma_rejects_unknown_keys_and_bad_channels() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "g.toml", "example = \"ex5_3\"\nhss = [1]\n");
    let out = run(dir.path(), &["gamma", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("g.toml:2:"));
    let cfg = write(
        dir.path(),
        "c.toml",
        "example = \"ex5_3\"\nc = 0.5\nhs = [4, 8]\nchannels = [[0.01, 0.1], [0.01, 0.05]]\n",
    );
    let out = run(dir.path(), &["gamma", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
}
