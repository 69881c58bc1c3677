use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ncbf_core::network::Network;
use ncbf_core::verifier::{read_mesh_json, Status, VerdictReport};
use tempfile::TempDir;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures").join(name)
}

fn ncbf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ncbf"))
        .args(args)
        .env_remove("CBF_VERIFY_WORKERS")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn verify_valid_bump_exits_zero_and_writes_outputs() {
    let dir = TempDir::new().unwrap();
    let report = dir.path().join("report.json");
    let mesh = dir.path().join("mesh.csv");
    let net = fixture("bump_1d.json");
    let o = ncbf(&["verify", "--system", "contraction1d", "--network", s(&net), "--out", s(&report), "--mesh-out", s(&mesh)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("status: Valid"));
    let r = VerdictReport::load(&report).unwrap();
    assert_eq!(r.status, Status::Valid);
    assert_eq!(r.certified_fraction, 1.0);
    let csv = std::fs::read_to_string(&mesh).unwrap();
    assert_eq!(csv.lines().count(), r.per_simplex.len() + 1);
}

#[test]
fn verify_invalid_candidate_exits_one_with_counterexample() {
    let dir = TempDir::new().unwrap();
    let report = dir.path().join("report.json");
    let net = fixture("constant_positive_1d.json");
    let o = ncbf(&["verify", "--system", "contraction1d", "--network", s(&net), "--out", s(&report)]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    assert!(stdout(&o).contains("counterexample"));
    let r = VerdictReport::load(&report).unwrap();
    assert_eq!(r.status, Status::Invalid);
    assert!(!r.counterexamples.is_empty());
}

#[test]
fn verify_budget_exhaustion_exits_two() {
    let net = fixture("darboux_16x16.json");
    let o = ncbf(&["verify", "--system", "darboux", "--network", s(&net), "--max-depth", "3"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stdout(&o).contains("status: Inconclusive"));
}

#[test]
fn missing_network_names_the_path() {
    let o = ncbf(&["verify", "--system", "darboux", "--network", "/nonexistent/net.json"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("/nonexistent/net.json"), "{}", stderr(&o));
}

#[test]
fn usage_errors_exit_three() {
    assert_eq!(ncbf(&["verify", "--bogus"]).status.code(), Some(3));
    assert_eq!(ncbf(&["--help"]).status.code(), Some(0));
    let net = fixture("bump_1d.json");
    let o = ncbf(&["verify", "--system", "nope", "--network", s(&net)]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("nope"));
}

fn random_network(dir: &Path, input: usize) -> PathBuf {
    let out = dir.join(format!("rand{input}.json"));
    let o = ncbf(&["random-network", "--input-dim", &input.to_string(), "--hidden", "4,3", "--seed", "5", "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    out
}

#[test]
fn random_network_loads_with_requested_shape() {
    let dir = TempDir::new().unwrap();
    let path = random_network(dir.path(), 3);
    let net = Network::load(&path).unwrap();
    assert_eq!(net.input_dim(), 3);
    let widths: Vec<usize> = net.layers().iter().map(|l| l.out_dim()).collect();
    assert_eq!(widths, vec![4, 3, 1]);
    // same seed, same file
    let again = random_network(dir.path(), 3);
    assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&again).unwrap());
}

#[test]
fn check_point_reports_control2d_origin() {
    let dir = TempDir::new().unwrap();
    let net = random_network(dir.path(), 2);
    let o = ncbf(&["check-point", "--system", "control2d", "--network", s(&net), "--point", "0,0"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    let field = |name: &str| -> serde_json::Value {
        let line = out.lines().find_map(|l| l.strip_prefix(&format!("{name} = "))).unwrap();
        serde_json::from_str(line).unwrap()
    };
    let f: Vec<f64> = serde_json::from_value(field("f")).unwrap();
    let g: Vec<Vec<f64>> = serde_json::from_value(field("g")).unwrap();
    assert_eq!(f, vec![0.0, 0.0]);
    assert_eq!(g, vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
}

#[test]
fn check_point_outside_box_fails() {
    let dir = TempDir::new().unwrap();
    let net = random_network(dir.path(), 2);
    let o = ncbf(&["check-point", "--system", "control2d", "--network", s(&net), "--point", "100,0"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn toml_config_drives_verify() {
    let dir = TempDir::new().unwrap();
    std::fs::copy(fixture("bump_1d.json"), dir.path().join("bump.json")).unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "system = \"contraction1d\"\nnetwork = \"bump.json\"\nmax_depth = 20\nbatch_size = 4\n").unwrap();
    let report = dir.path().join("r.json");
    let o = ncbf(&["verify", "--config", s(&cfg), "--out", s(&report)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let r = VerdictReport::load(&report).unwrap();
    assert_eq!((r.config.max_depth, r.config.batch_size), (20, 4));

    std::fs::write(&cfg, "system = \"contraction1d\"\nnetwork = \"bump.json\"\nmax_dept = 20\n").unwrap();
    assert_eq!(ncbf(&["verify", "--config", s(&cfg)]).status.code(), Some(3));
}

#[test]
fn workers_from_environment_are_recorded() {
    let dir = TempDir::new().unwrap();
    let report = dir.path().join("r.json");
    let net = fixture("bump_1d.json");
    let o = Command::new(env!("CARGO_BIN_EXE_ncbf"))
        .args(["verify", "--system", "contraction1d", "--network", s(&net), "--out", s(&report)])
        .env("CBF_VERIFY_WORKERS", "2")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(VerdictReport::load(&report).unwrap().config.worker_count, 2);
}

#[test]
fn export_mesh_round_trips_records() {
    let dir = TempDir::new().unwrap();
    let report = dir.path().join("r.json");
    let net = fixture("bump_1d.json");
    assert_eq!(ncbf(&["verify", "--system", "contraction1d", "--network", s(&net), "--out", s(&report)]).status.code(), Some(0));
    let mesh = dir.path().join("mesh.json");
    let o = ncbf(&["export-mesh", "--report", s(&report), "--out", s(&mesh)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(read_mesh_json(&mesh).unwrap(), VerdictReport::load(&report).unwrap().per_simplex);
}

#[test]
fn info_lists_systems_and_describes_them() {
    let o = ncbf(&["info"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("cartpole"));
    let net = fixture("darboux_16x16.json");
    let o = ncbf(&["info", "--system", "cartpole", "--network", s(&net)]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(out.contains("state dim: 4, control dim: 1"), "{out}");
    assert!(out.contains("network: input 2"), "{out}");
}

#[test]
fn cartpole_params_are_validated() {
    let dir = TempDir::new().unwrap();
    let net = random_network(dir.path(), 4);
    let o = ncbf(&["verify", "--system", "cartpole", "--network", s(&net), "--param", "m_c=-1", "--max-depth", "0"]);
    assert_eq!(o.status.code(), Some(3));
    let o = ncbf(&["verify", "--system", "cartpole", "--network", s(&net), "--param", "m_c=2", "--max-depth", "0"]);
    assert!(matches!(o.status.code(), Some(1) | Some(2)), "{}", stderr(&o));
}

#[test]
fn check_point_confirms_reported_counterexample() {
    let dir = TempDir::new().unwrap();
    let report = dir.path().join("r.json");
    let net = fixture("constant_positive_1d.json");
    assert_eq!(ncbf(&["verify", "--system", "contraction1d", "--network", s(&net), "--out", s(&report)]).status.code(), Some(1));
    let r = VerdictReport::load(&report).unwrap();
    let x = format!("{}", r.counterexamples[0].evidence.point[0]);
    let o = ncbf(&["check-point", "--system", "contraction1d", "--network", s(&net), "--point", &x]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("B(x) = 1.0"), "{out}");
    assert!(out.contains("violation: UnsafeNonnegative") || out.contains("violation: InvarianceViolated"), "{out}");
}
