use std::collections::BTreeMap;

use ncbf_core::condition::Problem;
use ncbf_core::dynamics::builtin_system;
use ncbf_core::mesh::triangulate_box;
use ncbf_core::network::Network;
use ncbf_core::verifier::{
    read_mesh_json, verify, verify_batch, write_mesh_csv, write_mesh_json, SimplexStatus, Status, VerdictReport,
    VerifierConfig,
};

fn fixture(name: &str) -> Network {
    Network::load(format!("{}/tests/fixtures/{name}", env!("CARGO_MANIFEST_DIR"))).unwrap()
}

fn contraction() -> ncbf_core::dynamics::DynamicsModel {
    builtin_system("contraction1d", &BTreeMap::new()).unwrap()
}

#[test]
fn bump_barrier_is_certified() {
    let model = contraction();
    let safe = model.system().default_safe_set();
    let r = verify(&fixture("bump_1d.json"), &model, &safe, &VerifierConfig::default()).unwrap();
    assert_eq!(r.status, Status::Valid, "{:?}", r.per_simplex.iter().filter(|s| s.status != SimplexStatus::Certified).collect::<Vec<_>>());
    assert_eq!(r.certified_fraction, 1.0);
    let vol: f64 = r.per_simplex.iter().map(|s| s.volume).sum();
    assert!((vol - 4.0).abs() < 1e-9);
}

#[test]
fn constant_positive_is_falsified() {
    let model = contraction();
    let safe = model.system().default_safe_set();
    let net = fixture("constant_positive_1d.json");
    let r = verify(&net, &model, &safe, &VerifierConfig::default()).unwrap();
    assert_eq!(r.status, Status::Invalid);
    let c = &r.counterexamples[0];
    assert!(c.evidence.value >= 0.0 && !safe.contains(&c.evidence.point));
    assert!(net.value(&c.evidence.point).unwrap() >= 0.0);
}

#[test]
fn exhaustive_mode_collects_every_counterexample_region() {
    let model = contraction();
    let safe = model.system().default_safe_set();
    let cfg = VerifierConfig { exhaustive: true, max_depth: 6, ..Default::default() };
    let r = verify(&fixture("constant_positive_1d.json"), &model, &safe, &cfg).unwrap();
    assert_eq!(r.status, Status::Invalid);
    assert!(r.counterexamples.len() >= 2);
    assert!(r.per_simplex.iter().all(|s| s.status != SimplexStatus::Unprocessed));
}

#[test]
fn batch_matches_sequential_and_empty_batch() {
    let model = builtin_system("darboux", &BTreeMap::new()).unwrap();
    let safe = model.system().default_safe_set();
    let net = Network::from_json_str(
        r#"{"input_dim":2,"layers":[
            {"rows":3,"cols":2,"weight":[[1.0,-0.5],[0.3,0.8],[-0.7,0.2]],"bias":[0.1,-0.2,0.3],"activation":"tanh"},
            {"rows":1,"cols":3,"weight":[[0.6,-0.4,0.9]],"bias":[0.05],"activation":"identity"}]}"#,
    )
    .unwrap();
    let p = Problem::new(&net, &model, &safe).unwrap();
    let cells = triangulate_box(&safe.state_box, Some(&[4, 4])).unwrap();
    let batch = verify_batch(&p, &cells).unwrap();
    for (s, d) in cells.iter().zip(&batch) {
        assert_eq!(verify_batch(&p, std::slice::from_ref(s)).unwrap()[0], *d);
    }
    assert!(verify_batch(&p, &[]).unwrap().is_empty());
}

#[test]
fn reports_and_meshes_roundtrip() {
    let model = contraction();
    let safe = model.system().default_safe_set();
    let r = verify(&fixture("bump_1d.json"), &model, &safe, &VerifierConfig::default()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let rp = dir.path().join("report.json");
    r.save(&rp).unwrap();
    assert_eq!(VerdictReport::load(&rp).unwrap(), r);
    let mp = dir.path().join("mesh.json");
    write_mesh_json(&mp, &r.per_simplex).unwrap();
    assert_eq!(read_mesh_json(&mp).unwrap(), r.per_simplex);
    let mut buf = Vec::new();
    write_mesh_csv(&mut buf, &r.per_simplex).unwrap();
    let mut rd = csv::Reader::from_reader(buf.as_slice());
    let headers = rd.headers().unwrap().clone();
    assert_eq!(&headers[0], "id");
    assert_eq!(headers.len(), 6 + 2);
    assert_eq!(rd.records().count(), r.per_simplex.len());
}

#[test]
fn config_validation() {
    let model = contraction();
    let safe = model.system().default_safe_set();
    let net = fixture("bump_1d.json");
    for cfg in [
        VerifierConfig { eta: 1.5, ..Default::default() },
        VerifierConfig { alpha: 0.0, ..Default::default() },
        VerifierConfig { batch_size: 0, ..Default::default() },
    ] {
        assert!(verify(&net, &model, &safe, &cfg).is_err());
    }
    let darboux = builtin_system("darboux", &BTreeMap::new()).unwrap();
    assert!(verify(&net, &darboux, &darboux.system().default_safe_set(), &VerifierConfig::default()).is_err());
}
