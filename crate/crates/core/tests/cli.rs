use std::path::Path;
use std::process::{Command, Output};

use tdbem::cli::StudyConfig;
use tdbem::geometry::Mesh;

fn tdbem(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tdbem")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, json: &str) -> String {
    let p = dir.join("cfg.json");
    std::fs::write(&p, json).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn mesh_subcommand_writes_a_readable_mesh() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("disc.json");
    let o = tdbem(&["mesh", "--screen", "disc", "--levels", "3", "--beta", "1.5", "-o", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let mesh = Mesh::from_json(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert!(mesh.num_triangles() > 0);
    assert_eq!(mesh.levels, 3);
}

#[test]
fn defaults_parse_back() {
    let o = tdbem(&["defaults"]);
    assert!(o.status.success());
    let cfg = StudyConfig::from_json(&String::from_utf8(o.stdout).unwrap()).unwrap();
    assert_eq!(cfg, StudyConfig::default());
}

#[test]
fn bad_input_gives_config_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"beta": 0.5}"#);
    assert_eq!(tdbem(&["solve", "-c", &cfg]).status.code(), Some(2));
    let cfg = write_config(dir.path(), r#"{"no_such_key": 1}"#);
    assert_eq!(tdbem(&["solve", "-c", &cfg]).status.code(), Some(2));
    assert_eq!(tdbem(&["study", "nonsense"]).status.code(), Some(2));
}

#[test]
fn solve_evaluate_and_study_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = write_config(
        dir.path(),
        &format!(
            r#"{{"study_id": "pipe", "levels": [1, 2, 3], "dt": 0.1, "t_end": 1.0,
                "probes": [[0.0, 0.0, 0.5], [1.5, 0.0, 0.2]], "output_dir": {:?}}}"#,
            out.to_str().unwrap()
        ),
    );
    let o = tdbem(&["solve", "-c", &cfg]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let density = out.join("pipe_single_layer_b2_N3_dt0.1.density.csv");
    assert!(density.exists());
    assert!(out.join("pipe_single_layer_b2_N3_dt0.1.density.json").exists());

    let o = tdbem(&["evaluate", "-c", &cfg, "--density", density.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let probe = std::fs::read_to_string(out.join("pipe_single_layer_b2_N3_dt0.1.probe.csv")).unwrap();
    // hash comment, header, two points at t = 0..=1
    assert_eq!(probe.lines().count(), 2 + 2 * 11);

    // a density from another mesh is refused
    let o = tdbem(&["evaluate", "-c", &cfg, "--levels", "2", "--density", density.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));

    let o = tdbem(&["study", "convergence", "-c", &cfg]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("pipe_convergence.json")).unwrap()).unwrap();
    assert_eq!(report["rows"].as_array().unwrap().len(), 2);
    assert!(report["config_hash"].is_string());
    let rows = &report["rows"];
    let energy = |i: usize| rows[i]["values"]["energy"].as_f64().unwrap();
    assert!(energy(1) < energy(0), "energy error grows: {} -> {}", energy(0), energy(1));
    assert!(out.join("pipe_convergence.csv").exists());
}
