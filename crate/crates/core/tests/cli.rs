use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn ddr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ddr")).args(args).output().unwrap()
}

fn ddr_env(args: &[&str], key: &str, value: &str) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ddr")).args(args).env(key, value).output().unwrap()
}

fn report(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn mesh_counts() {
    let dir = tempfile::tempdir().unwrap();
    for (name, counts) in [("cube", "vertices 8 edges 12 faces 6 elements 1"), ("ring", "vertices 32 edges 64 faces 40 elements 8")] {
        let out_path = dir.path().join(format!("{name}.json"));
        let out = ddr(&["mesh", "--builtin", name, "--out", path_str(&out_path)]);
        assert_eq!(out.status.code(), Some(0));
        assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), counts);
        let mesh = ddr_core::mesh::Mesh::load(&std::fs::read_to_string(&out_path).unwrap()).unwrap();
        assert_eq!(mesh.num_vertices(), if name == "cube" { 8 } else { 32 });
    }
}

#[test]
fn disconnected_pattern_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.txt");
    std::fs::write(&bad, "3 1 1\n#.#\n").unwrap();
    let out = ddr(&["mesh", "--pattern", path_str(&bad)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("disconnected occupancy"));
}

#[test]
fn input_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.json");
    let cases: Vec<Vec<&str>> = vec![
        vec!["verify", "--builtin", "torus"],
        vec!["verify", "--builtin", "cube", "--degree", "5"],
        vec!["verify", "--builtin", "cube", "--checks", "complex,bogus"],
        vec!["verify", "--builtin", "cube", "--rank-tol", "-1"],
        vec!["verify", "--mesh", path_str(&missing)],
        vec!["verify"],
        vec!["verify", "--builtin", "cube", "--mesh", path_str(&missing)],
    ];
    for args in cases {
        assert_eq!(ddr(&args).status.code(), Some(2), "{args:?}");
    }
    let out = ddr_env(&["verify", "--builtin", "cube", "--checks", "complex"], "DDR_THREADS", "0");
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn verify_cube_passes_with_all_families() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("r.json");
    let out = ddr(&["verify", "--builtin", "cube", "--degree", "1", "--out", path_str(&out_path)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = report(&out_path);
    assert_eq!(r["passed"], true);
    let mut families: Vec<String> = r["checks"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| c["name"].as_str().unwrap().split('/').next().unwrap().to_string())
        .collect();
    families.dedup();
    assert_eq!(families.len(), 7, "{families:?}");
    for key in ["mesh", "degree", "dims", "ranks", "betti_cw", "cohomology_ddr", "checks"] {
        assert!(r.get(key).is_some(), "missing {key}");
    }
    for key in ["name", "passed", "residual", "tolerance", "seconds"] {
        assert!(r["checks"][0].get(key).is_some(), "missing {key}");
    }
}

#[test]
fn verify_selection() {
    let out = ddr(&["verify", "--builtin", "ring", "--degree", "2", "--checks", "complex,cochain,cohomology"]);
    assert_eq!(out.status.code(), Some(0));
    let out = ddr(&["verify", "--builtin", "ring", "--degree", "1", "--checks", "complex"]);
    assert_eq!(out.status.code(), Some(0));
    let r: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(r["checks"].as_array().unwrap().iter().all(|c| c["name"].as_str().unwrap().starts_with("complex/")));
    assert!(r.get("cohomology_ddr").is_none());
}

#[test]
fn cohomology_reports() {
    let out = ddr(&["cohomology", "--builtin", "ring", "--degree", "1"]);
    assert_eq!(out.status.code(), Some(0));
    let r: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(r["cohomology_ddr"], serde_json::json!([0, 1, 0, 0]));
    assert_eq!(r["betti_cw"], serde_json::json!([1, 1, 0, 0]));

    let out = ddr(&["cohomology", "--builtin", "cube", "--degree", "2"]);
    assert_eq!(out.status.code(), Some(0));
    let r: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(r["cohomology_ddr"], serde_json::json!([0, 0, 0, 0]));
}

#[test]
fn cavity_generator_export() {
    let dir = tempfile::tempdir().unwrap();
    let vtk = dir.path().join("out.vtk");
    let json = dir.path().join("r.json");
    let out = ddr(&["cohomology", "--builtin", "cavity", "--degree", "0", "--generators", path_str(&vtk), "--out", path_str(&json)]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&json);
    let gens = r["generators"].as_array().unwrap();
    let h2: Vec<&Value> = gens.iter().filter(|g| g["index"] == 2).collect();
    assert_eq!(h2.len(), 1);
    assert_eq!(h2[0]["vectors"].as_array().unwrap().len(), 1);
    let text = std::fs::read_to_string(&vtk).unwrap();
    assert!(text.starts_with("# vtk DataFile Version"));
    assert_eq!(text.matches("VECTORS ").count(), 1);
    assert!(text.contains("VECTORS H2_generator_0 double"));
    assert!(text.contains("CELL_DATA 26"));
}

#[test]
fn reports_are_reproducible() {
    let run = |threads: &str| {
        let out = ddr_env(&["verify", "--builtin", "ring", "--degree", "1", "--seed", "7", "--no-timestamp"], "DDR_THREADS", threads);
        assert_eq!(out.status.code(), Some(0));
        out.stdout
    };
    let a = run("1");
    assert_eq!(a, run("1"));
    assert_eq!(a, run("3"));
    assert!(!String::from_utf8_lossy(&a).contains("generated_at"));
}

#[test]
fn corrupted_mesh_names_the_failing_check() {
    let dir = tempfile::tempdir().unwrap();
    let mesh = ddr_core::mesh::builtin_pattern("ring").unwrap().build_mesh(1.0).unwrap();
    let mut doc = ddr_core::mesh::MeshDocument::from_mesh(&mesh);
    doc.faults.push(ddr_core::mesh::Fault::FlipElementFace { element: 3, face: mesh.elements[3].faces[0] });
    let path = dir.path().join("corrupt.json");
    std::fs::write(&path, doc.to_json()).unwrap();
    let report_path = dir.path().join("r.json");
    let out = ddr(&["verify", "--mesh", path_str(&path), "--degree", "0", "--out", path_str(&report_path)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("FAILED cochain/de_rham/div"));
    // The report is written even when checks fail.
    assert_eq!(report(&report_path)["passed"], false);
}
