use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use multizip::catalog;
use multizip::specfile::SystemSpec;

fn multizip(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_multizip")).args(args).output().unwrap()
}

fn multizip_env(args: &[&str], key: &str, value: &str) -> Output {
    Command::new(env!("CARGO_BIN_EXE_multizip")).args(args).env(key, value).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn write_spec(dir: &Path, name: &str, spec: &SystemSpec) -> PathBuf {
    let path = dir.join(format!("{name}.json"));
    std::fs::write(&path, spec.to_json()).unwrap();
    path
}

fn json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn dimension_reports_closed_forms() {
    let dir = tempfile::tempdir().unwrap();
    for (spec, expected) in
        [(catalog::koch(), 4f64.ln() / 3f64.ln()), (catalog::segment(), 1.0), (catalog::levy(), 2.0)]
    {
        let path = write_spec(dir.path(), "s", &spec);
        let out = multizip(&["--format", "json", "dimension", path.to_str().unwrap()]);
        assert_eq!(code(&out), 0);
        let report = json(&out);
        assert!((report["results"]["s1"].as_f64().unwrap() - expected).abs() < 1e-9);
        let lower = report["results"]["collatz_wielandt_b1"]["lower"].as_f64().unwrap();
        assert!(lower > 0.0);
    }
}

#[test]
fn koch_svg_depth_five_has_1025_points() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(dir.path(), "koch", &catalog::koch());
    let svg = dir.path().join("koch.svg");
    let out = multizip(&["render", spec.to_str().unwrap(), "--depth", "5", "--out", svg.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    let text = std::fs::read_to_string(&svg).unwrap();
    let points = text.split("points=\"").nth(1).unwrap().split('"').next().unwrap();
    assert_eq!(points.split_whitespace().count(), 1025);
    assert!(text.contains("viewBox"));
}

#[test]
fn segment_csv_depth_three_has_nine_rows_on_the_axis() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(dir.path(), "segment", &catalog::segment());
    let csv = dir.path().join("segment.csv");
    let out = multizip(&["render", spec.to_str().unwrap(), "--depth", "3", "--out", csv.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("address,x1,x2"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 9);
    assert!(rows.iter().all(|r| r.ends_with(",0")));
    assert!(rows[1].starts_with("I1.I1.I1,"));
}

#[test]
fn depth_one_render_is_the_node_chain() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(dir.path(), "koch", &catalog::koch());
    let csv = dir.path().join("koch.csv");
    multizip(&["render", spec.to_str().unwrap(), "--depth", "1", "--out", csv.to_str().unwrap()]);
    let text = std::fs::read_to_string(&csv).unwrap();
    let xs: Vec<f64> = text.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    let expected = [0.0, 1.0 / 3.0, 0.5, 2.0 / 3.0, 1.0];
    assert_eq!(xs.len(), expected.len());
    assert!(xs.iter().zip(expected).all(|(x, e)| (x - e).abs() < 1e-12));
}

#[test]
fn bare_system_renders_attractor_points() {
    let dir = tempfile::tempdir().unwrap();
    let mut spec = catalog::koch();
    spec.nodes = None;
    spec.assignment = None;
    let path = write_spec(dir.path(), "bare", &spec);
    let svg = dir.path().join("bare.svg");
    let out = multizip(&[
        "--format",
        "json",
        "render",
        path.to_str().unwrap(),
        "--depth",
        "3",
        "--out",
        svg.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    assert_eq!(json(&out)["results"]["points"], 64);
    assert_eq!(std::fs::read_to_string(&svg).unwrap().matches("<circle").count(), 64);
}

#[test]
fn svg_needs_a_planar_system() {
    let dir = tempfile::tempdir().unwrap();
    let text = r#"{
        "version": "multizip/1",
        "dimension": 1,
        "vertices": ["I"],
        "edges": [
            {"from": "I", "to": "I", "ratio": 0.5, "orthogonal": [[1.0]], "translation": [0.0]},
            {"from": "I", "to": "I", "ratio": 0.5, "orthogonal": [[1.0]], "translation": [0.5]}
        ],
        "nodes": {"I": [[0.0], [0.5], [1.0]]}
    }"#;
    let spec = dir.path().join("line.json");
    std::fs::write(&spec, text).unwrap();
    let svg = dir.path().join("line.svg");
    assert_eq!(code(&multizip(&["render", spec.to_str().unwrap(), "--out", svg.to_str().unwrap()])), 4);
    let csv = dir.path().join("line.csv");
    assert_eq!(code(&multizip(&["render", spec.to_str().unwrap(), "--depth", "2", "--out", csv.to_str().unwrap()])), 0);
    assert_eq!(std::fs::read_to_string(&csv).unwrap().lines().next(), Some("address,x1"));
}

#[test]
fn verify_passes_on_catalog_and_reports_the_koch_witness() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(dir.path(), "koch", &catalog::koch());
    let out = multizip(&["--format", "json", "verify", spec.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    let witness = json(&out)["results"]["segment_verdict"]["evidence"]["witness"].as_f64().unwrap();
    assert!((witness - 4.0 / 3.0).abs() < 1e-12);
    let spec = write_spec(dir.path(), "segment", &catalog::segment());
    assert_eq!(code(&multizip(&["verify", spec.to_str().unwrap()])), 0);
}

#[test]
fn broken_gap_fails_mz1_with_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let mut spec = catalog::segment();
    spec.nodes.as_mut().unwrap().get_mut("I").unwrap()[1] = vec![1.5, 0.0];
    let path = write_spec(dir.path(), "broken", &spec);
    let out = multizip(&["--format", "json", "verify", path.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    let report = json(&out);
    assert_eq!(report["results"]["axioms"]["mz1"], false);
    assert_eq!(report["status"], "FAIL");
    let detail = report["verdicts"][0]["detail"].as_str().unwrap();
    assert!(detail.contains("MZ1"), "{detail}");
}

#[test]
fn koch_projection_is_rejected_with_the_rotation() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(dir.path(), "koch", &catalog::koch());
    for normal in ["0,1", "1,0", "1,1"] {
        let out = multizip(&["--format", "json", "project", spec.to_str().unwrap(), "--normal", normal]);
        assert_eq!(code(&out), 2);
        let detail = json(&out)["verdicts"][0]["detail"].as_str().unwrap().to_string();
        assert!(detail.contains("orthogonal part"), "{detail}");
    }
}

#[test]
fn reflectzip_projects_with_its_ratios() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(dir.path(), "reflectzip", &catalog::reflectzip());
    let quotient = dir.path().join("quotient.json");
    let out = multizip(&[
        "--format",
        "json",
        "project",
        spec.to_str().unwrap(),
        "--normal",
        "0,2",
        "--out",
        quotient.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    assert!(json(&out)["results"]["residual"].as_f64().unwrap() < 1e-12);
    let projected = SystemSpec::from_json(&std::fs::read_to_string(&quotient).unwrap()).unwrap();
    assert_eq!(projected.dimension, 1);
    let ratios: Vec<f64> = projected.edges.iter().map(|e| e.ratio).collect();
    let original: Vec<f64> = catalog::reflectzip().edges.iter().map(|e| e.ratio).collect();
    assert_eq!(ratios, original);
}

#[test]
fn degenerate_segment_projection_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(dir.path(), "segment", &catalog::segment());
    let out = multizip(&["project", spec.to_str().unwrap(), "--normal", "0,1"]);
    assert_eq!(code(&out), 2);
    let out = multizip(&["project", spec.to_str().unwrap(), "--normal", "1,0"]);
    assert_eq!(code(&out), 0);
}

#[test]
fn scan_counts_monotone_directions() {
    let dir = tempfile::tempdir().unwrap();
    let koch = write_spec(dir.path(), "koch", &catalog::koch());
    let out = multizip(&["--format", "json", "scan", koch.to_str().unwrap(), "--grid", "720"]);
    assert_eq!(code(&out), 0);
    let report = json(&out);
    assert_eq!(report["results"]["monotone_directions"], 0);
    assert_eq!(report["results"]["nowhere_dense"], true);
    let segment = write_spec(dir.path(), "segment", &catalog::segment());
    let out = multizip(&["--format", "json", "scan", segment.to_str().unwrap(), "--grid", "720"]);
    assert_eq!(json(&out)["results"]["monotone_directions"], 718);
    let levy = write_spec(dir.path(), "levy", &catalog::levy());
    let out = multizip(&["--format", "json", "scan", levy.to_str().unwrap(), "--grid", "720"]);
    assert_eq!(json(&out)["results"]["monotone_directions"], 0);
}

#[test]
fn catalog_writes_seven_loadable_specs() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("cat");
    let out = multizip(&["--format", "json", "catalog", "--out", out_dir.to_str().unwrap(), "--cesaro-apex", "60"]);
    assert_eq!(code(&out), 0);
    assert_eq!(json(&out)["results"]["count"], 7);
    let files: Vec<_> = std::fs::read_dir(&out_dir).unwrap().collect();
    assert_eq!(files.len(), 7);
    for f in files {
        let text = std::fs::read_to_string(f.unwrap().path()).unwrap();
        assert!(SystemSpec::from_json(&text).unwrap().load().unwrap().zipper.unwrap().validate().passed());
    }
    let two = SystemSpec::from_json(&std::fs::read_to_string(out_dir.join("two_vertex.json")).unwrap()).unwrap();
    assert!((two.load().unwrap().system.similarity_dimension().unwrap().s1 - 1.0).abs() < 1e-10);
}

#[test]
fn parse_and_usage_errors_exit_four() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\n  \"version\": \"multizip/1\",\n  oops\n}").unwrap();
    let out = multizip(&["dimension", bad.to_str().unwrap()]);
    assert_eq!(code(&out), 4);
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));
    assert_eq!(code(&multizip(&["dimension", dir.path().join("missing.json").to_str().unwrap()])), 4);
    assert_eq!(code(&multizip(&["frobnicate"])), 4);
    assert_eq!(code(&multizip(&["--help"])), 0);
    let spec = write_spec(dir.path(), "koch", &catalog::koch());
    assert_eq!(code(&multizip(&["project", spec.to_str().unwrap(), "--normal", "1,x"])), 4);
}

#[test]
fn invalid_field_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let mut spec = catalog::koch();
    spec.edges[0].ratio = 1.5;
    let path = write_spec(dir.path(), "expanding", &spec);
    let out = multizip(&["dimension", path.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("edges[0].ratio"));
}

#[test]
fn thread_count_comes_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(dir.path(), "koch", &catalog::koch());
    let one =
        multizip_env(&["--format", "json", "scan", spec.to_str().unwrap(), "--depth", "4"], "MULTIZIP_THREADS", "1");
    let two =
        multizip_env(&["--format", "json", "scan", spec.to_str().unwrap(), "--depth", "4"], "MULTIZIP_THREADS", "2");
    assert_eq!(code(&one), 0);
    assert_eq!(one.stdout, two.stdout);
    assert_eq!(code(&multizip_env(&["dimension", spec.to_str().unwrap()], "MULTIZIP_THREADS", "zero")), 4);
}
