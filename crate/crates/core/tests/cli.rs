use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use dualmesh::field::weights::save_weights;
use dualmesh::field::{Activation, Encoding, Layer, MlpField};
use dualmesh::io::read_mesh;

fn dualmesh(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dualmesh")).args(args).output().unwrap()
}

fn ok(out: &Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn failed(out: &Output) -> String {
    assert_eq!(out.status.code(), Some(1));
    String::from_utf8(out.stderr.clone()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn report(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn softplus(in_dim: usize, out_dim: usize, weights: Vec<f32>, bias: Vec<f32>) -> Layer {
    Layer {
        in_dim,
        out_dim,
        weights,
        bias,
        activation: Activation::SoftPlus { beta: 1000.0 },
    }
}

/// Hand-built network for the distance to the crossing planes `z = 0.1` and
/// `x = 0.13`: the first layer forms both absolute values, the second passes
/// one through and takes `relu(a - b)`, and the output is `a - relu(a - b)`.
/// Like a trained network it never reaches zero.
fn crossed_planes(dir: &Path) -> PathBuf {
    let layers = vec![
        softplus(
            3,
            4,
            vec![0., 0., 1., 0., 0., -1., 1., 0., 0., -1., 0., 0.],
            vec![-0.1, 0.1, -0.13, 0.13],
        ),
        softplus(4, 3, vec![1., 1., 0., 0., -1., -1., 0., 0., 1., 1., -1., -1.], vec![0.; 3]),
        softplus(3, 1, vec![1., -1., -1.], vec![0.]),
    ];
    let field = MlpField::new(Encoding::Identity, layers, [-1., -1., -1., 1., 1., 1.]).unwrap();
    let path = dir.join("crossed.udfw");
    save_weights(&field, &path).unwrap();
    path
}

#[test]
fn sphere_extraction_writes_a_closed_mesh_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s.obj");
    let stdout = ok(&dualmesh(&["extract", "--field", "analytic:sphere:0.5", "--max-depth", "7", "--out", s(&out)]));
    assert!(stdout.contains("0 boundary edges"));
    let r = report(&out.with_extension("json"));
    assert_eq!(r["schema_version"], 1);
    assert_eq!(r["boundary_edges"], 0);
    assert_eq!(r["resolution"], 128);
    let mesh = read_mesh(&out).unwrap();
    assert_eq!(r["triangles"], mesh.triangles.len() as u64);
    assert!(mesh.boundary_edges().is_empty());
}

#[test]
fn manifold_flag_on_a_network_field_caps_edge_degree() {
    let dir = tempfile::tempdir().unwrap();
    let weights = crossed_planes(dir.path());
    let field = format!("mlp:{}", s(&weights));
    let raw = dir.path().join("raw.obj");
    let fixed = dir.path().join("fixed.obj");
    ok(&dualmesh(&["extract", "--field", &field, "--max-depth", "6", "--out", s(&raw)]));
    ok(&dualmesh(&["extract", "--field", &field, "--max-depth", "6", "--manifold", "--out", s(&fixed)]));
    assert!(read_mesh(&raw).unwrap().max_edge_degree() > 2);
    let mesh = read_mesh(&fixed).unwrap();
    assert!(!mesh.triangles.is_empty());
    assert!(mesh.max_edge_degree() <= 2);
    assert_eq!(report(&fixed.with_extension("json"))["max_edge_degree"], 2);
}

#[test]
fn missing_weights_file_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nowhere.udfw");
    let out = dir.path().join("m.obj");
    let err = failed(&dualmesh(&["extract", "--field", &format!("mlp:{}", s(&missing)), "--out", s(&out)]));
    assert!(err.contains(s(&missing)), "{err}");
    assert!(!out.exists());
}

#[test]
fn unknown_field_scheme_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let err = failed(&dualmesh(&["extract", "--field", "voxels:a.bin", "--out", s(&dir.path().join("a.obj"))]));
    assert!(err.contains("unknown field scheme"), "{err}");
}

#[test]
fn failed_run_removes_partial_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("p.ply");
    let bad = dir.path().join("missing_dir").join("leaves.jsonl");
    let args = ["extract", "--field", "analytic:sphere:0.5", "--max-depth", "4", "--out", s(&out), "--dump-leaves", s(&bad)];
    let err = failed(&dualmesh(&args));
    assert!(err.contains("leaves.jsonl"), "{err}");
    assert!(!out.exists());
    assert!(!out.with_extension("json").exists());
}

#[test]
fn output_does_not_depend_on_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let run = |threads: &str| {
        let out = dir.path().join(format!("t{threads}.obj"));
        let field = "noisy:7:analytic:torus:0.5:0.2";
        ok(&dualmesh(&["--threads", threads, "extract", "--field", field, "--max-depth", "6", "--manifold", "--out", s(&out)]));
        (std::fs::read(&out).unwrap(), std::fs::read(out.with_extension("json")).unwrap())
    };
    let one = run("1");
    assert_eq!(one, run("3"));
    assert_eq!(one, run("8"));
}

#[test]
fn eval_of_a_file_against_itself_is_perfect() {
    let dir = tempfile::tempdir().unwrap();
    let mesh = dir.path().join("ball.ply");
    ok(&dualmesh(&["shape", "sphere", "--out", s(&mesh), "--detail", "24"]));
    let stdout = ok(&dualmesh(&["eval", s(&mesh), s(&mesh), "--format", "json", "--samples", "5000"]));
    let r: serde_json::Value = serde_json::from_str(stdout.trim()).unwrap();
    // zero up to rounding in the point-triangle projection
    assert!(r["chamfer"].as_f64().unwrap() < 1e-24, "{r}");
    assert!(r["hausdorff"].as_f64().unwrap() < 1e-12, "{r}");
    assert_eq!(r["f_score"], 100.0);
}

#[test]
fn box_extraction_is_within_two_cells_of_the_box() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("box.obj");
    let reference = dir.path().join("ref.obj");
    ok(&dualmesh(&["extract", "--field", "analytic:box:0.5", "--max-depth", "6", "--out", s(&out)]));
    ok(&dualmesh(&["shape", "box", "--radius", "0.5", "--out", s(&reference)]));
    let stdout = ok(&dualmesh(&["eval", s(&out), s(&reference), "--format", "json"]));
    let r: serde_json::Value = serde_json::from_str(stdout.trim()).unwrap();
    let h = 2.0 / 64.0;
    assert!(r["hausdorff"].as_f64().unwrap() <= 2.0 * h, "{r}");
}

#[test]
fn eval_of_a_missing_file_fails() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("absent.obj");
    let err = failed(&dualmesh(&["eval", s(&missing), s(&missing)]));
    assert!(err.contains("absent.obj"), "{err}");
}

fn csv_rows(text: &str) -> Vec<Vec<f64>> {
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("x,y,z,d,gx,gy,gz"));
    lines.map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect()
}

#[test]
fn probe_prints_one_row_per_point() {
    let dir = tempfile::tempdir().unwrap();
    let points = dir.path().join("p.txt");
    std::fs::write(&points, "1 0 0\n").unwrap();
    let rows = csv_rows(&ok(&dualmesh(&["probe", "--field", "analytic:sphere:0.5", "--points", s(&points)])));
    assert_eq!(rows, vec![vec![1.0, 0.0, 0.0, 0.5, 1.0, 0.0, 0.0]]);
}

fn lattice(path: &Path, n: usize) {
    let mut text = String::new();
    for i in 0..n * n * n {
        let t = |k: usize| -1.0 + 2.0 * k as f64 / (n - 1) as f64;
        text += &format!("{},{},{}\n", t(i % n), t(i / n % n), t(i / (n * n)));
    }
    std::fs::write(path, text).unwrap();
}

#[test]
fn network_distances_stay_positive_on_a_lattice() {
    let dir = tempfile::tempdir().unwrap();
    let weights = crossed_planes(dir.path());
    let points = dir.path().join("grid.csv");
    lattice(&points, 10);
    let csv = dir.path().join("probe.csv");
    ok(&dualmesh(&["probe", "--field", &format!("mlp:{}", s(&weights)), "--points", s(&points), "--out", s(&csv)]));
    let rows = csv_rows(&std::fs::read_to_string(&csv).unwrap());
    assert_eq!(rows.len(), 1000);
    assert!(rows.iter().all(|r| r[3] > 0.0));
}

#[test]
fn perturbed_field_errors_concentrate_near_the_surface() {
    let dir = tempfile::tempdir().unwrap();
    let sheet = dir.path().join("sheet.obj");
    ok(&dualmesh(&["shape", "disk", "--radius", "0.9", "--out", s(&sheet)]));
    let points = dir.path().join("grid.csv");
    let n = 41;
    let mut text = String::new();
    for i in 0..n * n {
        for z in [-0.3, -0.05, -0.01, -0.003, 0.0, 0.002, 0.008, 0.04, 0.2] {
            let t = |k: usize| -0.6 + 1.2 * k as f64 / (n - 1) as f64;
            text += &format!("{} {} {z}\n", t(i % n), t(i / n));
        }
    }
    std::fs::write(&points, text).unwrap();
    let probe = |field: String| csv_rows(&ok(&dualmesh(&["probe", "--field", &field, "--points", s(&points)])));
    let truth = probe(format!("mesh:{}", s(&sheet)));
    let noisy = probe(format!("noisy:2:mesh:{}", s(&sheet)));
    let (mut near, mut far) = (Vec::new(), Vec::new());
    for (t, n) in truth.iter().zip(&noisy) {
        let err = (t[3] - n[3]).abs();
        if t[3] < 0.005 {
            near.push(err);
        } else if t[3] > 0.02 {
            far.push(err);
        }
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    assert!(mean(&near) > 100.0 * mean(&far), "near {} far {}", mean(&near), mean(&far));
}
