use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use seamcut::mesh::{load_obj, parse_obj, save_obj};
use seamcut::shapes::{cross_cube, grid, tube, uv_sphere};
use seamcut::{SeamFile, TriMesh};
use serde_json::Value;

fn seamcut(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_seamcut")).args(args).output().expect("spawn seamcut")
}

fn ok(args: &[&str]) -> Output {
    let out = seamcut(args);
    assert!(out.status.success(), "seamcut {args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn code(args: &[&str]) -> Option<i32> {
    seamcut(args).status.code()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn write_mesh(dir: &Path, name: &str, mesh: &TriMesh) -> PathBuf {
    let path = dir.join(name);
    save_obj(mesh, &path).unwrap();
    path
}

fn write_seams(path: &Path, mesh: &TriMesh, edges: &[seamcut::EdgeKey]) {
    let v = mesh.vertices();
    let file = SeamFile { normalized: false, segments: edges.iter().map(|e| [v[e.a()], v[e.b()]]).collect() };
    file.save(path).unwrap();
}

#[test]
fn extract_reports_the_cube_net() {
    let dir = tempfile::tempdir().unwrap();
    let obj = write_mesh(dir.path(), "cube.obj", &cross_cube());
    ok(&["extract", p(&obj), "--validate", "--seed", "3"]);
    let rep = json(&dir.path().join("cube.extract.json"));
    assert_eq!(rep["command"], "extract");
    assert_eq!(rep["seed"], 3);
    assert_eq!(rep["counts"]["seam_edges"], 7);
    assert_eq!(rep["counts"]["islands"], 1);
    assert_eq!(rep["metrics"]["validation"]["overlapping_pairs"].as_array().map(Vec::len), Some(0));
    let seams = SeamFile::load(dir.path().join("cube.seams.json")).unwrap();
    assert!(seams.normalized);
    assert_eq!(seams.segments.len(), 7);
    assert!(dir.path().join("cube.islands.json").exists());
}

#[test]
fn extract_without_uvs_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let obj = write_mesh(dir.path(), "bare.obj", &cross_cube().without_uvs());
    assert_eq!(code(&["extract", p(&obj)]), Some(2));
    assert_eq!(code(&["extract", p(&dir.path().join("missing.obj"))]), Some(2));
}

#[test]
fn unwrap_cylinder_along_a_line() {
    let dir = tempfile::tempdir().unwrap();
    let (mesh, line) = tube(24, 8, 1.0, 2.0);
    let obj = write_mesh(dir.path(), "tube.obj", &mesh);
    write_seams(&dir.path().join("tube.seams.json"), &mesh, &line);
    ok(&["unwrap", p(&obj)]);
    let rep = json(&dir.path().join("tube.unwrap.json"));
    assert_eq!(rep["counts"]["charts"], 1);
    assert_eq!(rep["counts"]["seam_edges"], line.len());
    assert!(rep["metrics"]["mean_energy"].as_f64().unwrap() <= 0.05);
    let names: Vec<&str> = rep["stages"].as_array().unwrap().iter().map(|s| s["name"].as_str().unwrap()).collect();
    assert_eq!(names, ["load", "cut", "flatten", "write"]);
    let text = std::fs::read_to_string(dir.path().join("tube.unwrapped.obj")).unwrap();
    let (out, warnings) = parse_obj(&text).unwrap();
    assert!(warnings.is_empty());
    assert_eq!(out.face_count(), mesh.face_count());
    assert_eq!(out.vertex_count(), mesh.vertex_count() + line.len() + 1);
    let uv = out.uv_corners().unwrap();
    assert!(uv.iter().flatten().all(|c| (0.0..=1.0).contains(c)));
}

#[test]
fn closed_sphere_needs_repair() {
    let dir = tempfile::tempdir().unwrap();
    let obj = write_mesh(dir.path(), "ball.obj", &uv_sphere(12, 6, 1.0));
    std::fs::write(dir.path().join("ball.seams.json"), r#"{"normalized": true, "segments": []}"#).unwrap();
    assert_eq!(code(&["unwrap", p(&obj)]), Some(3));
    let failed = json(&dir.path().join("ball.unwrap.json"));
    assert_eq!(failed["metrics"]["non_disk_charts"][0]["euler"], 2);
    ok(&["unwrap", p(&obj), "--repair"]);
    let rep = json(&dir.path().join("ball.unwrap.json"));
    assert!(rep["counts"]["repair_edges"].as_u64().unwrap() > 0);
    assert!(rep["metrics"]["mean_energy"].as_f64().unwrap().is_finite());
    assert!(load_obj(dir.path().join("ball.unwrapped.obj")).unwrap().uv_corners().is_some());
}

#[test]
fn segment_snaps_labels_to_patches() {
    let dir = tempfile::tempdir().unwrap();
    let mesh = grid(4, 2, 2.0, 1.0);
    let obj = write_mesh(dir.path(), "strip.obj", &mesh);
    // Vertical cut at x = 1 splits the strip into two 4-face-wide halves.
    let cut: Vec<seamcut::EdgeKey> = (0..2).map(|j| seamcut::EdgeKey::new(j * 5 + 2, (j + 1) * 5 + 2)).collect();
    write_seams(&dir.path().join("strip.seams.json"), &mesh, &cut);
    let centroid_x = |f: usize| mesh.faces()[f].iter().map(|&v| mesh.vertices()[v][0]).sum::<f64>() / 3.0;
    let mut labels: Vec<u32> = (0..mesh.face_count()).map(|f| u32::from(centroid_x(f) > 1.0)).collect();
    labels[0] = 1;
    let path = dir.path().join("strip.labels.json");
    std::fs::write(&path, serde_json::json!({ "labels": labels }).to_string()).unwrap();
    ok(&["segment", p(&obj)]);
    let refined = json(&dir.path().join("strip.refined_labels.json"));
    let got: Vec<u64> = refined["labels"].as_array().unwrap().iter().map(|v| v.as_u64().unwrap()).collect();
    let expected: Vec<u64> = (0..mesh.face_count()).map(|f| u64::from(centroid_x(f) > 1.0)).collect();
    assert_eq!(got, expected);
    let rep = json(&dir.path().join("strip.segment.json"));
    assert_eq!(rep["counts"]["patches"], 2);
    assert_eq!(rep["counts"]["relabeled_faces"], 1);
    assert!(rep["metrics"]["cleanliness_refined"].as_f64() >= rep["metrics"]["cleanliness_raw"].as_f64());

    std::fs::write(&path, r#"{"labels": [0, 1]}"#).unwrap();
    assert_eq!(code(&["segment", p(&obj)]), Some(2));
    std::fs::remove_file(&path).unwrap();
    assert_eq!(code(&["segment", p(&obj)]), Some(2));
}

#[test]
fn train_generate_and_eval_small_model() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    ok(&["synth", "--count", "3", "--out", p(&data), "--seed", "2"]);
    let manifest = json(&data.join("manifest.json"));
    assert_eq!(manifest.as_array().unwrap().len(), 3);
    let ckpt = dir.path().join("small.ckpt");
    let train = [
        "train",
        p(&data),
        "--out",
        p(&ckpt),
        "--preset",
        "toy",
        "--width",
        "16",
        "--steps",
        "3",
        "--batch-size",
        "2",
        "--budget",
        "64",
        "--log-every",
        "0",
    ];
    ok(&train);
    let csv = std::fs::read_to_string(dir.path().join("small.loss.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "step,ce_loss,kl_loss");
    assert_eq!(lines.len(), 4);
    let rep = json(&dir.path().join("small.train.json"));
    assert_eq!(rep["counts"]["examples"], 3);
    assert_eq!(rep["counts"]["steps"], 3);

    let mesh = data.join("shape_0000.obj");
    let out_a = dir.path().join("a.seams.json");
    let out_b = dir.path().join("b.seams.json");
    let gen = |out: &Path, report: &Path| {
        ok(&[
            "generate",
            p(&mesh),
            "--checkpoint",
            p(&ckpt),
            "--seed",
            "4",
            "--temperature",
            "1",
            "--max-segments",
            "8",
            "--out",
            p(out),
            "--report",
            p(report),
        ])
    };
    gen(&out_a, &dir.path().join("a.json"));
    gen(&out_b, &dir.path().join("b.json"));
    assert_eq!(std::fs::read(&out_a).unwrap(), std::fs::read(&out_b).unwrap());
    let g = json(&dir.path().join("a.json"));
    assert!(g["counts"]["emitted_segments"].as_u64().unwrap() <= 8);
    assert!(!g["warnings"].to_string().contains("advisory"));

    let report = dir.path().join("wide.json");
    ok(&[
        "generate",
        p(&mesh),
        "--checkpoint",
        p(&ckpt),
        "--ratio",
        "0.5",
        "--max-segments",
        "4",
        "--report",
        p(&report),
    ]);
    assert!(json(&report)["warnings"][0].as_str().unwrap().contains("advisory"));
    assert_eq!(code(&["generate", p(&mesh), "--checkpoint", p(&ckpt), "--paper-scale"]), Some(2));
    assert_eq!(code(&["generate", p(&mesh), "--checkpoint", p(&ckpt), "--bins", "512"]), Some(2));
    assert_eq!(code(&["generate", p(&mesh), "--checkpoint", p(&ckpt), "--ratio", "1.5"]), Some(2));

    ok(&["eval", p(&data), "--checkpoint", p(&ckpt), "--limit", "2", "--max-segments", "8"]);
    let csv = std::fs::read_to_string(data.join("eval.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
    assert!(data.join("eval").join("shape_0001.unwrapped.obj").exists());

    let resumed = dir.path().join("resumed.ckpt");
    let mut again = train.to_vec();
    again[3] = p(&resumed);
    again[9] = "6";
    again.extend(["--resume", p(&ckpt)]);
    ok(&again);
    assert_eq!(json(&dir.path().join("resumed.train.json"))["counts"]["steps"], 6);
}
