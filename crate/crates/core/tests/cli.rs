use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use dualmesh::mesh::{primitives, save_mesh, write_labels, MeshFormat};

fn dualmesh(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dualmesh"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write_mesh(dir: &Path, name: &str, mesh: &dualmesh::mesh::Mesh) {
    save_mesh(mesh, &dir.join(name), MeshFormat::Off, None).unwrap();
}

#[test]
fn dualize_tetrahedron() {
    let dir = tempfile::tempdir().unwrap();
    write_mesh(dir.path(), "tet.off", &primitives::tetrahedron());
    let o = dualmesh(&["dualize", "tet.off", "--out", "dual.txt"], dir.path());
    assert!(o.status.success());
    assert_eq!(stdout(&o).trim(), "4 nodes, 3-regular: true");
    let table = fs::read_to_string(dir.path().join("dual.txt")).unwrap();
    assert_eq!(table.lines().count(), 4);
    assert!(!table.contains("-1"));
}

#[test]
fn open_mesh_has_pad_slots() {
    let dir = tempfile::tempdir().unwrap();
    write_mesh(dir.path(), "tri.off", &primitives::single_triangle());
    let o = dualmesh(&["dualize", "tri.off", "--out", "dual.txt"], dir.path());
    assert!(o.status.success());
    assert_eq!(stdout(&o).trim(), "1 nodes, 3-regular: false");
    assert_eq!(fs::read_to_string(dir.path().join("dual.txt")).unwrap().matches("-1").count(), 3);
}

#[test]
fn features_csv_has_header_and_rows() {
    let dir = tempfile::tempdir().unwrap();
    write_mesh(dir.path(), "ico.off", &primitives::icosahedron());
    let o = dualmesh(&["features", "ico.off", "--features", "xyz,area"], dir.path());
    assert!(o.status.success());
    let s = stdout(&o);
    let mut lines = s.lines();
    assert_eq!(lines.next(), Some("x,y,z,area"));
    assert_eq!(lines.count(), 20);
}

#[test]
fn eval_identity_is_perfect() {
    let dir = tempfile::tempdir().unwrap();
    let m = primitives::icosphere(1);
    write_mesh(dir.path(), "ref.off", &m);
    let ids: Vec<_> = (0..m.vertex_count()).map(Some).collect();
    write_labels(&dir.path().join("gt.lbl"), &ids).unwrap();
    let o = dualmesh(
        &["eval", "--pred", "gt.lbl", "--gt", "gt.lbl", "--ref", "ref.off", "--out-dir", "metrics", "--color-out", "err.off"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("metrics/metrics.json")).unwrap()).unwrap();
    assert_eq!(json["accuracy"], 1.0);
    assert_eq!(json["mean_geo_error"], 0.0);
    let curve = fs::read_to_string(dir.path().join("metrics/curve.csv")).unwrap();
    assert_eq!(curve.lines().next(), Some("radius_cm,radius_norm200,fraction"));
    assert_eq!(curve.lines().count(), 65);
    assert!(fs::read_to_string(dir.path().join("err.off")).unwrap().starts_with("COFF"));
}

#[test]
fn decimate_carries_labels() {
    let dir = tempfile::tempdir().unwrap();
    let m = primitives::icosphere(2);
    write_mesh(dir.path(), "in.off", &m);
    let ids: Vec<_> = (0..m.vertex_count()).map(Some).collect();
    write_labels(&dir.path().join("in.lbl"), &ids).unwrap();
    let o = dualmesh(
        &["decimate", "--fraction", "0.5", "in.off", "out.obj", "--labels", "in.lbl", "out.lbl"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).starts_with("320 -> 160 faces"));
    let out = dualmesh::mesh::load_mesh(&dir.path().join("out.obj"), MeshFormat::Obj).unwrap();
    let labels = dualmesh::mesh::read_labels(&dir.path().join("out.lbl")).unwrap();
    assert_eq!(labels.len(), out.vertex_count());
    assert!(out.is_watertight());
}

#[test]
fn train_then_predict() {
    let dir = tempfile::tempdir().unwrap();
    let o = dualmesh(
        &["train", "--task", "icosphere-selfcorr:1", "--layers", "lin8,conv8,d2p,out", "--epochs", "5", "--seed", "3", "--out", "run"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let run = dir.path().join("run");
    for f in ["config.txt", "model.ckpt", "log.csv"] {
        assert!(run.join(f).exists(), "{f} missing");
    }
    let log = fs::read_to_string(run.join("log.csv")).unwrap();
    assert_eq!(log.lines().next(), Some("epoch,loss,train_accuracy"));
    assert_eq!(log.lines().count(), 7);
    let config = fs::read_to_string(run.join("config.txt")).unwrap();
    assert!(config.contains("epochs = 5"), "{config}");

    write_mesh(dir.path(), "q.off", &primitives::icosphere(1));
    let o = dualmesh(&["predict", "--model", "run/model.ckpt", "--mesh", "q.off", "--out", "q.lbl", "--probs", "p.csv"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(fs::read_to_string(dir.path().join("q.lbl")).unwrap().lines().count(), 42);

    let o = dualmesh(&["predict", "--model", "run/model.ckpt", "--mesh", "q.off", "--out", "q.lbl", "--features", "normal"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("c.txt"), "epochs = 4\nlayers = lin4,d2p,out\nseed = 9\n").unwrap();
    let o = dualmesh(
        &["train", "--task", "icosphere-selfcorr:1", "--config", "c.txt", "--epochs", "2", "--out", "run"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let config = fs::read_to_string(dir.path().join("run/config.txt")).unwrap();
    assert!(config.contains("epochs = 2"));
    assert!(config.contains("seed = 9"));
    assert_eq!(fs::read_to_string(dir.path().join("run/log.csv")).unwrap().lines().count(), 4);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(dualmesh(&["frobnicate"], dir.path()).status.code(), Some(1));
    assert_eq!(dualmesh(&["train", "--epochs", "1"], dir.path()).status.code(), Some(1));
    assert_eq!(dualmesh(&["--help"], dir.path()).status.code(), Some(0));
    write_mesh(dir.path(), "ico.off", &primitives::icosahedron());
    assert_eq!(dualmesh(&["features", "ico.off", "--features", ""], dir.path()).status.code(), Some(1));
    assert_eq!(dualmesh(&["decimate", "--fraction", "1.5", "ico.off", "o.off"], dir.path()).status.code(), Some(1));
    assert_eq!(dualmesh(&["dualize", "missing.off"], dir.path()).status.code(), Some(2));
    fs::write(dir.path().join("bad.off"), "OFF\n3 1 0\n0 0 0\n1 0 0\n").unwrap();
    let o = dualmesh(&["dualize", "bad.off"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("bad.off"));
}
