use std::ffi::{CStr, CString};
use std::process::Command;
use std::ptr;

use dualmesh::mesh::primitives;
use dualmesh::persist::save_checkpoint;
use dualmesh::train::{build_network, config::parse_layers, NetworkConfig, OperatorKind};
use dualmesh_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(dm_last_error()) }.to_string_lossy().into_owned()
}

fn tetra_arrays() -> (Vec<f64>, Vec<u32>) {
    let m = primitives::tetrahedron();
    let v = m.vertices().iter().flatten().copied().collect();
    let f = m.faces().iter().flatten().map(|&i| i as u32).collect();
    (v, f)
}

#[test]
fn mesh_dual_and_features() {
    let (v, f) = tetra_arrays();
    let mut mesh = ptr::null_mut();
    unsafe {
        assert_eq!(dm_mesh_from_arrays(v.as_ptr(), 4, f.as_ptr(), 4, &mut mesh), DmStatus::Ok);
        assert_eq!(dm_mesh_vertex_count(mesh), 4);
        assert_eq!(dm_mesh_face_count(mesh), 4);
        assert!(dm_mesh_is_watertight(mesh));

        let mut back = vec![0.0; 12];
        assert_eq!(dm_mesh_vertices(mesh, back.as_mut_ptr(), back.len()), DmStatus::Ok);
        assert_eq!(back, v);
        let mut short = vec![0u32; 11];
        assert_eq!(dm_mesh_faces(mesh, short.as_mut_ptr(), short.len()), DmStatus::BadLength);
        assert!(last_error().contains("expected 12"));

        let mut dual = ptr::null_mut();
        assert_eq!(dm_dual_build(mesh, &mut dual), DmStatus::Ok);
        assert_eq!(dm_dual_node_count(dual), 4);
        let mut nb = vec![0i64; 12];
        assert_eq!(dm_dual_neighbors(dual, nb.as_mut_ptr(), nb.len()), DmStatus::Ok);
        for (node, row) in nb.chunks(3).enumerate() {
            let mut r = row.to_vec();
            r.sort();
            let expect: Vec<i64> = (0..4).filter(|&j| j != node as i64).collect();
            assert_eq!(r, expect);
        }
        dm_dual_free(dual);

        let spec = CString::new("xyz,area,dihedral").unwrap();
        let mut width = 0;
        assert_eq!(dm_feature_width(spec.as_ptr(), &mut width), DmStatus::Ok);
        assert_eq!(width, 7);
        let mut table = vec![0.0; 4 * width];
        assert_eq!(dm_features(mesh, spec.as_ptr(), table.as_mut_ptr(), table.len()), DmStatus::Ok);
        assert!(table.iter().all(|x| x.is_finite()));

        let bad = CString::new("xyz,colour").unwrap();
        assert_eq!(dm_feature_width(bad.as_ptr(), &mut width), DmStatus::Config);
        dm_mesh_free(mesh);
    }
}

#[test]
fn invalid_mesh_is_reported() {
    let v = [0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0];
    let f = [0u32, 1, 7];
    let mut mesh = ptr::null_mut();
    let s = unsafe { dm_mesh_from_arrays(v.as_ptr(), 3, f.as_ptr(), 1, &mut mesh) };
    assert_eq!(s, DmStatus::InvalidMesh);
    assert!(mesh.is_null());
    assert!(!last_error().is_empty());
}

#[test]
fn decimate_geodesics_and_evaluate() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sphere.off");
    dualmesh::mesh::save_mesh(&primitives::icosphere(2), &path, dualmesh::mesh::MeshFormat::Off, None).unwrap();
    let cpath = CString::new(path.to_str().unwrap()).unwrap();
    unsafe {
        let mut mesh = ptr::null_mut();
        assert_eq!(dm_mesh_load(cpath.as_ptr(), &mut mesh), DmStatus::Ok);
        let n = dm_mesh_vertex_count(mesh);
        let ids: Vec<i64> = (0..n as i64).collect();
        assert_eq!(dm_mesh_set_labels(mesh, ids.as_ptr(), n), DmStatus::Ok);

        let mut small = ptr::null_mut();
        assert_eq!(dm_decimate(mesh, 0.5, &mut small), DmStatus::Ok);
        assert_eq!(dm_mesh_face_count(small), 160);
        assert!(dm_mesh_is_watertight(small));
        let k = dm_mesh_vertex_count(small);
        let mut carried = vec![0i64; k];
        assert_eq!(dm_mesh_labels(small, carried.as_mut_ptr(), k), DmStatus::Ok);
        assert!(carried.iter().all(|&l| (0..n as i64).contains(&l)));

        let mut out = ptr::null_mut();
        assert_eq!(dm_decimate(mesh, 0.0, &mut out), DmStatus::Config);

        let mut d = vec![0.0; n];
        assert_eq!(dm_geodesic_distances(mesh, 0, d.as_mut_ptr(), n), DmStatus::Ok);
        assert_eq!(d[0], 0.0);
        assert!(d.iter().all(|&x| x >= 0.0 && x.is_finite()));
        assert_eq!(dm_geodesic_distances(mesh, n, d.as_mut_ptr(), n), DmStatus::LabelOutOfRange);

        let (mut acc, mut err) = (0.0, 0.0);
        assert_eq!(dm_evaluate(mesh, ids.as_ptr(), ids.as_ptr(), n, &mut acc, &mut err), DmStatus::Ok);
        assert_eq!((acc, err), (1.0, 0.0));
        let mut wrong = ids.clone();
        wrong[0] = n as i64 + 5;
        assert_eq!(dm_evaluate(mesh, wrong.as_ptr(), ids.as_ptr(), n, &mut acc, &mut err), DmStatus::LabelOutOfRange);

        dm_mesh_free(small);
        dm_mesh_free(mesh);
    }
}

#[test]
fn model_load_and_predict() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = NetworkConfig::new(OperatorKind::DualConvMax, "xyz".parse().unwrap(), 12);
    c.layers = parse_layers("conv4,d2p,out").unwrap();
    let ckpt = dir.path().join("m.ckpt");
    save_checkpoint(&build_network(&c).unwrap(), &ckpt).unwrap();
    let cpath = CString::new(ckpt.to_str().unwrap()).unwrap();
    let (v, f) = tetra_arrays();
    unsafe {
        let mut model = ptr::null_mut();
        assert_eq!(dm_model_load(cpath.as_ptr(), &mut model), DmStatus::Ok);
        assert_eq!(dm_model_target_count(model), 12);
        let mut mesh = ptr::null_mut();
        assert_eq!(dm_mesh_from_arrays(v.as_ptr(), 4, f.as_ptr(), 4, &mut mesh), DmStatus::Ok);
        let mut labels = vec![-7i64; 4];
        let mut probs = vec![0.0; 4 * 12];
        assert_eq!(
            dm_model_predict(model, mesh, labels.as_mut_ptr(), 4, probs.as_mut_ptr(), probs.len()),
            DmStatus::Ok
        );
        assert!(labels.iter().all(|&l| (0..12).contains(&l)));
        for row in probs.chunks(12) {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        assert_eq!(dm_model_predict(model, mesh, labels.as_mut_ptr(), 4, ptr::null_mut(), 0), DmStatus::Ok);
        dm_mesh_free(mesh);
        dm_model_free(model);
    }

    let mut bytes = std::fs::read(&ckpt).unwrap();
    bytes.push(0);
    std::fs::write(&ckpt, bytes).unwrap();
    let mut model = ptr::null_mut();
    assert_eq!(unsafe { dm_model_load(cpath.as_ptr(), &mut model) }, DmStatus::CorruptCheckpoint);
}

#[test]
fn header_compiles_as_c() {
    let header = concat!(env!("CARGO_MANIFEST_DIR"), "/include/dualmesh.h");
    let text = std::fs::read_to_string(header).unwrap();
    for f in ["dm_mesh_load", "dm_dual_neighbors", "dm_model_predict", "dm_last_error", "DM_STATUS_OK"] {
        assert!(text.contains(f), "{f} missing from header");
    }
    let Ok(out) = Command::new("cc").args(["-fsyntax-only", "-Wall", "-Werror", "-x", "c", header]).output() else {
        eprintln!("no C compiler on PATH; syntax check skipped");
        return;
    };
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}
