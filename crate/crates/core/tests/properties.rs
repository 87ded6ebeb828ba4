use proptest::prelude::*;

use dualmesh::decimate::decimate_with;
use dualmesh::dual::{build_dual, DualGraph};
use dualmesh::mesh::{load_mesh, primitives, read_labels, save_mesh, write_labels, Label, Mesh, MeshFormat};
use dualmesh::nn::{dualconv_forward, DualConvKind, DualConvParams, Param, Tensor};
use dualmesh::persist::Checkpoint;
use dualmesh::train::{build_network, NetworkConfig, OperatorKind};
use dualmesh::Error;

fn tensor(rows: usize, cols: usize) -> impl Strategy<Value = Tensor> {
    prop::collection::vec(-2.0..2.0f64, rows * cols).prop_map(move |d| Tensor::from_vec(rows, cols, d).unwrap())
}

fn jittered_sphere() -> impl Strategy<Value = Mesh> {
    let base = primitives::icosphere(1);
    let n = base.vertex_count();
    prop::collection::vec(0.8..1.2f64, n).prop_map(move |s| {
        let v = base.vertices().iter().zip(&s).map(|(p, k)| [p[0] * k, p[1] * k, p[2] * k]).collect();
        Mesh::new(v, base.faces().to_vec()).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn dual_of_closed_mesh_is_regular_and_symmetric(m in jittered_sphere()) {
        let d = build_dual(&m).unwrap();
        prop_assert!(d.is_three_regular());
        prop_assert!(d.is_symmetric());
        prop_assert_eq!(d.edge_count(), m.edge_index().interior_edge_count());
    }

    #[test]
    fn rotating_every_triple_leaves_outputs_unchanged(
        x in tensor(80, 2), u in tensor(3, 2), w in tensor(3, 6), shifts in prop::collection::vec(0usize..3, 80)
    ) {
        let d = build_dual(&primitives::icosphere(1)).unwrap();
        let slots = d.slots().iter().zip(&shifts).map(|(s, &k)| [s[k], s[(k + 1) % 3], s[(k + 2) % 3]]).collect();
        let rd = DualGraph::from_slots(slots).unwrap();
        let p = DualConvParams { u: Param::new(u), w: Param::new(w), bias: None };
        for kind in [DualConvKind::Max, DualConvKind::Inv] {
            let a = dualconv_forward(kind, &x, &d, &p).unwrap().0;
            let b = dualconv_forward(kind, &x, &rd, &p).unwrap().0;
            prop_assert!(a.max_abs_diff(&b) <= 1e-12);
        }
    }

    #[test]
    fn mesh_round_trips_through_both_formats(m in jittered_sphere(), obj in any::<bool>()) {
        let dir = tempfile::tempdir().unwrap();
        let fmt = if obj { MeshFormat::Obj } else { MeshFormat::Off };
        let path = dir.path().join(if obj { "m.obj" } else { "m.off" });
        save_mesh(&m, &path, fmt, None).unwrap();
        let back = load_mesh(&path, fmt).unwrap();
        prop_assert_eq!(back.vertices(), m.vertices());
        prop_assert_eq!(back.faces(), m.faces());
    }

    #[test]
    fn labels_round_trip(labels in prop::collection::vec(prop::option::of(0usize..10_000), 0..200)) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("l.lbl");
        write_labels(&path, &labels).unwrap();
        prop_assert_eq!(read_labels(&path).unwrap(), labels);
    }

    #[test]
    fn invalid_face_indices_are_rejected(bad in 4usize..1000, slot in 0usize..3) {
        let m = primitives::tetrahedron();
        let mut faces = m.faces().to_vec();
        faces[1][slot] = bad;
        prop_assert!(Mesh::new(m.vertices().to_vec(), faces).is_err());
    }

    #[test]
    fn garbage_off_never_panics(text in "OFF\n[0-9 .\\-\n]{0,80}") {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.off");
        std::fs::write(&path, text).unwrap();
        let _ = load_mesh(&path, MeshFormat::Off);
    }

    #[test]
    fn checkpoint_rejects_any_tail(tail in prop::collection::vec(any::<u8>(), 1..16), cut in 1usize..64) {
        let mut c = NetworkConfig::new(OperatorKind::DualConvMax, "xyz".parse().unwrap(), 4);
        c.layers = dualmesh::train::config::parse_layers("conv3,d2p,out").unwrap();
        let bytes = Checkpoint::from_network(&build_network(&c).unwrap()).to_bytes();
        let mut long = bytes.clone();
        long.extend_from_slice(&tail);
        prop_assert!(matches!(Checkpoint::from_bytes(&long), Err(Error::Corruption(_))));
        let short = &bytes[..bytes.len() - cut.min(bytes.len())];
        prop_assert!(matches!(Checkpoint::from_bytes(short), Err(Error::Corruption(_))));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn decimation_keeps_closed_surfaces(m in jittered_sphere(), fraction in 0.3..1.0f64) {
        let ids: Vec<Label> = (0..m.vertex_count()).map(Some).collect();
        let d = decimate_with(&m, Some(&ids), fraction, true).unwrap();
        let target = (m.face_count() as f64 * fraction).ceil() as usize;
        prop_assert!(d.mesh.face_count().abs_diff(target) <= 2);
        prop_assert!(d.mesh.is_watertight());
        prop_assert_eq!(d.mesh.euler_characteristic(), 2);
        prop_assert_eq!(d.mesh.inconsistent_winding_edges(), 0);
        let labels = d.labels.unwrap();
        prop_assert_eq!(labels.len(), d.mesh.vertex_count());
        for r in &d.trace {
            prop_assert!(r.length <= r.shortest_legal * (1.0 + 1e-12));
        }
    }
}
