use proptest::prelude::*;

use dualmesh::geodesic::{evaluate, geodesic_from, graph_diameter, DiameterMode, EdgeGraph};
use dualmesh::mesh::{primitives, Label, Mesh};

fn dist(a: [f64; 3], b: [f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

fn meshes() -> Vec<Mesh> {
    vec![
        primitives::icosphere(2),
        primitives::torus(2.0, 0.6, 12, 8),
        primitives::tetrahedron(),
    ]
}

#[test]
fn sampled_diameter_is_within_two_percent_of_exact() {
    let m = primitives::icosphere(4);
    assert!(m.vertex_count() >= 2000);
    let g = EdgeGraph::from_mesh(&m);
    let exact = graph_diameter(&g, DiameterMode::Exact).unwrap();
    let sampled = graph_diameter(&g, DiameterMode::Sampled(100)).unwrap();
    assert!(sampled <= exact);
    assert!((exact - sampled) / exact < 0.02, "exact {exact}, sampled {sampled}");
}

#[test]
fn edge_lipschitz_and_zero_at_source() {
    for m in meshes() {
        for s in [0, m.vertex_count() / 2, m.vertex_count() - 1] {
            let d = geodesic_from(&m, s).unwrap().distances;
            assert_eq!(d[s], 0.0);
            for e in m.edge_index().edges() {
                let [u, v] = e.verts;
                let l = dist(m.vertices()[u], m.vertices()[v]);
                assert!((d[u] - d[v]).abs() <= l + 1e-12);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn distances_are_symmetric_and_triangular(a in 0usize..162, b in 0usize..162, c in 0usize..162) {
        let m = primitives::icosphere(2);
        let g = EdgeGraph::from_mesh(&m);
        let (da, db) = (g.distances(a), g.distances(b));
        prop_assert!((da[b] - db[a]).abs() <= 1e-12);
        prop_assert!(da[c] <= da[b] + db[c] + 1e-12);
        prop_assert!((a == b) == (da[b] == 0.0));
    }

    #[test]
    fn curve_is_monotone_and_reaches_one(pred in prop::collection::vec(0usize..42, 42), steps in 2usize..20) {
        let m = primitives::icosphere(1);
        let truth: Vec<Label> = (0..42).map(Some).collect();
        let g = EdgeGraph::from_mesh(&m);
        let diam = graph_diameter(&g, DiameterMode::Exact).unwrap();
        let mut radii: Vec<f64> = (0..steps).map(|i| diam * i as f64 / steps as f64).collect();
        radii.push(diam);
        let r = evaluate(&pred, &truth, &m, &radii).unwrap();
        prop_assert!(r.curve.windows(2).all(|w| w[0].fraction <= w[1].fraction));
        prop_assert_eq!(r.curve[0].fraction, r.accuracy);
        prop_assert_eq!(r.curve.last().unwrap().fraction, 1.0);
        prop_assert!(r.mean_geo_error >= 0.0);
    }

    #[test]
    fn metrics_ignore_rigid_motion(
        pred in prop::collection::vec(0usize..42, 42),
        angle in 0.1..3.0f64,
        t in prop::array::uniform3(-5.0..5.0f64),
    ) {
        let m = primitives::icosphere(1);
        let (s, c) = angle.sin_cos();
        let moved = m.transformed(&[[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]], t);
        let truth: Vec<Label> = (0..42).map(Some).collect();
        let a = evaluate(&pred, &truth, &m, &[0.3, 0.6]).unwrap();
        let b = evaluate(&pred, &truth, &moved, &[0.3, 0.6]).unwrap();
        prop_assert_eq!(a.accuracy, b.accuracy);
        prop_assert!((a.mean_geo_error - b.mean_geo_error).abs() <= 1e-9);
        prop_assert!((a.diameter - b.diameter).abs() <= 1e-9);
    }
}
