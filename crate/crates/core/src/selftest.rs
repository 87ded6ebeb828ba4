//! Built-in verification suites: dual regularity, gradient checks, feature
//! invariances, neighbor-order invariance, dual-to-primal averaging and the
//! metric fixtures.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dual::{build_dual, DualGraph};
use crate::features::{assemble_features, FeatureKind, FeatureSelection};
use crate::geodesic::{evaluate_on, graph_diameter, DiameterMode, EdgeGraph};
use crate::geom::{self, Vec3};
use crate::mesh::{primitives, Label, Mesh};
use crate::nn::gradcheck::{numeric_gradient, projection, relative_error};
use crate::nn::{
    dual2primal, dual2primal_backward, dualconv_backward, dualconv_forward, elu, elu_backward,
    gather_neighbors, softmax_cross_entropy, symmetric_neighbor_features, Dual2PrimalOp, DualConvKind,
    DualConvParams, Linear, Param, Tensor,
};

pub const GRAD_STEP: f64 = 1e-5;
pub const GRAD_TOL: f64 = 1e-4;
pub const GRAD_TOL_LINEAR: f64 = 1e-6;
pub const GRAD_INSTANCES: usize = 20;
pub const INVARIANCE_TOL: f64 = 1e-9;
pub const VARIANCE_FLOOR: f64 = 1e-3;
/// Inputs closer than this to a kink of max/relu/ELU are resampled.
const KINK_MARGIN: f64 = 1e-3;

#[derive(Clone, Debug)]
pub struct SuiteResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub elapsed: Duration,
}

type Check = (&'static str, fn() -> Result<String, String>);

pub const SUITES: [Check; 6] = [
    ("dual-regularity", check_dual_regularity),
    ("gradients", check_gradients),
    ("feature-invariance", check_feature_invariance),
    ("neighbor-order", check_neighbor_order),
    ("dual-to-primal", check_dual_to_primal),
    ("metric-fixtures", check_metric_fixtures),
];

pub fn run(name: &'static str, check: fn() -> Result<String, String>) -> SuiteResult {
    let t = Instant::now();
    let (passed, detail) = match check() {
        Ok(d) => (true, d),
        Err(d) => (false, d),
    };
    SuiteResult {
        name,
        passed,
        detail,
        elapsed: t.elapsed(),
    }
}

pub fn run_all() -> Vec<SuiteResult> {
    SUITES.iter().map(|&(n, c)| run(n, c)).collect()
}

pub fn format_table(results: &[SuiteResult]) -> String {
    let mut s = String::new();
    for r in results {
        s.push_str(&format!(
            "{:<20} {}  {:>8.3}s  {}\n",
            r.name,
            if r.passed { "PASS" } else { "FAIL" },
            r.elapsed.as_secs_f64(),
            r.detail
        ));
    }
    s
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

pub fn check_dual_regularity() -> Result<String, String> {
    let corpus = primitives::closed_corpus();
    for (name, mesh) in &corpus {
        let dual = build_dual(mesh).map_err(|e| format!("{name}: {e}"))?;
        ensure(dual.is_three_regular(), || format!("{name}: dual is not 3-regular"))?;
        ensure(dual.is_symmetric(), || format!("{name}: adjacency is not symmetric"))?;
        ensure(dual.edge_count() == mesh.edge_index().interior_edge_count(), || {
            format!(
                "{name}: {} dual edges, {} interior primal edges",
                dual.edge_count(),
                mesh.edge_index().interior_edge_count()
            )
        })?;
    }
    Ok(format!("{} closed meshes", corpus.len()))
}

fn random_tensor(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Tensor {
    let data = (0..rows * cols).map(|_| rng.gen_range(-1.0..1.0)).collect();
    Tensor::from_vec(rows, cols, data).expect("sized")
}

fn random_params(rng: &mut ChaCha8Rng, ci: usize, co: usize) -> DualConvParams {
    DualConvParams {
        u: Param::new(random_tensor(rng, co, ci)),
        w: Param::new(random_tensor(rng, co, 3 * ci)),
        bias: Some(Param::new(random_tensor(rng, 1, co))),
    }
}

/// Smallest gap between the best and runner-up rotation score.
fn max_score_gap(x: &Tensor, dual: &DualGraph, w: &Tensor) -> f64 {
    let g = gather_neighbors(x, dual);
    let ci = x.cols();
    let mut gap = f64::INFINITY;
    for n in 0..x.rows() {
        for o in 0..w.rows() {
            let wr = w.row(o);
            let mut scores = [0.0; 3];
            for (r, s) in scores.iter_mut().enumerate() {
                for k in 0..3 {
                    let src = g[(r + k) % 3].row(n);
                    *s += (0..ci).map(|c| wr[k * ci + c] * src[c]).sum::<f64>();
                }
            }
            scores.sort_by(f64::total_cmp);
            gap = gap.min(scores[2] - scores[1]);
        }
    }
    gap
}

/// Smallest |x_i - x_j| over neighbor pairs of a node, per channel.
fn min_pair_gap(x: &Tensor, dual: &DualGraph) -> f64 {
    let g = gather_neighbors(x, dual);
    let mut gap = f64::INFINITY;
    for n in 0..x.rows() {
        for c in 0..x.cols() {
            for (a, b) in [(0, 1), (1, 2), (2, 0)] {
                gap = gap.min((g[a].get(n, c) - g[b].get(n, c)).abs());
            }
        }
    }
    gap
}

struct GradReport {
    worst: f64,
}

impl GradReport {
    fn add(&mut self, what: &str, analytic: &Tensor, numeric: &Tensor, tol: f64) -> Result<(), String> {
        let e = relative_error(analytic, numeric);
        self.worst = self.worst.max(e);
        ensure(e <= tol, || format!("{what}: relative error {e:.3e} > {tol:.0e}"))
    }
}

fn check_dualconv_grads(kind: DualConvKind, rng: &mut ChaCha8Rng, rep: &mut GradReport) -> Result<(), String> {
    let meshes = [primitives::icosahedron(), primitives::tetrahedron(), primitives::torus(2.0, 0.7, 5, 4)];
    let mut done = 0;
    let mut attempts = 0;
    while done < GRAD_INSTANCES {
        attempts += 1;
        ensure(attempts <= 50 * GRAD_INSTANCES, || format!("{}: no non-degenerate instance found", kind.name()))?;
        let mesh = &meshes[done % meshes.len()];
        let dual = build_dual(mesh).map_err(|e| e.to_string())?;
        let (ci, co) = (rng.gen_range(1..4), rng.gen_range(1..4));
        let x = random_tensor(rng, dual.node_count(), ci);
        let p = random_params(rng, ci, co);
        let degenerate = match kind {
            DualConvKind::Max => max_score_gap(&x, &dual, &p.w.value) < KINK_MARGIN,
            DualConvKind::Inv => min_pair_gap(&x, &dual) < KINK_MARGIN,
        };
        if degenerate {
            continue;
        }
        let r = random_tensor(rng, dual.node_count(), co);
        let (_, state) = dualconv_forward(kind, &x, &dual, &p).map_err(|e| e.to_string())?;
        let g = dualconv_backward(&r, &state, &p).map_err(|e| e.to_string())?;
        let name = kind.name();

        let mut fx = |t: &Tensor| projection(&r, &dualconv_forward(kind, t, &dual, &p).unwrap().0);
        rep.add(&format!("{name} dx"), &g.dx, &numeric_gradient(&mut fx, &x, GRAD_STEP), GRAD_TOL)?;
        let mut fu = |t: &Tensor| {
            let mut q = p.clone();
            q.u.value = t.clone();
            projection(&r, &dualconv_forward(kind, &x, &dual, &q).unwrap().0)
        };
        rep.add(&format!("{name} dU"), &g.du, &numeric_gradient(&mut fu, &p.u.value, GRAD_STEP), GRAD_TOL)?;
        let mut fw = |t: &Tensor| {
            let mut q = p.clone();
            q.w.value = t.clone();
            projection(&r, &dualconv_forward(kind, &x, &dual, &q).unwrap().0)
        };
        rep.add(&format!("{name} dW"), &g.dw, &numeric_gradient(&mut fw, &p.w.value, GRAD_STEP), GRAD_TOL)?;
        let b0 = p.bias.as_ref().unwrap().value.clone();
        let mut fb = |t: &Tensor| {
            let mut q = p.clone();
            q.bias.as_mut().unwrap().value = t.clone();
            projection(&r, &dualconv_forward(kind, &x, &dual, &q).unwrap().0)
        };
        let db = Tensor::from_vec(1, co, g.dbias.clone()).unwrap();
        rep.add(&format!("{name} db"), &db, &numeric_gradient(&mut fb, &b0, GRAD_STEP), GRAD_TOL)?;
        done += 1;
    }
    Ok(())
}

pub fn check_gradients() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x6772_6164);
    let mut rep = GradReport { worst: 0.0 };
    check_dualconv_grads(DualConvKind::Max, &mut rng, &mut rep)?;
    check_dualconv_grads(DualConvKind::Inv, &mut rng, &mut rep)?;

    let meshes = [primitives::icosahedron(), primitives::icosphere(1), primitives::torus(2.0, 0.7, 6, 5)];
    for i in 0..GRAD_INSTANCES {
        let mesh = &meshes[i % meshes.len()];
        let op = Dual2PrimalOp::new(mesh).map_err(|e| e.to_string())?;
        let c = rng.gen_range(1..4);
        let x = random_tensor(&mut rng, mesh.face_count(), c);
        let r = random_tensor(&mut rng, mesh.vertex_count(), c);
        let dx = dual2primal_backward(&r, &op).map_err(|e| e.to_string())?;
        let mut f = |t: &Tensor| projection(&r, &dual2primal(t, &op).unwrap());
        rep.add("dual2primal", &dx, &numeric_gradient(&mut f, &x, GRAD_STEP), GRAD_TOL_LINEAR)?;
    }

    for _ in 0..GRAD_INSTANCES {
        let (n, ci, co) = (rng.gen_range(1..8), rng.gen_range(1..6), rng.gen_range(1..6));
        let mut lin = Linear::new(
            Param::new(random_tensor(&mut rng, co, ci)),
            Some(Param::new(random_tensor(&mut rng, 1, co))),
        );
        let x = random_tensor(&mut rng, n, ci);
        let r = random_tensor(&mut rng, n, co);
        lin.forward(&x).map_err(|e| e.to_string())?;
        let dx = lin.backward(&r).map_err(|e| e.to_string())?;
        let base = lin.clone();
        let mut fx = |t: &Tensor| projection(&r, &base.clone().forward(t).unwrap());
        rep.add("linear dx", &dx, &numeric_gradient(&mut fx, &x, GRAD_STEP), GRAD_TOL_LINEAR)?;
        let mut fw = |t: &Tensor| {
            let mut l = base.clone();
            l.weight.value = t.clone();
            projection(&r, &l.forward(&x).unwrap())
        };
        rep.add(
            "linear dW",
            &lin.weight.grad,
            &numeric_gradient(&mut fw, &base.weight.value, GRAD_STEP),
            GRAD_TOL_LINEAR,
        )?;
        let mut fb = |t: &Tensor| {
            let mut l = base.clone();
            l.bias.as_mut().unwrap().value = t.clone();
            projection(&r, &l.forward(&x).unwrap())
        };
        let b = lin.bias.as_ref().unwrap();
        rep.add("linear db", &b.grad, &numeric_gradient(&mut fb, &b.value, GRAD_STEP), GRAD_TOL_LINEAR)?;
    }

    let mut done = 0;
    while done < GRAD_INSTANCES {
        let x = random_tensor(&mut rng, 3, 4);
        if x.data().iter().any(|v| v.abs() < KINK_MARGIN) {
            continue;
        }
        let r = random_tensor(&mut rng, 3, 4);
        let mut f = |t: &Tensor| projection(&r, &elu(t));
        rep.add("elu", &elu_backward(&x, &r), &numeric_gradient(&mut f, &x, GRAD_STEP), GRAD_TOL)?;
        done += 1;
    }

    for _ in 0..GRAD_INSTANCES {
        let (n, k) = (rng.gen_range(1..8), rng.gen_range(2..7));
        let mut logits = random_tensor(&mut rng, n, k);
        logits.data_mut().iter_mut().for_each(|v| *v *= 4.0);
        let labels: Vec<Label> = (0..n)
            .map(|_| (rng.gen_range(0.0..1.0) < 0.8).then(|| rng.gen_range(0..k)))
            .collect();
        let (_, g) = softmax_cross_entropy(&logits, &labels).map_err(|e| e.to_string())?;
        let mut f = |t: &Tensor| softmax_cross_entropy(t, &labels).unwrap().0;
        rep.add("cross-entropy", &g, &numeric_gradient(&mut f, &logits, GRAD_STEP), GRAD_TOL)?;
    }
    Ok(format!(
        "6 layers x {GRAD_INSTANCES} instances, worst relative error {:.2e}",
        rep.worst
    ))
}

/// A lumpy, off-center sphere so that no channel is trivially constant.
pub fn invariance_mesh(seed: u64) -> Mesh {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base = primitives::icosphere(1);
    let offset = [0.3, -0.2, 0.5];
    let verts = base
        .vertices()
        .iter()
        .map(|&v| geom::add(geom::scale(v, 1.0 + rng.gen_range(-0.1..0.1)), offset))
        .collect();
    Mesh::new(verts, base.faces().to_vec()).expect("jittered icosphere stays valid")
}

/// Uniformly random rotation that turns by at least 0.2 rad.
pub fn random_rotation(rng: &mut ChaCha8Rng) -> [[f64; 3]; 3] {
    loop {
        let q: [f64; 4] = std::array::from_fn(|_| rng.gen_range(-1.0..1.0));
        let n = q.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(0.1..=1.0).contains(&n) {
            continue;
        }
        let [w, x, y, z] = q.map(|v| v / n);
        if 2.0 * w.abs().acos() < 0.2 {
            continue;
        }
        return [
            [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y)],
            [2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x)],
            [2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y)],
        ];
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Motion {
    Translation,
    Rotation,
    Scale,
}

/// Whether `kind` is unchanged by `motion`.
pub fn is_invariant(kind: FeatureKind, motion: Motion) -> bool {
    use FeatureKind::*;
    use Motion::*;
    match kind {
        Xyz => false,
        Normal => motion != Rotation,
        Area | DistCm => motion != Scale,
        Dihedral => true,
    }
}

/// Per-face channels of one feature kind, slot channels for Dihedral.
pub fn feature_channels(mesh: &Mesh, kind: FeatureKind) -> Tensor {
    let dual = build_dual(mesh).expect("closed test mesh");
    let sel = FeatureSelection::new(vec![kind]).expect("single kind");
    let input = assemble_features(mesh, &dual, &sel).expect("valid mesh");
    input.to_table(&sel)
}

pub fn relative_change(a: &Tensor, b: &Tensor) -> f64 {
    a.max_abs_diff(b) / a.max_abs().max(f64::MIN_POSITIVE)
}

pub fn check_feature_invariance() -> Result<String, String> {
    const TRIALS: usize = 100;
    let mut rng = ChaCha8Rng::seed_from_u64(0x7461_626c);
    let kinds = [
        FeatureKind::Xyz,
        FeatureKind::Normal,
        FeatureKind::Area,
        FeatureKind::DistCm,
        FeatureKind::Dihedral,
    ];
    let mut worst_inv = 0.0f64;
    let mut weakest_var = f64::INFINITY;
    for trial in 0..TRIALS {
        let mesh = invariance_mesh(trial as u64);
        let base: Vec<Tensor> = kinds.iter().map(|&k| feature_channels(&mesh, k)).collect();
        let t: Vec3 = loop {
            let t: Vec3 = std::array::from_fn(|_| rng.gen_range(-2.0..2.0));
            if geom::norm(t) > 0.1 {
                break t;
            }
        };
        let s = if rng.gen_bool(0.5) { rng.gen_range(0.3..0.9) } else { rng.gen_range(1.1..3.0) };
        let id = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        let moved = [
            (Motion::Translation, mesh.transformed(&id, t)),
            (Motion::Rotation, mesh.transformed(&random_rotation(&mut rng), [0.0; 3])),
            (Motion::Scale, mesh.transformed(&[[s, 0.0, 0.0], [0.0, s, 0.0], [0.0, 0.0, s]], [0.0; 3])),
        ];
        for (motion, m) in &moved {
            for (k, b) in kinds.iter().zip(&base) {
                let change = relative_change(b, &feature_channels(m, *k));
                if is_invariant(*k, *motion) {
                    worst_inv = worst_inv.max(change);
                    ensure(change <= INVARIANCE_TOL, || {
                        format!("trial {trial}: {} changed by {change:.2e} under {motion:?}", k.name())
                    })?;
                } else {
                    weakest_var = weakest_var.min(change);
                    ensure(change >= VARIANCE_FLOOR, || {
                        format!("trial {trial}: {} changed only {change:.2e} under {motion:?}", k.name())
                    })?;
                }
            }
        }
    }
    Ok(format!(
        "{TRIALS} trials, invariant drift {worst_inv:.1e}, smallest variant change {weakest_var:.1e}"
    ))
}

pub fn check_neighbor_order() -> Result<String, String> {
    const TRIALS: usize = 100;
    let mut rng = ChaCha8Rng::seed_from_u64(0x726f_7461);
    let meshes = [primitives::icosphere(1), primitives::torus(2.0, 0.7, 8, 6)];
    let mut worst = 0.0f64;
    for trial in 0..TRIALS {
        let mesh = &meshes[trial % meshes.len()];
        let dual = build_dual(mesh).map_err(|e| e.to_string())?;
        let (ci, co) = (rng.gen_range(1..5), rng.gen_range(1..5));
        let x = random_tensor(&mut rng, dual.node_count(), ci);
        let p = random_params(&mut rng, ci, co);
        for kind in [DualConvKind::Max, DualConvKind::Inv] {
            let y = dualconv_forward(kind, &x, &dual, &p).unwrap().0;
            for k in 1..3 {
                let yr = dualconv_forward(kind, &x, &dual.rotated(k), &p).unwrap().0;
                let d = relative_change(&y, &yr);
                worst = worst.max(d);
                ensure(d <= 1e-12, || {
                    format!("trial {trial}: {} changed by {d:.2e} under rotation {k}", kind.name())
                })?;
            }
        }
        // integer features make the sums exact, so a transposition must swap
        // the two difference components bit for bit
        let xi: [Vec<f64>; 3] = std::array::from_fn(|_| (0..ci).map(|_| rng.gen_range(-9..10) as f64).collect());
        let f = symmetric_neighbor_features(&xi[0], &xi[1], &xi[2]);
        let ft = symmetric_neighbor_features(&xi[0], &xi[2], &xi[1]);
        ensure(
            f[..ci] == ft[..ci] && f[ci..2 * ci] == ft[2 * ci..] && f[2 * ci..] == ft[ci..2 * ci],
            || format!("trial {trial}: transposition did not swap components 2 and 3"),
        )?;
    }
    Ok(format!("{TRIALS} trials, worst drift {worst:.1e}"))
}

pub fn check_dual_to_primal() -> Result<String, String> {
    let corpus = primitives::closed_corpus();
    for (name, mesh) in &corpus {
        let op = Dual2PrimalOp::new(mesh).map_err(|e| format!("{name}: {e}"))?;
        let dense = op.to_dense();
        for v in 0..dense.rows() {
            let s: f64 = dense.row(v).iter().sum();
            ensure((s - 1.0).abs() <= 1e-12, || format!("{name}: row {v} sums to {s}"))?;
        }
        let c = 0.7324;
        let y = dual2primal(&Tensor::filled(mesh.face_count(), 2, c), &op).map_err(|e| e.to_string())?;
        ensure(y.data().iter().all(|v| (v - c).abs() <= 1e-12), || {
            format!("{name}: constant face feature not preserved")
        })?;
    }
    Ok(format!("{} closed meshes", corpus.len()))
}

/// Regular octahedron: every edge has length sqrt(2), the diameter is two
/// edges, and each vertex's first neighbor is one edge away.
pub fn octahedron() -> Mesh {
    let v = vec![
        [1.0, 0.0, 0.0],
        [-1.0, 0.0, 0.0],
        [0.0, 1.0, 0.0],
        [0.0, -1.0, 0.0],
        [0.0, 0.0, 1.0],
        [0.0, 0.0, -1.0],
    ];
    let f = vec![
        [0, 2, 4],
        [2, 1, 4],
        [1, 3, 4],
        [3, 0, 4],
        [2, 0, 5],
        [1, 2, 5],
        [3, 1, 5],
        [0, 3, 5],
    ];
    Mesh::new(v, f).expect("octahedron is valid")
}

pub fn check_metric_fixtures() -> Result<String, String> {
    let mesh = octahedron();
    let g = EdgeGraph::from_mesh(&mesh);
    let diameter = graph_diameter(&g, DiameterMode::Exact).map_err(|e| e.to_string())?;
    let l = 2f64.sqrt();
    ensure(diameter == 2.0 * l, || format!("diameter {diameter}, expected {}", 2.0 * l))?;
    let truth: Vec<Label> = (0..6).map(Some).collect();
    // each vertex predicted as an adjacent one
    let off = [2, 2, 0, 0, 0, 0];
    let radii = [0.0, 0.5 * l, l * (1.0 - 1e-9), l, 1.5 * l];
    let r = evaluate_on(&g, diameter, &off, &truth, &radii, 1).map_err(|e| e.to_string())?;
    ensure(r.accuracy == 0.0, || format!("off-by-one accuracy {}", r.accuracy))?;
    let expect = 100.0 * l / diameter;
    ensure((r.mean_geo_error - expect).abs() <= 1e-12, || {
        format!("off-by-one error {}, expected {expect}", r.mean_geo_error)
    })?;
    let fr: Vec<f64> = r.curve.iter().map(|p| p.fraction).collect();
    ensure(fr == [0.0, 0.0, 0.0, 1.0, 1.0], || format!("off-by-one curve {fr:?}"))?;
    let id: Vec<usize> = (0..6).collect();
    let r = evaluate_on(&g, diameter, &id, &truth, &radii, 1).map_err(|e| e.to_string())?;
    ensure(r.accuracy == 1.0 && r.mean_geo_error == 0.0, || {
        format!("identity: accuracy {}, error {}", r.accuracy, r.mean_geo_error)
    })?;
    ensure(r.curve.iter().all(|p| p.fraction == 1.0), || "identity curve not constant 1".into())?;
    Ok(format!("off-by-one error {expect:.6}, identity exact"))
}
