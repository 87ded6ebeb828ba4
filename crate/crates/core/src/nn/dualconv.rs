//! Convolutions on the 3-regular dual graph.
//!
//! For a node with feature `x0` and ordered neighbors `x1, x2, x3`:
//!
//! * **Max**: `y0 = U x0 + max{W[x1 x2 x3], W[x2 x3 x1], W[x3 x1 x2]} + b`,
//!   the max taken per output coordinate. Backward routes each coordinate
//!   through the winning rotation; ties go to the lowest rotation index.
//! * **Inv**: `y0 = U x0 + W f + b` with
//!   `f = (x1+x2+x3, [x1-x2]+ + [x2-x3]+ + [x3-x1]+, [x2-x1]+ + [x3-x2]+ + [x1-x3]+)`.
//!   The subgradient of `[a]+` at `a = 0` is 0.
//!
//! PAD slots read as zero vectors and receive no gradient.

use rand::Rng;

use super::{Param, Tensor};
use crate::dual::{DualGraph, Slot};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DualConvKind {
    Max,
    Inv,
}

impl DualConvKind {
    pub fn name(self) -> &'static str {
        match self {
            DualConvKind::Max => "dualconvmax",
            DualConvKind::Inv => "dualconvinv",
        }
    }
}

/// `U` (C_O x C_I), `W` (C_O x 3C_I) and an optional bias (1 x C_O).
#[derive(Clone, Debug, PartialEq)]
pub struct DualConvParams {
    pub u: Param,
    pub w: Param,
    pub bias: Option<Param>,
}

impl DualConvParams {
    pub fn zeros(c_in: usize, c_out: usize, bias: bool) -> Self {
        Self {
            u: Param::zeros(c_out, c_in),
            w: Param::zeros(c_out, 3 * c_in),
            bias: bias.then(|| Param::zeros(1, c_out)),
        }
    }

    pub fn init<R: Rng + ?Sized>(c_in: usize, c_out: usize, bias: bool, rng: &mut R) -> Self {
        Self {
            u: Param::glorot(c_out, c_in, rng),
            w: Param::glorot(c_out, 3 * c_in, rng),
            bias: bias.then(|| Param::zeros(1, c_out)),
        }
    }

    pub fn c_in(&self) -> usize {
        self.u.value.cols()
    }

    pub fn c_out(&self) -> usize {
        self.u.value.rows()
    }

    fn check(&self) -> Result<()> {
        let (co, ci) = self.u.value.shape();
        self.w.value.expect_shape(co, 3 * ci, "dual conv W")?;
        if let Some(b) = &self.bias {
            b.value.expect_shape(1, co, "dual conv bias")?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DualConvGrads {
    /// Gradient w.r.t. node features (graph input) or slot features (slot input).
    pub dx: Tensor,
    pub du: Tensor,
    pub dw: Tensor,
    pub dbias: Vec<f64>,
}

#[derive(Clone, Debug)]
enum Source {
    Graph(Vec<[Slot; 3]>),
    Slots,
}

/// Everything the backward pass needs from a forward call.
#[derive(Clone, Debug)]
pub struct DualConvState {
    kind: DualConvKind,
    source: Source,
    center: Tensor,
    gathered: [Tensor; 3],
    /// Max only: concatenated neighbor features per rotation.
    rotated: Option<[Tensor; 3]>,
    /// Max only: winning rotation per (node, output channel).
    argmax: Vec<u8>,
}

impl DualConvState {
    pub fn kind(&self) -> DualConvKind {
        self.kind
    }

    /// Winning rotation for `(node, channel)` (Max only).
    pub fn winner(&self, node: usize, channel: usize, c_out: usize) -> Option<u8> {
        self.argmax.get(node * c_out + channel).copied()
    }
}

/// Neighbor features per slot: `out[s]` row `n` is `x[slot_s(n)]` or zeros.
pub fn gather_neighbors(x: &Tensor, dual: &DualGraph) -> [Tensor; 3] {
    let c = x.cols();
    let n = dual.node_count();
    let mut out = [Tensor::zeros(n, c), Tensor::zeros(n, c), Tensor::zeros(n, c)];
    for (node, slots) in dual.slots().iter().enumerate() {
        for (s, slot) in slots.iter().enumerate() {
            if let Some(j) = slot {
                out[s].row_mut(node).copy_from_slice(x.row(*j));
            }
        }
    }
    out
}

/// `f(x1, x2, x3)` as a 3C vector.
pub fn symmetric_neighbor_features(x1: &[f64], x2: &[f64], x3: &[f64]) -> Vec<f64> {
    let c = x1.len();
    let mut f = vec![0.0; 3 * c];
    symmetric_into(x1, x2, x3, &mut f);
    f
}

#[inline]
fn relu(a: f64) -> f64 {
    if a > 0.0 {
        a
    } else {
        0.0
    }
}

fn symmetric_into(x1: &[f64], x2: &[f64], x3: &[f64], f: &mut [f64]) {
    let c = x1.len();
    for k in 0..c {
        let (a, b, d) = (x1[k], x2[k], x3[k]);
        f[k] = a + b + d;
        f[c + k] = relu(a - b) + relu(b - d) + relu(d - a);
        f[2 * c + k] = relu(b - a) + relu(d - b) + relu(a - d);
    }
}

fn concat3(a: &Tensor, b: &Tensor, c: &Tensor) -> Tensor {
    let (n, ci) = a.shape();
    let mut out = Tensor::zeros(n, 3 * ci);
    for r in 0..n {
        let o = out.row_mut(r);
        o[..ci].copy_from_slice(a.row(r));
        o[ci..2 * ci].copy_from_slice(b.row(r));
        o[2 * ci..].copy_from_slice(c.row(r));
    }
    out
}

fn forward_core(
    kind: DualConvKind,
    source: Source,
    center: Tensor,
    gathered: [Tensor; 3],
    params: &DualConvParams,
) -> Result<(Tensor, DualConvState)> {
    params.check()?;
    let ci = params.c_in();
    let co = params.c_out();
    center.expect_shape(center.rows(), ci, "dual conv input")?;
    let n = center.rows();

    let mut y = center.matmul_nt(&params.u.value);
    let (rotated, argmax) = match kind {
        DualConvKind::Max => {
            let [g1, g2, g3] = &gathered;
            let rot = [concat3(g1, g2, g3), concat3(g2, g3, g1), concat3(g3, g1, g2)];
            let z: Vec<Tensor> = rot.iter().map(|r| r.matmul_nt(&params.w.value)).collect();
            let mut argmax = vec![0u8; n * co];
            for i in 0..n * co {
                let mut best = 0usize;
                for r in 1..3 {
                    if z[r].data()[i] > z[best].data()[i] {
                        best = r;
                    }
                }
                argmax[i] = best as u8;
                y.data_mut()[i] += z[best].data()[i];
            }
            (Some(rot), argmax)
        }
        DualConvKind::Inv => {
            let mut f = Tensor::zeros(n, 3 * ci);
            for r in 0..n {
                symmetric_into(gathered[0].row(r), gathered[1].row(r), gathered[2].row(r), f.row_mut(r));
            }
            y.add_assign(&f.matmul_nt(&params.w.value));
            (None, Vec::new())
        }
    };
    if let Some(b) = &params.bias {
        y.add_row(b.value.data());
    }
    y.check_finite(kind.name())?;
    Ok((
        y,
        DualConvState {
            kind,
            source,
            center,
            gathered,
            rotated,
            argmax,
        },
    ))
}

pub fn dualconv_forward(
    kind: DualConvKind,
    x: &Tensor,
    dual: &DualGraph,
    params: &DualConvParams,
) -> Result<(Tensor, DualConvState)> {
    if x.rows() != dual.node_count() || x.cols() != params.c_in() {
        return Err(Error::ShapeMismatch(format!(
            "{}: input {}x{}, graph has {} nodes, layer expects {} channels",
            kind.name(),
            x.rows(),
            x.cols(),
            dual.node_count(),
            params.c_in()
        )));
    }
    let gathered = gather_neighbors(x, dual);
    forward_core(kind, Source::Graph(dual.slots().to_vec()), x.clone(), gathered, params)
}

/// Per-slot input with a zero center: row `n` of `slots` holds the three slot
/// features `[s1 s2 s3]` (N x 3C_I). Used for per-neighbor data like dihedrals.
pub fn dualconv_forward_slots(
    kind: DualConvKind,
    slots: &Tensor,
    params: &DualConvParams,
) -> Result<(Tensor, DualConvState)> {
    let ci = params.c_in();
    slots.expect_shape(slots.rows(), 3 * ci, "slot input")?;
    let n = slots.rows();
    let mut gathered = [Tensor::zeros(n, ci), Tensor::zeros(n, ci), Tensor::zeros(n, ci)];
    for r in 0..n {
        for (s, g) in gathered.iter_mut().enumerate() {
            g.row_mut(r).copy_from_slice(&slots.row(r)[s * ci..(s + 1) * ci]);
        }
    }
    forward_core(kind, Source::Slots, Tensor::zeros(n, ci), gathered, params)
}

pub fn dualconv_max_forward(
    x: &Tensor,
    dual: &DualGraph,
    params: &DualConvParams,
) -> Result<(Tensor, DualConvState)> {
    dualconv_forward(DualConvKind::Max, x, dual, params)
}

pub fn dualconv_inv_forward(
    x: &Tensor,
    dual: &DualGraph,
    params: &DualConvParams,
) -> Result<(Tensor, DualConvState)> {
    dualconv_forward(DualConvKind::Inv, x, dual, params)
}

pub fn dualconv_backward(
    dy: &Tensor,
    state: &DualConvState,
    params: &DualConvParams,
) -> Result<DualConvGrads> {
    let ci = params.c_in();
    let co = params.c_out();
    let n = state.center.rows();
    dy.expect_shape(n, co, "dual conv upstream gradient")?;

    let mut du = Tensor::zeros(co, ci);
    dy.matmul_tn_into(&state.center, &mut du);
    let mut dbias = vec![0.0; co];
    dy.sum_rows_into(&mut dbias);
    let mut dw = Tensor::zeros(co, 3 * ci);
    let mut dn = [Tensor::zeros(n, ci), Tensor::zeros(n, ci), Tensor::zeros(n, ci)];

    match state.kind {
        DualConvKind::Max => {
            let rot = state.rotated.as_ref().ok_or(Error::StateMissing("dualconvmax"))?;
            for (r, xr) in rot.iter().enumerate() {
                let mut dz = Tensor::zeros(n, co);
                for (i, (d, &w)) in dz.data_mut().iter_mut().zip(&state.argmax).enumerate() {
                    if w as usize == r {
                        *d = dy.data()[i];
                    }
                }
                dz.matmul_tn_into(xr, &mut dw);
                let dcat = dz.matmul(&params.w.value);
                // block k of rotation r reads slot (r + k) % 3
                for node in 0..n {
                    let src = dcat.row(node);
                    for k in 0..3 {
                        let dst = dn[(r + k) % 3].row_mut(node);
                        for (a, b) in dst.iter_mut().zip(&src[k * ci..(k + 1) * ci]) {
                            *a += b;
                        }
                    }
                }
            }
        }
        DualConvKind::Inv => {
            let mut f = Tensor::zeros(n, 3 * ci);
            for r in 0..n {
                symmetric_into(
                    state.gathered[0].row(r),
                    state.gathered[1].row(r),
                    state.gathered[2].row(r),
                    f.row_mut(r),
                );
            }
            dy.matmul_tn_into(&f, &mut dw);
            let df = dy.matmul(&params.w.value);
            let step = |d: f64| if d > 0.0 { 1.0 } else { 0.0 };
            for node in 0..n {
                let g = df.row(node);
                let (x1, x2, x3) = (
                    state.gathered[0].row(node),
                    state.gathered[1].row(node),
                    state.gathered[2].row(node),
                );
                for k in 0..ci {
                    let (a, b, c) = (x1[k], x2[k], x3[k]);
                    let (g1, g2, g3) = (g[k], g[ci + k], g[2 * ci + k]);
                    // sum term
                    let mut d = [g1, g1, g1];
                    // [x1-x2]+ + [x2-x3]+ + [x3-x1]+
                    let (p12, p23, p31) = (step(a - b), step(b - c), step(c - a));
                    d[0] += g2 * (p12 - p31);
                    d[1] += g2 * (p23 - p12);
                    d[2] += g2 * (p31 - p23);
                    // [x2-x1]+ + [x3-x2]+ + [x1-x3]+
                    let (q21, q32, q13) = (step(b - a), step(c - b), step(a - c));
                    d[0] += g3 * (q13 - q21);
                    d[1] += g3 * (q21 - q32);
                    d[2] += g3 * (q32 - q13);
                    for s in 0..3 {
                        dn[s].row_mut(node)[k] += d[s];
                    }
                }
            }
        }
    }

    let dx = match &state.source {
        Source::Graph(slots) => {
            let mut dx = dy.matmul(&params.u.value);
            for (node, sl) in slots.iter().enumerate() {
                for (s, slot) in sl.iter().enumerate() {
                    if let Some(j) = slot {
                        let src = dn[s].row(node).to_vec();
                        for (a, b) in dx.row_mut(*j).iter_mut().zip(&src) {
                            *a += b;
                        }
                    }
                }
            }
            dx
        }
        Source::Slots => {
            let mut dx = Tensor::zeros(n, 3 * ci);
            for node in 0..n {
                for (s, g) in dn.iter().enumerate() {
                    dx.row_mut(node)[s * ci..(s + 1) * ci].copy_from_slice(g.row(node));
                }
            }
            dx
        }
    };
    Ok(DualConvGrads { dx, du, dw, dbias })
}

pub fn dualconv_max_backward(
    dy: &Tensor,
    state: &DualConvState,
    params: &DualConvParams,
) -> Result<DualConvGrads> {
    if state.kind != DualConvKind::Max {
        return Err(Error::StateMissing("dualconvmax"));
    }
    dualconv_backward(dy, state, params)
}

pub fn dualconv_inv_backward(
    dy: &Tensor,
    state: &DualConvState,
    params: &DualConvParams,
) -> Result<DualConvGrads> {
    if state.kind != DualConvKind::Inv {
        return Err(Error::StateMissing("dualconvinv"));
    }
    dualconv_backward(dy, state, params)
}

/// Stateful layer wrapper that accumulates into its own gradient buffers.
#[derive(Clone, Debug)]
pub struct DualConv {
    pub kind: DualConvKind,
    pub params: DualConvParams,
    state: Option<DualConvState>,
}

impl DualConv {
    pub fn new(kind: DualConvKind, params: DualConvParams) -> Self {
        Self {
            kind,
            params,
            state: None,
        }
    }

    pub fn forward(&mut self, x: &Tensor, dual: &DualGraph) -> Result<Tensor> {
        let (y, s) = dualconv_forward(self.kind, x, dual, &self.params)?;
        self.state = Some(s);
        Ok(y)
    }

    pub fn forward_slots(&mut self, slots: &Tensor) -> Result<Tensor> {
        let (y, s) = dualconv_forward_slots(self.kind, slots, &self.params)?;
        self.state = Some(s);
        Ok(y)
    }

    pub fn backward(&mut self, dy: &Tensor) -> Result<Tensor> {
        let state = self.state.take().ok_or(Error::StateMissing(self.kind.name()))?;
        let g = dualconv_backward(dy, &state, &self.params)?;
        self.params.u.grad.add_assign(&g.du);
        self.params.w.grad.add_assign(&g.dw);
        if let Some(b) = &mut self.params.bias {
            for (a, d) in b.grad.data_mut().iter_mut().zip(&g.dbias) {
                *a += d;
            }
        }
        Ok(g.dx)
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut v = vec![&mut self.params.u, &mut self.params.w];
        if let Some(b) = &mut self.params.bias {
            v.push(b);
        }
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dual::build_dual;
    use crate::mesh::primitives;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn dot(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    }

    fn random(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Tensor {
        Tensor::from_vec(rows, cols, (0..rows * cols).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .unwrap()
    }

    #[test]
    fn equal_neighbors_collapse_rotations() {
        // one node whose three slots all point at the same feature row
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = random(4, 2, &mut rng);
        let dual = DualGraph::from_slots(vec![
            [Some(1), Some(2), Some(3)],
            [Some(0), None, None],
            [Some(0), None, None],
            [Some(0), None, None],
        ])
        .unwrap();
        let mut x = x;
        let c = x.row(1).to_vec();
        x.row_mut(2).copy_from_slice(&c);
        x.row_mut(3).copy_from_slice(&c);
        let p = DualConvParams::init(2, 3, true, &mut rng);
        let (y, _) = dualconv_max_forward(&x, &dual, &p).unwrap();
        let cat: Vec<f64> = [c.clone(), c.clone(), c.clone()].concat();
        for o in 0..3 {
            let expect = dot(p.u.value.row(o), x.row(0))
                + dot(p.w.value.row(o), &cat);
            assert!((y.get(0, o) - expect).abs() < 1e-12);
        }
        let (yi, _) = dualconv_inv_forward(&x, &dual, &p).unwrap();
        let f: Vec<f64> = [c.iter().map(|v| 3.0 * v).collect::<Vec<_>>(), vec![0.0; 4]].concat();
        for o in 0..3 {
            let expect = dot(p.u.value.row(o), x.row(0))
                + dot(p.w.value.row(o), &f);
            assert!((yi.get(0, o) - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_weights_yield_bias() {
        let dual = build_dual(&primitives::tetrahedron()).unwrap();
        let mut p = DualConvParams::zeros(2, 3, true);
        p.bias.as_mut().unwrap().value = Tensor::from_vec(1, 3, vec![0.5, -1.0, 2.0]).unwrap();
        let x = Tensor::filled(4, 2, 7.0);
        for kind in [DualConvKind::Max, DualConvKind::Inv] {
            let (y, _) = dualconv_forward(kind, &x, &dual, &p).unwrap();
            for r in 0..4 {
                assert_eq!(y.row(r), &[0.5, -1.0, 2.0]);
            }
        }
    }

    #[test]
    fn symmetric_features_examples() {
        assert_eq!(symmetric_neighbor_features(&[2.0], &[2.0], &[2.0]), vec![6.0, 0.0, 0.0]);
        assert_eq!(symmetric_neighbor_features(&[1.0], &[2.0], &[3.0]), vec![6.0, 2.0, 2.0]);
        let f = symmetric_neighbor_features(&[1.0], &[5.0], &[2.0]);
        let g = symmetric_neighbor_features(&[5.0], &[2.0], &[1.0]);
        assert_eq!(f, g);
        let h = symmetric_neighbor_features(&[5.0], &[1.0], &[2.0]);
        assert_eq!((h[0], h[1], h[2]), (f[0], f[2], f[1]));
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let dual = build_dual(&primitives::icosahedron()).unwrap();
        let x = random(20, 3, &mut rng);
        let p = DualConvParams::init(3, 4, true, &mut rng);
        for kind in [DualConvKind::Max, DualConvKind::Inv] {
            let (_, s) = dualconv_forward(kind, &x, &dual, &p).unwrap();
            let g = dualconv_backward(&Tensor::zeros(20, 4), &s, &p).unwrap();
            assert_eq!(g.dx.max_abs() + g.du.max_abs() + g.dw.max_abs(), 0.0);
            assert!(g.dbias.iter().all(|v| *v == 0.0));
        }
    }

    #[test]
    fn all_pad_node_only_uses_center_weights() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let dual = build_dual(&primitives::single_triangle()).unwrap();
        let x = random(1, 2, &mut rng);
        let p = DualConvParams::init(2, 3, false, &mut rng);
        let dy = random(1, 3, &mut rng);
        for kind in [DualConvKind::Max, DualConvKind::Inv] {
            let (_, s) = dualconv_forward(kind, &x, &dual, &p).unwrap();
            let g = dualconv_backward(&dy, &s, &p).unwrap();
            assert_eq!(g.dx, dy.matmul(&p.u.value));
            assert_eq!(g.dw.max_abs(), 0.0);
        }
    }

    #[test]
    fn wrong_kind_backward_is_rejected() {
        let dual = build_dual(&primitives::tetrahedron()).unwrap();
        let p = DualConvParams::zeros(1, 1, true);
        let (_, s) = dualconv_inv_forward(&Tensor::zeros(4, 1), &dual, &p).unwrap();
        assert!(matches!(
            dualconv_max_backward(&Tensor::zeros(4, 1), &s, &p),
            Err(Error::StateMissing(_))
        ));
        let mut layer = DualConv::new(DualConvKind::Max, p);
        assert!(matches!(layer.backward(&Tensor::zeros(4, 1)), Err(Error::StateMissing(_))));
    }

    #[test]
    fn shape_mismatch() {
        let dual = build_dual(&primitives::tetrahedron()).unwrap();
        let p = DualConvParams::zeros(2, 1, true);
        assert!(matches!(
            dualconv_max_forward(&Tensor::zeros(4, 3), &dual, &p),
            Err(Error::ShapeMismatch(_))
        ));
        assert!(matches!(
            dualconv_max_forward(&Tensor::zeros(5, 2), &dual, &p),
            Err(Error::ShapeMismatch(_))
        ));
    }

    #[test]
    fn inv_scalar_hand_derivative() {
        // C_I = C_O = 1, U = 2, W = [1, 3, -1], no bias; node 0 sees (1, 2, 4)
        // through slots. f = (7, [1-2]+ + [2-4]+ + [4-1]+, [2-1]+ + [4-2]+ + [1-4]+) = (7, 3, 3)
        // y = 2*x0 + 7 + 9 - 3.
        let slots = Tensor::from_vec(1, 3, vec![1.0, 2.0, 4.0]).unwrap();
        let mut p = DualConvParams::zeros(1, 1, false);
        p.u.value.set(0, 0, 2.0);
        p.w.value = Tensor::from_vec(1, 3, vec![1.0, 3.0, -1.0]).unwrap();
        let (y, s) = dualconv_forward_slots(DualConvKind::Inv, &slots, &p).unwrap();
        assert_eq!(y.get(0, 0), 13.0);
        let g = dualconv_backward(&Tensor::filled(1, 1, 1.0), &s, &p).unwrap();
        // dy/dx1 = 1 + 3*(0 - 0) - (0 - 1)... spelled out:
        // component 2 = [x3-x1]+ active: d/dx1 = -1, d/dx3 = +1 (scaled by 3)
        // component 3 = [x2-x1]+ + [x3-x2]+ active: d/dx1 = -1, d/dx3 = +1 (scaled by -1)
        // x1: 1 - 3 + 1 = -1; x2: 1 + 0 + 0 = 1; x3: 1 + 3 - 1 = 3
        assert_eq!(g.dx.data(), &[-1.0, 1.0, 3.0]);
        assert_eq!(g.dw.data(), &[7.0, 3.0, 3.0]);
        assert_eq!(g.du.data(), &[0.0]);
    }
}
