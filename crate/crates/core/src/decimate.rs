//! Shortest-edge-first edge-collapse decimation with quadric vertex placement.

use std::cmp::Ordering;
use std::collections::{BTreeSet, BinaryHeap};

use crate::error::{Error, Result};
use crate::geom::{self, Vec3};
use crate::mesh::{Label, Mesh};

/// Minimizers with a worse 1-norm condition number fall back to the midpoint.
const MAX_CONDITION: f64 = 1e8;
/// Faces whose doubled area falls below this fraction of their longest edge
/// squared count as degenerate.
const DEGENERATE_RATIO: f64 = 1e-10;

/// Symmetric 4x4 error quadric, upper triangle stored row-wise.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
struct Quadric([f64; 10]);

impl Quadric {
    fn plane(n: Vec3, d: f64) -> Self {
        let p = [n[0], n[1], n[2], d];
        let mut q = [0.0; 10];
        let mut k = 0;
        for i in 0..4 {
            for j in i..4 {
                q[k] = p[i] * p[j];
                k += 1;
            }
        }
        Quadric(q)
    }

    fn add(self, o: Self) -> Self {
        let mut q = self.0;
        q.iter_mut().zip(o.0).for_each(|(a, b)| *a += b);
        Quadric(q)
    }

    fn entry(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        // offsets of row starts in the packed upper triangle
        const ROW: [usize; 4] = [0, 4, 7, 9];
        self.0[ROW[i] + j - i]
    }

    fn error(&self, x: Vec3) -> f64 {
        let p = [x[0], x[1], x[2], 1.0];
        let mut e = 0.0;
        for i in 0..4 {
            for j in 0..4 {
                e += p[i] * self.entry(i, j) * p[j];
            }
        }
        e
    }

    /// Point minimizing the quadric, if the 3x3 system is well conditioned.
    fn minimizer(&self) -> Option<Vec3> {
        let a: [[f64; 3]; 3] = std::array::from_fn(|i| std::array::from_fn(|j| self.entry(i, j)));
        let rhs = [-self.entry(0, 3), -self.entry(1, 3), -self.entry(2, 3)];
        let inv = invert3(&a)?;
        let norm1 = |m: &[[f64; 3]; 3]| {
            (0..3)
                .map(|j| (0..3).map(|i| m[i][j].abs()).sum::<f64>())
                .fold(0.0, f64::max)
        };
        if norm1(&a) * norm1(&inv) > MAX_CONDITION {
            return None;
        }
        Some(geom::mat_vec(&inv, rhs))
    }
}

fn invert3(a: &[[f64; 3]; 3]) -> Option<[[f64; 3]; 3]> {
    let c = |r: usize, s: usize| {
        let (r1, r2) = ((r + 1) % 3, (r + 2) % 3);
        let (s1, s2) = ((s + 1) % 3, (s + 2) % 3);
        a[r1][s1] * a[r2][s2] - a[r1][s2] * a[r2][s1]
    };
    let det = a[0][0] * c(0, 0) + a[0][1] * c(0, 1) + a[0][2] * c(0, 2);
    if det == 0.0 || !det.is_finite() {
        return None;
    }
    Some(std::array::from_fn(|i| std::array::from_fn(|j| c(j, i) / det)))
}

/// One collapse, for checking the processing order.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CollapseRecord {
    /// Length of the collapsed edge at the time it was collapsed.
    pub length: f64,
    /// Shortest legal edge in the mesh just before this collapse.
    pub shortest_legal: f64,
}

#[derive(Clone, Debug)]
pub struct Decimation {
    pub mesh: Mesh,
    /// For every input vertex, the output vertex it was merged into.
    pub vertex_map: Vec<usize>,
    pub labels: Option<Vec<Label>>,
    /// Empty unless requested.
    pub trace: Vec<CollapseRecord>,
}

#[derive(Clone, Copy, Debug)]
struct Candidate {
    length: f64,
    a: usize,
    b: usize,
    stamp: (u32, u32),
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Candidate {}
impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Candidate {
    // reversed so BinaryHeap pops the shortest edge, lowest indices first
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .length
            .total_cmp(&self.length)
            .then(other.a.cmp(&self.a))
            .then(other.b.cmp(&self.b))
    }
}

struct State {
    pos: Vec<Vec3>,
    faces: Vec<[usize; 3]>,
    face_alive: Vec<bool>,
    vert_alive: Vec<bool>,
    vert_faces: Vec<Vec<usize>>,
    quadric: Vec<Quadric>,
    version: Vec<u32>,
    labels: Option<Vec<Label>>,
    merged_into: Vec<usize>,
    live_faces: usize,
    live_verts: usize,
}

impl State {
    fn new(mesh: &Mesh, labels: Option<&[Label]>) -> Self {
        let nv = mesh.vertex_count();
        let mut quadric = vec![Quadric::default(); nv];
        for (f, face) in mesh.faces().iter().enumerate() {
            if let Some(n) = geom::normalize(mesh.face_cross(f)) {
                let d = -geom::dot(n, mesh.vertices()[face[0]]);
                let q = Quadric::plane(n, d);
                for &v in face {
                    quadric[v] = quadric[v].add(q);
                }
            }
        }
        Self {
            pos: mesh.vertices().to_vec(),
            faces: mesh.faces().to_vec(),
            face_alive: vec![true; mesh.face_count()],
            vert_alive: vec![true; nv],
            vert_faces: mesh.vertex_faces(),
            quadric,
            version: vec![0; nv],
            labels: labels.map(<[Label]>::to_vec),
            merged_into: (0..nv).collect(),
            live_faces: mesh.face_count(),
            live_verts: nv,
        }
    }

    fn neighbors(&self, v: usize) -> BTreeSet<usize> {
        self.vert_faces[v]
            .iter()
            .flat_map(|&f| self.faces[f])
            .filter(|&u| u != v)
            .collect()
    }

    fn candidate(&self, a: usize, b: usize) -> Candidate {
        let (a, b) = (a.min(b), a.max(b));
        Candidate {
            length: geom::dist(self.pos[a], self.pos[b]),
            a,
            b,
            stamp: (self.version[a], self.version[b]),
        }
    }

    fn is_current(&self, c: &Candidate) -> bool {
        self.vert_alive[c.a]
            && self.vert_alive[c.b]
            && (self.version[c.a], self.version[c.b]) == c.stamp
    }

    fn placement(&self, a: usize, b: usize) -> Vec3 {
        let mid = geom::scale(geom::add(self.pos[a], self.pos[b]), 0.5);
        let len = geom::dist(self.pos[a], self.pos[b]);
        match self.quadric[a].add(self.quadric[b]).minimizer() {
            Some(x) if geom::dist(x, mid) <= len => x,
            _ => mid,
        }
    }

    /// New position of the merged vertex, if collapsing (a, b) keeps the
    /// mesh manifold, non-degenerate and free of flipped faces.
    fn legal_collapse(&self, a: usize, b: usize) -> Option<Vec3> {
        if self.live_verts <= 4 {
            return None;
        }
        let shared = self.vert_faces[a]
            .iter()
            .filter(|f| self.faces[**f].contains(&b))
            .count();
        if shared != 2 {
            return None;
        }
        let na = self.neighbors(a);
        let nb = self.neighbors(b);
        if na.intersection(&nb).count() != 2 {
            return None;
        }
        let x = self.placement(a, b);
        for (v, other) in [(a, b), (b, a)] {
            for &f in &self.vert_faces[v] {
                let face = self.faces[f];
                if face.contains(&other) {
                    continue;
                }
                let p = face.map(|u| self.pos[u]);
                let q = face.map(|u| if u == v { x } else { self.pos[u] });
                let before = geom::cross(geom::sub(p[1], p[0]), geom::sub(p[2], p[0]));
                let after = geom::cross(geom::sub(q[1], q[0]), geom::sub(q[2], q[0]));
                if geom::dot(before, after) <= 0.0 {
                    return None;
                }
                let longest = (0..3)
                    .map(|i| geom::dist(q[i], q[(i + 1) % 3]))
                    .fold(0.0, f64::max);
                if geom::norm(after) <= DEGENERATE_RATIO * longest * longest {
                    return None;
                }
            }
        }
        Some(x)
    }

    /// Merges `b` into `a` at `x`.
    fn collapse(&mut self, a: usize, b: usize, x: Vec3) {
        if let Some(labels) = &mut self.labels {
            let (ea, eb) = (self.quadric[a].error(x), self.quadric[b].error(x));
            if eb < ea {
                labels[a] = labels[b];
            }
        }
        for f in std::mem::take(&mut self.vert_faces[b]) {
            if self.faces[f].contains(&a) {
                self.face_alive[f] = false;
                self.live_faces -= 1;
                for u in self.faces[f] {
                    if u != b {
                        self.vert_faces[u].retain(|&g| g != f);
                    }
                }
            } else {
                for u in self.faces[f].iter_mut() {
                    if *u == b {
                        *u = a;
                    }
                }
                self.vert_faces[a].push(f);
            }
        }
        self.vert_faces[a].sort_unstable();
        self.pos[a] = x;
        self.quadric[a] = self.quadric[a].add(self.quadric[b]);
        self.vert_alive[b] = false;
        self.live_verts -= 1;
        self.merged_into[b] = a;
        self.version[a] += 1;
    }

    fn live_edges(&self) -> BTreeSet<(usize, usize)> {
        let mut out = BTreeSet::new();
        for (f, face) in self.faces.iter().enumerate() {
            if self.face_alive[f] {
                for i in 0..3 {
                    let (u, v) = (face[i], face[(i + 1) % 3]);
                    out.insert((u.min(v), u.max(v)));
                }
            }
        }
        out
    }

    fn shortest_legal(&self) -> f64 {
        self.live_edges()
            .into_iter()
            .filter(|&(u, v)| self.legal_collapse(u, v).is_some())
            .map(|(u, v)| geom::dist(self.pos[u], self.pos[v]))
            .fold(f64::INFINITY, f64::min)
    }

    fn root(&self, mut v: usize) -> usize {
        while self.merged_into[v] != v {
            v = self.merged_into[v];
        }
        v
    }
}

/// Target face count: `fraction` of `faces`, rounded up. Products within
/// 1e-9 of an integer count as that integer (0.3 * 320 is 96, not 97).
pub fn target_face_count(faces: usize, fraction: f64) -> usize {
    (faces as f64 * fraction - 1e-9).ceil().max(0.0) as usize
}

/// Collapses edges until at most `fraction` of the faces remain (within one
/// collapse). Labels attached to `mesh` are carried along.
pub fn decimate(mesh: &Mesh, fraction: f64) -> Result<Mesh> {
    Ok(decimate_with(mesh, mesh.labels(), fraction, false)?.mesh)
}

/// Full decimation. Each collapse keeps the label of the endpoint whose own
/// quadric error at the merged position is smaller; ties keep the surviving
/// (lower-index) endpoint.
pub fn decimate_with(
    mesh: &Mesh,
    labels: Option<&[Label]>,
    fraction: f64,
    record_trace: bool,
) -> Result<Decimation> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::Config(format!("fraction must be in (0, 1], got {fraction}")));
    }
    if let Some(l) = labels {
        if l.len() != mesh.vertex_count() {
            return Err(Error::ShapeMismatch(format!(
                "{} labels for {} vertices",
                l.len(),
                mesh.vertex_count()
            )));
        }
    }
    let target = target_face_count(mesh.face_count(), fraction);
    let mut st = State::new(mesh, labels);
    let mut heap: BinaryHeap<Candidate> = mesh
        .edge_index()
        .edges()
        .iter()
        .map(|e| st.candidate(e.verts[0], e.verts[1]))
        .collect();
    let mut trace = Vec::new();

    // each interior collapse removes two faces
    while st.live_faces >= target + 2 {
        let Some(c) = heap.pop() else {
            return Err(Error::TargetUnreachable {
                reached: st.live_faces,
                target,
            });
        };
        if !st.is_current(&c) {
            continue;
        }
        let Some(x) = st.legal_collapse(c.a, c.b) else {
            continue;
        };
        if record_trace {
            trace.push(CollapseRecord {
                length: c.length,
                shortest_legal: st.shortest_legal(),
            });
        }
        st.collapse(c.a, c.b, x);
        // legality depends on the one-ring, so re-key it too
        let ring = st.neighbors(c.a);
        let mut touched: BTreeSet<(usize, usize)> = BTreeSet::new();
        for &u in ring.iter().chain(std::iter::once(&c.a)) {
            st.version[u] = st.version[u].wrapping_add(u32::from(u != c.a));
            for w in st.neighbors(u) {
                touched.insert((u.min(w), u.max(w)));
            }
        }
        for (u, w) in touched {
            heap.push(st.candidate(u, w));
        }
    }

    let mut new_index = vec![usize::MAX; st.pos.len()];
    let mut vertices = Vec::with_capacity(st.live_verts);
    let mut out_labels = st.labels.as_ref().map(|_| Vec::with_capacity(st.live_verts));
    for v in 0..st.pos.len() {
        if st.vert_alive[v] {
            new_index[v] = vertices.len();
            vertices.push(st.pos[v]);
            if let (Some(out), Some(l)) = (&mut out_labels, &st.labels) {
                out.push(l[v]);
            }
        }
    }
    let faces: Vec<[usize; 3]> = st
        .faces
        .iter()
        .zip(&st.face_alive)
        .filter(|(_, &alive)| alive)
        .map(|(f, _)| f.map(|v| new_index[v]))
        .collect();
    let vertex_map = (0..st.pos.len()).map(|v| new_index[st.root(v)]).collect();
    let mut out = Mesh::new(vertices, faces)?;
    if let Some(l) = &out_labels {
        out = out.with_labels(l.clone())?;
    }
    Ok(Decimation {
        mesh: out,
        vertex_map,
        labels: out_labels,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::primitives;

    #[test]
    fn fraction_one_is_identity() {
        let m = primitives::icosphere(1);
        let d = decimate(&m, 1.0).unwrap();
        assert_eq!(d, m);
    }

    #[test]
    fn halves_icosphere() {
        let m = primitives::icosphere(3);
        let d = decimate_with(&m, None, 0.5, false).unwrap();
        assert!((d.mesh.face_count() as i64 - 640).abs() <= 2);
        assert!(d.mesh.is_watertight());
        assert_eq!(d.mesh.euler_characteristic(), 2);
        assert_eq!(d.mesh.inconsistent_winding_edges(), 0);
        let drift = (d.mesh.surface_area() - m.surface_area()).abs() / m.surface_area();
        assert!(drift < 0.05, "area drift {drift}");
    }

    #[test]
    fn collapses_follow_length_order() {
        let m = primitives::icosphere(2);
        let d = decimate_with(&m, None, 0.5, true).unwrap();
        assert_eq!(d.trace.len(), 80);
        for r in &d.trace {
            assert!(r.length <= r.shortest_legal + 1e-12, "{r:?}");
        }
    }

    #[test]
    fn labels_and_vertex_map_follow_merges() {
        let m = primitives::icosphere(2);
        let labels: Vec<Label> = (0..m.vertex_count()).map(Some).collect();
        let d = decimate_with(&m, Some(&labels), 0.5, false).unwrap();
        let out = d.labels.unwrap();
        assert_eq!(out.len(), d.mesh.vertex_count());
        // every surviving label names one of the input vertices merged into it
        for (v, l) in out.iter().enumerate() {
            let l = l.unwrap();
            assert_eq!(d.vertex_map[l], v);
        }
    }

    #[test]
    fn tetrahedron_cannot_shrink() {
        let m = primitives::tetrahedron();
        assert!(matches!(
            decimate(&m, 0.5),
            Err(Error::TargetUnreachable { reached: 4, target: 2 })
        ));
    }

    #[test]
    fn bad_fraction_rejected() {
        let m = primitives::tetrahedron();
        for f in [0.0, -0.5, 1.5, f64::NAN] {
            assert!(decimate(&m, f).is_err());
        }
    }

    #[test]
    fn quadric_of_three_planes_meets_at_corner() {
        let q = Quadric::plane([1.0, 0.0, 0.0], -1.0)
            .add(Quadric::plane([0.0, 1.0, 0.0], -2.0))
            .add(Quadric::plane([0.0, 0.0, 1.0], 3.0));
        let x = q.minimizer().unwrap();
        assert!(geom::dist(x, [1.0, 2.0, -3.0]) < 1e-12);
        assert!(q.error(x).abs() < 1e-20);
        assert!(Quadric::plane([0.0, 0.0, 1.0], 0.0).minimizer().is_none());
    }
}
