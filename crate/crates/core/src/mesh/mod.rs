//! Triangular meshes: validation, edge/face incidence and file IO.

mod io;
pub mod primitives;

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::geom::{self, Vec3};

pub use io::{load_mesh, read_labels, save_mesh, write_labels, MeshFormat};

/// Per-vertex correspondence label; `None` marks an unlabeled vertex.
pub type Label = Option<usize>;

/// Sentinel for "no face" in [`Edge::faces`].
pub const NO_FACE: usize = usize::MAX;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Edge {
    /// Endpoints with `verts[0] < verts[1]`.
    pub verts: [usize; 2],
    /// Incident faces; the second slot is [`NO_FACE`] on a boundary edge.
    pub faces: [usize; 2],
}

impl Edge {
    pub fn is_boundary(&self) -> bool {
        self.faces[1] == NO_FACE
    }

    /// The face on the other side of `face`, if any.
    pub fn opposite(&self, face: usize) -> Option<usize> {
        let other = if self.faces[0] == face {
            self.faces[1]
        } else {
            self.faces[0]
        };
        (other != NO_FACE).then_some(other)
    }
}

/// Undirected edges with their incident faces, plus each face's edges in
/// winding order: edge `k` of face `f` joins `f[k]` and `f[(k + 1) % 3]`.
#[derive(Clone, Debug, Default)]
pub struct EdgeFaceIndex {
    edges: Vec<Edge>,
    lookup: HashMap<(usize, usize), usize>,
    face_edges: Vec<[usize; 3]>,
}

impl EdgeFaceIndex {
    fn build(faces: &[[usize; 3]]) -> Result<Self> {
        let mut edges: Vec<Edge> = Vec::with_capacity(faces.len() * 3 / 2 + 3);
        let mut lookup = HashMap::with_capacity(faces.len() * 2);
        let mut face_edges = Vec::with_capacity(faces.len());
        let mut overfull: Vec<(usize, usize)> = Vec::new();

        for (fi, f) in faces.iter().enumerate() {
            let mut ids = [0usize; 3];
            for k in 0..3 {
                let key = edge_key(f[k], f[(k + 1) % 3]);
                let id = *lookup.entry(key).or_insert_with(|| {
                    edges.push(Edge {
                        verts: [key.0, key.1],
                        faces: [NO_FACE, NO_FACE],
                    });
                    edges.len() - 1
                });
                let e = &mut edges[id];
                if e.faces[0] == NO_FACE {
                    e.faces[0] = fi;
                } else if e.faces[1] == NO_FACE {
                    e.faces[1] = fi;
                } else if !overfull.contains(&key) {
                    overfull.push(key);
                }
                ids[k] = id;
            }
            face_edges.push(ids);
        }
        if !overfull.is_empty() {
            overfull.sort_unstable();
            return Err(Error::NonManifold(overfull));
        }
        Ok(Self {
            edges,
            lookup,
            face_edges,
        })
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn face_edges(&self, face: usize) -> [usize; 3] {
        self.face_edges[face]
    }

    pub fn find(&self, a: usize, b: usize) -> Option<&Edge> {
        self.lookup.get(&edge_key(a, b)).map(|&i| &self.edges[i])
    }

    pub fn interior_edge_count(&self) -> usize {
        self.edges.iter().filter(|e| !e.is_boundary()).count()
    }
}

#[inline]
pub fn edge_key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

/// A validated triangular mesh. Immutable after construction.
#[derive(Clone, Debug)]
pub struct Mesh {
    vertices: Vec<Vec3>,
    faces: Vec<[usize; 3]>,
    labels: Option<Vec<Label>>,
    index: EdgeFaceIndex,
}

impl PartialEq for Mesh {
    fn eq(&self, other: &Self) -> bool {
        self.vertices == other.vertices && self.faces == other.faces && self.labels == other.labels
    }
}

impl Mesh {
    /// Builds and validates a mesh. Faces keep their winding.
    pub fn new(vertices: Vec<Vec3>, faces: Vec<[usize; 3]>) -> Result<Self> {
        let nv = vertices.len();
        for (i, v) in vertices.iter().enumerate() {
            if v.iter().any(|c| !c.is_finite()) {
                return Err(Error::Validation(format!("vertex {i} has a non-finite coordinate")));
            }
        }
        let mut seen = HashMap::with_capacity(faces.len());
        for (fi, f) in faces.iter().enumerate() {
            if let Some(&bad) = f.iter().find(|&&v| v >= nv) {
                return Err(Error::Validation(format!(
                    "face {fi} references vertex {bad}, but the mesh has {nv} vertices"
                )));
            }
            if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
                return Err(Error::Validation(format!(
                    "face {fi} repeats a vertex: {} {} {}",
                    f[0], f[1], f[2]
                )));
            }
            let mut key = *f;
            key.sort_unstable();
            if let Some(prev) = seen.insert(key, fi) {
                return Err(Error::Validation(format!("face {fi} duplicates face {prev}")));
            }
        }
        let index = EdgeFaceIndex::build(&faces)?;
        let mesh = Self {
            vertices,
            faces,
            labels: None,
            index,
        };
        let flipped = mesh.inconsistent_winding_edges();
        if flipped > 0 {
            log::warn!(
                "{flipped} edge(s) are traversed in the same direction by both incident faces; \
                 normals of those faces are inconsistent"
            );
        }
        Ok(mesh)
    }

    /// Attaches per-vertex labels.
    pub fn with_labels(mut self, labels: Vec<Label>) -> Result<Self> {
        if labels.len() != self.vertices.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} labels for {} vertices",
                labels.len(),
                self.vertices.len()
            )));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    pub fn labels(&self) -> Option<&[Label]> {
        self.labels.as_deref()
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    pub fn edge_count(&self) -> usize {
        self.index.edge_count()
    }

    pub fn edge_index(&self) -> &EdgeFaceIndex {
        &self.index
    }

    /// V - E + F.
    pub fn euler_characteristic(&self) -> i64 {
        self.vertex_count() as i64 - self.edge_count() as i64 + self.face_count() as i64
    }

    /// True iff every undirected edge has exactly two incident faces.
    pub fn is_watertight(&self) -> bool {
        !self.faces.is_empty() && self.index.edges.iter().all(|e| !e.is_boundary())
    }

    pub fn face_positions(&self, face: usize) -> [Vec3; 3] {
        let f = self.faces[face];
        [self.vertices[f[0]], self.vertices[f[1]], self.vertices[f[2]]]
    }

    /// Unnormalized `(v1 - v0) x (v2 - v0)`; its length is twice the area.
    pub fn face_cross(&self, face: usize) -> Vec3 {
        let [a, b, c] = self.face_positions(face);
        geom::cross(geom::sub(b, a), geom::sub(c, a))
    }

    /// Faces incident to each vertex, in ascending face order.
    pub fn vertex_faces(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.vertices.len()];
        for (fi, f) in self.faces.iter().enumerate() {
            for &v in f {
                out[v].push(fi);
            }
        }
        out
    }

    /// Sorted vertex neighbors along edges.
    pub fn vertex_neighbors(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.vertices.len()];
        for e in &self.index.edges {
            out[e.verts[0]].push(e.verts[1]);
            out[e.verts[1]].push(e.verts[0]);
        }
        for n in &mut out {
            n.sort_unstable();
        }
        out
    }

    pub fn surface_area(&self) -> f64 {
        (0..self.faces.len())
            .map(|f| 0.5 * geom::norm(self.face_cross(f)))
            .sum()
    }

    /// Applies `x -> m x + t` to every vertex; connectivity is unchanged.
    pub fn transformed(&self, m: &[[f64; 3]; 3], t: Vec3) -> Mesh {
        let mut out = self.clone();
        for v in &mut out.vertices {
            *v = geom::add(geom::mat_vec(m, *v), t);
        }
        out
    }

    /// Mirror through the yz-plane with reversed winding, so normals stay outward.
    pub fn mirrored_x(&self) -> Mesh {
        let mut out = self.clone();
        for v in &mut out.vertices {
            v[0] = -v[0];
        }
        out.faces = self.faces.iter().map(|f| [f[0], f[2], f[1]]).collect();
        out.index = EdgeFaceIndex::build(&out.faces).expect("mirroring preserves manifoldness");
        out
    }

    /// Number of interior edges whose two faces traverse it in the same direction.
    pub fn inconsistent_winding_edges(&self) -> usize {
        self.index
            .edges
            .iter()
            .filter(|e| !e.is_boundary())
            .filter(|e| {
                let d0 = self.directed(e.faces[0], e.verts);
                let d1 = self.directed(e.faces[1], e.verts);
                d0 == d1
            })
            .count()
    }

    // True if `face` traverses the edge from verts[0] to verts[1].
    fn directed(&self, face: usize, verts: [usize; 2]) -> bool {
        let f = self.faces[face];
        (0..3).any(|k| f[k] == verts[0] && f[(k + 1) % 3] == verts[1])
    }
}

#[cfg(test)]
mod tests {
    use super::primitives::*;
    use super::*;

    #[test]
    fn tetrahedron_counts() {
        let m = tetrahedron();
        assert_eq!((m.vertex_count(), m.face_count(), m.edge_count()), (4, 4, 6));
        assert!(m.is_watertight());
        assert_eq!(m.euler_characteristic(), 2);
    }

    #[test]
    fn icosahedron_counts() {
        let m = icosahedron();
        assert_eq!((m.vertex_count(), m.face_count(), m.edge_count()), (12, 20, 30));
        assert_eq!(m.euler_characteristic(), 2);
        assert_eq!(m.inconsistent_winding_edges(), 0);
    }

    #[test]
    fn watertightness() {
        assert!(!single_triangle().is_watertight());
        let t = tetrahedron();
        let open = Mesh::new(t.vertices().to_vec(), t.faces()[1..].to_vec()).unwrap();
        assert!(!open.is_watertight());
    }

    #[test]
    fn two_e_equals_three_f_on_closed_meshes() {
        for m in [tetrahedron(), icosahedron(), icosphere(2), torus(1.0, 0.4, 12, 8)] {
            assert!(m.is_watertight());
            assert_eq!(2 * m.edge_count(), 3 * m.face_count());
        }
    }

    #[test]
    fn rejects_out_of_range_and_repeated_indices() {
        let v = vec![[0.0; 3], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]];
        assert!(matches!(Mesh::new(v.clone(), vec![[0, 1, 3]]), Err(Error::Validation(_))));
        assert!(matches!(Mesh::new(v.clone(), vec![[0, 1, 1]]), Err(Error::Validation(_))));
        assert!(matches!(
            Mesh::new(v, vec![[0, 1, 2], [2, 1, 0]]),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn rejects_non_manifold_edge() {
        let v = vec![
            [0.0, 0.0, 0.0],
            [1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [0.0, -1.0, 0.0],
            [0.0, 0.0, 1.0],
        ];
        let err = Mesh::new(v, vec![[0, 1, 2], [1, 0, 3], [0, 1, 4]]).unwrap_err();
        match err {
            Error::NonManifold(edges) => assert_eq!(edges, vec![(0, 1)]),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn mirror_keeps_consistent_winding() {
        let m = icosphere(1).mirrored_x();
        assert_eq!(m.inconsistent_winding_edges(), 0);
        let flipped = Mesh::new(
            tetrahedron().vertices().to_vec(),
            {
                let mut f = tetrahedron().faces().to_vec();
                f[0] = [f[0][0], f[0][2], f[0][1]];
                f
            },
        )
        .unwrap();
        assert_eq!(flipped.inconsistent_winding_edges(), 3);
    }
}
