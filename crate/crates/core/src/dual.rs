//! The face-dual graph: one node per triangle, three ordered neighbor slots.
//!
//! Slots are filled clockwise as seen from outside the surface (looking
//! along the face's negative normal), starting with the face across the first
//! winding edge `(face[0], face[1])`. Boundary faces get trailing `None`
//! (PAD) slots which every layer reads as zero features.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::geom::{self, Vec3};
use crate::mesh::Mesh;

/// A neighbor slot: `Some(node)` or `None` for padding.
pub type Slot = Option<usize>;

#[derive(Clone, Debug, PartialEq)]
pub struct DualGraph {
    neighbors: Vec<[Slot; 3]>,
    centers: Vec<Vec3>,
}

impl DualGraph {
    /// Builds a graph from explicit slot triples. Centers default to zero.
    pub fn from_slots(neighbors: Vec<[Slot; 3]>) -> Result<Self> {
        let n = neighbors.len();
        for (i, slots) in neighbors.iter().enumerate() {
            for s in slots.iter().flatten() {
                if *s >= n || *s == i {
                    return Err(Error::Validation(format!("node {i} has invalid neighbor {s}")));
                }
            }
        }
        Ok(Self {
            centers: vec![[0.0; 3]; n],
            neighbors,
        })
    }

    pub fn node_count(&self) -> usize {
        self.neighbors.len()
    }

    pub fn neighbors(&self, node: usize) -> [Slot; 3] {
        self.neighbors[node]
    }

    pub fn slots(&self) -> &[[Slot; 3]] {
        &self.neighbors
    }

    /// Centroid of the primal face behind each node.
    pub fn centers(&self) -> &[Vec3] {
        &self.centers
    }

    /// Number of undirected dual edges (each counted once).
    pub fn edge_count(&self) -> usize {
        let degree_sum: usize = self
            .neighbors
            .iter()
            .map(|s| s.iter().flatten().count())
            .sum();
        degree_sum / 2
    }

    pub fn pad_count(&self) -> usize {
        self.neighbors
            .iter()
            .map(|s| s.iter().filter(|x| x.is_none()).count())
            .sum()
    }

    /// True iff every node has three distinct real neighbors.
    pub fn is_three_regular(&self) -> bool {
        self.neighbors.iter().all(|s| match s {
            [Some(a), Some(b), Some(c)] => a != b && b != c && a != c,
            _ => false,
        })
    }

    /// `j` in `neighbors(i)` iff `i` in `neighbors(j)`.
    pub fn is_symmetric(&self) -> bool {
        self.neighbors.iter().enumerate().all(|(i, slots)| {
            slots
                .iter()
                .flatten()
                .all(|&j| self.neighbors[j].contains(&Some(i)))
        })
    }

    /// Same graph with every triple cyclically rotated left by `k`.
    pub fn rotated(&self, k: usize) -> Self {
        let mut out = self.clone();
        for s in &mut out.neighbors {
            s.rotate_left(k % 3);
        }
        out
    }

    /// Same graph with every triple's rotational sense reversed, keeping the
    /// first slot: `(a, b, c) -> (a, c, b)`.
    pub fn reversed(&self) -> Self {
        let mut out = self.clone();
        for s in &mut out.neighbors {
            s.swap(1, 2);
        }
        out
    }

    /// One line per node: `node: n0 n1 n2`, with `-1` for PAD.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for (i, s) in self.neighbors.iter().enumerate() {
            let [a, b, c] = s.map(|x| x.map_or(-1, |v| v as i64));
            let _ = writeln!(out, "{i}: {a} {b} {c}");
        }
        out
    }
}

fn check_area(mesh: &Mesh, face: usize) -> Result<()> {
    let [a, b, c] = mesh.face_positions(face);
    let longest = geom::dist(a, b).max(geom::dist(b, c)).max(geom::dist(c, a));
    let twice_area = geom::norm(mesh.face_cross(face));
    if twice_area <= f64::EPSILON * longest * longest || !twice_area.is_finite() {
        return Err(Error::DegenerateFace(face));
    }
    Ok(())
}

/// Neighbors of `face` in clockwise order seen from outside, PAD slots last.
pub fn order_neighbors(mesh: &Mesh, face: usize) -> Result<[Slot; 3]> {
    check_area(mesh, face)?;
    let index = mesh.edge_index();
    let fe = index.face_edges(face);
    // Winding edges run counter-clockwise seen from outside; visiting them
    // as 0, 2, 1 walks clockwise from the start edge.
    let mut out: [Slot; 3] = [None; 3];
    let mut n = 0;
    for k in [0, 2, 1] {
        if let Some(other) = index.edges()[fe[k]].opposite(face) {
            out[n] = Some(other);
            n += 1;
        }
    }
    Ok(out)
}

pub fn build_dual(mesh: &Mesh) -> Result<DualGraph> {
    let mut neighbors = Vec::with_capacity(mesh.face_count());
    let mut centers = Vec::with_capacity(mesh.face_count());
    for f in 0..mesh.face_count() {
        neighbors.push(order_neighbors(mesh, f)?);
        let [a, b, c] = mesh.face_positions(f);
        centers.push(geom::scale(geom::add(geom::add(a, b), c), 1.0 / 3.0));
    }
    Ok(DualGraph { neighbors, centers })
}
