//! Procedural test meshes. All closed meshes are wound so normals point outward.

use std::collections::HashMap;
use std::f64::consts::PI;

use super::Mesh;
use crate::geom::{self, Vec3};

pub fn single_triangle() -> Mesh {
    Mesh::new(
        vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]],
        vec![[0, 1, 2]],
    )
    .expect("valid triangle")
}

/// Regular tetrahedron inscribed in the cube [-1, 1]^3.
pub fn tetrahedron() -> Mesh {
    Mesh::new(
        vec![
            [1.0, 1.0, 1.0],
            [1.0, -1.0, -1.0],
            [-1.0, 1.0, -1.0],
            [-1.0, -1.0, 1.0],
        ],
        vec![[0, 1, 2], [0, 2, 3], [0, 3, 1], [1, 3, 2]],
    )
    .expect("valid tetrahedron")
}

fn icosahedron_raw() -> (Vec<Vec3>, Vec<[usize; 3]>) {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let raw = [
        [-1.0, t, 0.0],
        [1.0, t, 0.0],
        [-1.0, -t, 0.0],
        [1.0, -t, 0.0],
        [0.0, -1.0, t],
        [0.0, 1.0, t],
        [0.0, -1.0, -t],
        [0.0, 1.0, -t],
        [t, 0.0, -1.0],
        [t, 0.0, 1.0],
        [-t, 0.0, -1.0],
        [-t, 0.0, 1.0],
    ];
    let vertices = raw
        .iter()
        .map(|&v| geom::normalize(v).unwrap())
        .collect();
    let faces = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    (vertices, faces)
}

/// Regular icosahedron with circumradius 1.
pub fn icosahedron() -> Mesh {
    let (v, f) = icosahedron_raw();
    Mesh::new(v, f).expect("valid icosahedron")
}

/// Unit icosphere: the icosahedron split `level` times (4x faces per level)
/// with every vertex projected onto the unit sphere.
///
/// Level 2 has 162 vertices / 320 faces; level 3 has 642 / 1280.
pub fn icosphere(level: u32) -> Mesh {
    let (mut vertices, mut faces) = icosahedron_raw();
    for _ in 0..level {
        let mut midpoints: HashMap<(usize, usize), usize> = HashMap::new();
        let mut midpoint = |a: usize, b: usize, vertices: &mut Vec<Vec3>| -> usize {
            let key = super::edge_key(a, b);
            *midpoints.entry(key).or_insert_with(|| {
                let m = geom::scale(geom::add(vertices[a], vertices[b]), 0.5);
                vertices.push(geom::normalize(m).unwrap());
                vertices.len() - 1
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for &[a, b, c] in &faces {
            let ab = midpoint(a, b, &mut vertices);
            let bc = midpoint(b, c, &mut vertices);
            let ca = midpoint(c, a, &mut vertices);
            next.push([a, ab, ca]);
            next.push([b, bc, ab]);
            next.push([c, ca, bc]);
            next.push([ab, bc, ca]);
        }
        faces = next;
    }
    Mesh::new(vertices, faces).expect("valid icosphere")
}

/// Torus around the z axis with `rings` segments along the tube's sweep and
/// `sides` around its cross-section.
pub fn torus(major: f64, minor: f64, rings: usize, sides: usize) -> Mesh {
    assert!(rings >= 3 && sides >= 3, "torus needs at least 3 segments each way");
    let idx = |i: usize, j: usize| (i % rings) * sides + (j % sides);
    let mut vertices = Vec::with_capacity(rings * sides);
    for i in 0..rings {
        let u = 2.0 * PI * i as f64 / rings as f64;
        for j in 0..sides {
            let v = 2.0 * PI * j as f64 / sides as f64;
            let r = major + minor * v.cos();
            vertices.push([r * u.cos(), r * u.sin(), minor * v.sin()]);
        }
    }
    let mut faces = Vec::with_capacity(2 * rings * sides);
    for i in 0..rings {
        for j in 0..sides {
            let (a, b, c, d) = (idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1));
            faces.push([a, b, c]);
            faces.push([a, c, d]);
        }
    }
    Mesh::new(vertices, faces).expect("valid torus")
}

/// The watertight meshes used by regularity and stochasticity checks.
pub fn closed_corpus() -> Vec<(&'static str, Mesh)> {
    vec![
        ("tetrahedron", tetrahedron()),
        ("icosahedron", icosahedron()),
        ("icosphere-1", icosphere(1)),
        ("icosphere-2", icosphere(2)),
        ("icosphere-3", icosphere(3)),
        ("torus", torus(1.0, 0.35, 24, 12)),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_outward(m: &Mesh, center: Vec3) {
        for f in 0..m.face_count() {
            let [a, b, c] = m.face_positions(f);
            let centroid = geom::scale(geom::add(geom::add(a, b), c), 1.0 / 3.0);
            let n = m.face_cross(f);
            assert!(geom::dot(n, geom::sub(centroid, center)) > 0.0, "face {f} points inward");
        }
    }

    #[test]
    fn platonic_solids_point_outward() {
        assert_outward(&tetrahedron(), [0.0; 3]);
        assert_outward(&icosahedron(), [0.0; 3]);
        assert_outward(&icosphere(3), [0.0; 3]);
    }

    #[test]
    fn icosphere_sizes() {
        let m = icosphere(2);
        assert_eq!((m.vertex_count(), m.face_count()), (162, 320));
        let m = icosphere(3);
        assert_eq!((m.vertex_count(), m.face_count()), (642, 1280));
        assert_eq!(m.inconsistent_winding_edges(), 0);
    }

    #[test]
    fn torus_is_genus_one() {
        let m = torus(1.0, 0.3, 16, 8);
        assert!(m.is_watertight());
        assert_eq!(m.euler_characteristic(), 0);
        assert_eq!(m.inconsistent_winding_edges(), 0);
        // Outward relative to the tube's core circle.
        for f in 0..m.face_count() {
            let [a, b, c] = m.face_positions(f);
            let p = geom::scale(geom::add(geom::add(a, b), c), 1.0 / 3.0);
            let rho = (p[0] * p[0] + p[1] * p[1]).sqrt();
            let core = [p[0] / rho, p[1] / rho, 0.0];
            assert!(geom::dot(m.face_cross(f), geom::sub(p, core)) > 0.0);
        }
    }
}
