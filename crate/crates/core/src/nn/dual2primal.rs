use super::Tensor;
use crate::error::{Error, Result};
use crate::mesh::Mesh;

/// Row-normalized vertex-face incidence `D^-1 A`: each vertex averages the
/// features of the faces it belongs to.
#[derive(Clone, Debug, PartialEq)]
pub struct Dual2PrimalOp {
    /// Incident faces per vertex (the nonzeros of row `v` of `A`).
    vertex_faces: Vec<Vec<usize>>,
    face_count: usize,
}

impl Dual2PrimalOp {
    pub fn new(mesh: &Mesh) -> Result<Self> {
        let vertex_faces = mesh.vertex_faces();
        if let Some(v) = vertex_faces.iter().position(Vec::is_empty) {
            return Err(Error::IsolatedVertex(v));
        }
        Ok(Self {
            vertex_faces,
            face_count: mesh.face_count(),
        })
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_faces.len()
    }

    pub fn face_count(&self) -> usize {
        self.face_count
    }

    /// Diagonal of `D`.
    pub fn degree(&self, vertex: usize) -> usize {
        self.vertex_faces[vertex].len()
    }

    pub fn incident_faces(&self, vertex: usize) -> &[usize] {
        &self.vertex_faces[vertex]
    }

    /// Dense `D^-1 A` (N_V x N_F); meant for checks on small meshes.
    pub fn to_dense(&self) -> Tensor {
        let mut m = Tensor::zeros(self.vertex_count(), self.face_count);
        for (v, faces) in self.vertex_faces.iter().enumerate() {
            let w = 1.0 / faces.len() as f64;
            for &f in faces {
                m.set(v, f, w);
            }
        }
        m
    }
}

pub fn dual2primal(f_dual: &Tensor, op: &Dual2PrimalOp) -> Result<Tensor> {
    f_dual.expect_shape(op.face_count, f_dual.cols(), "dual2primal input")?;
    let c = f_dual.cols();
    let mut out = Tensor::zeros(op.vertex_count(), c);
    for (v, faces) in op.vertex_faces.iter().enumerate() {
        let w = 1.0 / faces.len() as f64;
        let o = out.row_mut(v);
        for &f in faces {
            for (a, b) in o.iter_mut().zip(f_dual.row(f)) {
                *a += b;
            }
        }
        o.iter_mut().for_each(|a| *a *= w);
    }
    Ok(out)
}

/// Transpose map: `(D^-1 A)^T dF_primal`.
pub fn dual2primal_backward(d_primal: &Tensor, op: &Dual2PrimalOp) -> Result<Tensor> {
    d_primal.expect_shape(op.vertex_count(), d_primal.cols(), "dual2primal gradient")?;
    let c = d_primal.cols();
    let mut out = Tensor::zeros(op.face_count, c);
    for (v, faces) in op.vertex_faces.iter().enumerate() {
        let w = 1.0 / faces.len() as f64;
        let g = d_primal.row(v);
        for &f in faces {
            for (a, b) in out.row_mut(f).iter_mut().zip(g) {
                *a += w * b;
            }
        }
    }
    Ok(out)
}
