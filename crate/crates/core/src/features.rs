//! Per-face input channels.
//!
//! | channel  | translation | rotation | scale |
//! |----------|:-----------:|:--------:|:-----:|
//! | XYZ      |             |          |       |
//! | Normal   |      x      |          |   x   |
//! | Area     |      x      |    x     |       |
//! | DistCM   |      x      |    x     |       |
//! | Dihedral |      x      |    x     |   x   |

use std::fmt;
use std::str::FromStr;

use crate::dual::DualGraph;
use crate::error::{Error, Result};
use crate::geom::{self, Vec3};
use crate::mesh::Mesh;
use crate::nn::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FeatureKind {
    Xyz,
    Normal,
    Area,
    DistCm,
    Dihedral,
}

impl FeatureKind {
    pub fn name(self) -> &'static str {
        match self {
            FeatureKind::Xyz => "xyz",
            FeatureKind::Normal => "normal",
            FeatureKind::Area => "area",
            FeatureKind::DistCm => "distcm",
            FeatureKind::Dihedral => "dihedral",
        }
    }

    /// Channels contributed per face (per neighbor slot for Dihedral).
    pub fn width(self) -> usize {
        match self {
            FeatureKind::Xyz | FeatureKind::Normal => 3,
            FeatureKind::Area | FeatureKind::DistCm | FeatureKind::Dihedral => 1,
        }
    }

    fn channel_names(self) -> &'static [&'static str] {
        match self {
            FeatureKind::Xyz => &["x", "y", "z"],
            FeatureKind::Normal => &["nx", "ny", "nz"],
            FeatureKind::Area => &["area"],
            FeatureKind::DistCm => &["dist_cm"],
            FeatureKind::Dihedral => &["dihedral0", "dihedral1", "dihedral2"],
        }
    }
}

impl FromStr for FeatureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "xyz" => Ok(FeatureKind::Xyz),
            "normal" => Ok(FeatureKind::Normal),
            "area" => Ok(FeatureKind::Area),
            "distcm" | "dist_cm" => Ok(FeatureKind::DistCm),
            "dihedral" => Ok(FeatureKind::Dihedral),
            other => Err(Error::Config(format!("unknown feature '{other}'"))),
        }
    }
}

/// Ordered, duplicate-free, non-empty set of feature kinds.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FeatureSelection(Vec<FeatureKind>);

impl FeatureSelection {
    pub fn new(kinds: Vec<FeatureKind>) -> Result<Self> {
        if kinds.is_empty() {
            return Err(Error::EmptySelection);
        }
        for (i, k) in kinds.iter().enumerate() {
            if kinds[..i].contains(k) {
                return Err(Error::Config(format!("feature '{}' selected twice", k.name())));
            }
        }
        Ok(Self(kinds))
    }

    pub fn kinds(&self) -> &[FeatureKind] {
        &self.0
    }

    pub fn has_dihedral(&self) -> bool {
        self.0.contains(&FeatureKind::Dihedral)
    }

    /// Width of the per-face tensor (Dihedral excluded).
    pub fn face_width(&self) -> usize {
        self.0
            .iter()
            .filter(|k| **k != FeatureKind::Dihedral)
            .map(|k| k.width())
            .sum()
    }

    /// Width of each per-slot block (0 or 1).
    pub fn slot_width(&self) -> usize {
        usize::from(self.has_dihedral())
    }

    /// Column names for a flattened table: per-face channels in selection
    /// order, with Dihedral's three slots where it was selected.
    pub fn channel_names(&self) -> Vec<&'static str> {
        self.0.iter().flat_map(|k| k.channel_names().iter().copied()).collect()
    }
}

impl fmt::Display for FeatureSelection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<_> = self.0.iter().map(|k| k.name()).collect();
        f.write_str(&names.join(","))
    }
}

impl FromStr for FeatureSelection {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let kinds = s
            .split([',', '+'])
            .filter(|t| !t.trim().is_empty())
            .map(str::parse)
            .collect::<Result<Vec<_>>>()?;
        FeatureSelection::new(kinds)
    }
}

/// Network input for one mesh.
#[derive(Clone, Debug, PartialEq)]
pub struct FaceInput {
    /// N_F x C per-face channels in selection order.
    pub per_face: Tensor,
    /// N_F x 3 dihedral angles, one column per neighbor slot, when selected.
    pub per_slot: Option<Tensor>,
}

impl FaceInput {
    pub fn node_count(&self) -> usize {
        self.per_face.rows()
    }

    /// Flattened table in selection order, as written by the `features` command.
    pub fn to_table(&self, selection: &FeatureSelection) -> Tensor {
        let n = self.per_face.rows();
        let width = selection.channel_names().len();
        let mut out = Tensor::zeros(n, width);
        for r in 0..n {
            let mut col = 0;
            let mut src = 0;
            for k in selection.kinds() {
                if *k == FeatureKind::Dihedral {
                    let slots = self.per_slot.as_ref().expect("dihedral selected");
                    for s in 0..3 {
                        out.set(r, col, slots.get(r, s));
                        col += 1;
                    }
                } else {
                    for _ in 0..k.width() {
                        out.set(r, col, self.per_face.get(r, src));
                        col += 1;
                        src += 1;
                    }
                }
            }
        }
        out
    }
}

pub fn face_centroid(mesh: &Mesh, face: usize) -> Vec3 {
    let [a, b, c] = mesh.face_positions(face);
    geom::scale(geom::add(geom::add(a, b), c), 1.0 / 3.0)
}

pub fn face_normal(mesh: &Mesh, face: usize) -> Result<Vec3> {
    geom::normalize(mesh.face_cross(face)).ok_or(Error::DegenerateFace(face))
}

pub fn face_area(mesh: &Mesh, face: usize) -> f64 {
    0.5 * geom::norm(mesh.face_cross(face))
}

/// Area-weighted mean of face centroids.
pub fn surface_center_of_mass(mesh: &Mesh) -> Vec3 {
    let mut acc = [0.0; 3];
    let mut total = 0.0;
    for f in 0..mesh.face_count() {
        let a = face_area(mesh, f);
        acc = geom::add(acc, geom::scale(face_centroid(mesh, f), a));
        total += a;
    }
    if total > 0.0 {
        geom::scale(acc, 1.0 / total)
    } else {
        acc
    }
}

pub fn dist_to_center_of_mass(mesh: &Mesh, face: usize) -> f64 {
    geom::dist(face_centroid(mesh, face), surface_center_of_mass(mesh))
}

/// Unsigned angles between the face normal and each slot's neighbor normal;
/// 0 for PAD slots.
pub fn dihedral_angles(mesh: &Mesh, dual: &DualGraph, face: usize) -> Result<[f64; 3]> {
    let n0 = face_normal(mesh, face)?;
    let mut out = [0.0; 3];
    for (o, slot) in out.iter_mut().zip(dual.neighbors(face)) {
        if let Some(j) = slot {
            let nj = face_normal(mesh, j)?;
            *o = geom::dot(n0, nj).clamp(-1.0, 1.0).acos();
        }
    }
    Ok(out)
}

pub fn assemble_features(
    mesh: &Mesh,
    dual: &DualGraph,
    selection: &FeatureSelection,
) -> Result<FaceInput> {
    let nf = mesh.face_count();
    if dual.node_count() != nf {
        return Err(Error::ShapeMismatch(format!(
            "dual has {} nodes for {nf} faces",
            dual.node_count()
        )));
    }
    let center = selection
        .kinds()
        .contains(&FeatureKind::DistCm)
        .then(|| surface_center_of_mass(mesh));
    let width = selection.face_width();
    let mut per_face = Tensor::zeros(nf, width);
    let mut per_slot = selection.has_dihedral().then(|| Tensor::zeros(nf, 3));
    for f in 0..nf {
        let row = per_face.row_mut(f);
        let mut c = 0;
        for kind in selection.kinds() {
            match kind {
                FeatureKind::Xyz => {
                    row[c..c + 3].copy_from_slice(&face_centroid(mesh, f));
                    c += 3;
                }
                FeatureKind::Normal => {
                    row[c..c + 3].copy_from_slice(&face_normal(mesh, f)?);
                    c += 3;
                }
                FeatureKind::Area => {
                    row[c] = face_area(mesh, f);
                    c += 1;
                }
                FeatureKind::DistCm => {
                    row[c] = geom::dist(face_centroid(mesh, f), center.unwrap());
                    c += 1;
                }
                FeatureKind::Dihedral => {
                    let angles = dihedral_angles(mesh, dual, f)?;
                    per_slot.as_mut().unwrap().row_mut(f).copy_from_slice(&angles);
                }
            }
        }
    }
    Ok(FaceInput { per_face, per_slot })
}

/// Rescales every column to zero mean and unit variance (constant columns
/// are only centered).
pub fn standardize(t: &mut Tensor) {
    let (n, c) = t.shape();
    if n == 0 {
        return;
    }
    for j in 0..c {
        let mean = (0..n).map(|i| t.get(i, j)).sum::<f64>() / n as f64;
        let var = (0..n).map(|i| (t.get(i, j) - mean).powi(2)).sum::<f64>() / n as f64;
        let inv = if var > 0.0 { 1.0 / var.sqrt() } else { 1.0 };
        for i in 0..n {
            t.set(i, j, (t.get(i, j) - mean) * inv);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dual::build_dual;
    use crate::mesh::primitives::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-12
    }

    #[test]
    fn centroid_area_normal_of_unit_right_triangle() {
        let m = single_triangle();
        let c = face_centroid(&m, 0);
        assert!(close(c[0], 1.0 / 3.0) && close(c[1], 1.0 / 3.0) && c[2] == 0.0);
        assert_eq!(face_normal(&m, 0).unwrap(), [0.0, 0.0, 1.0]);
        assert!(close(face_area(&m, 0), 0.5));
    }

    #[test]
    fn equilateral_centroid_at_origin() {
        let s = 3f64.sqrt() / 2.0;
        let m = Mesh::new(vec![[1.0, 0.0, 0.0], [-0.5, s, 0.0], [-0.5, -s, 0.0]], vec![[0, 1, 2]])
            .unwrap();
        let c = face_centroid(&m, 0);
        assert!(c.iter().all(|x| x.abs() < 1e-15));
    }

    #[test]
    fn tetrahedron_dihedral_and_distcm() {
        let m = tetrahedron();
        let d = build_dual(&m).unwrap();
        let expect = (-1.0f64 / 3.0).acos();
        let d0 = dist_to_center_of_mass(&m, 0);
        for f in 0..4 {
            for a in dihedral_angles(&m, &d, f).unwrap() {
                assert!((a - expect).abs() < 1e-12);
            }
            assert!(close(dist_to_center_of_mass(&m, f), d0));
        }
        assert!((expect - 1.9106332362490186).abs() < 1e-15);
    }

    #[test]
    fn coplanar_neighbors_have_zero_dihedral() {
        let m = Mesh::new(
            vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [1.0, 1.0, 0.0], [0.0, 1.0, 0.0]],
            vec![[0, 1, 2], [0, 2, 3]],
        )
        .unwrap();
        let d = build_dual(&m).unwrap();
        assert_eq!(dihedral_angles(&m, &d, 0).unwrap(), [0.0; 3]);
    }

    #[test]
    fn selection_widths() {
        let m = icosahedron();
        let d = build_dual(&m).unwrap();
        let cases = [("xyz", 3), ("xyz,normal", 6), ("normal,area,distcm", 5)];
        for (sel, w) in cases {
            let s: FeatureSelection = sel.parse().unwrap();
            let x = assemble_features(&m, &d, &s).unwrap();
            assert_eq!(x.per_face.shape(), (20, w));
            assert!(x.per_slot.is_none());
        }
        let s: FeatureSelection = "dihedral,area".parse().unwrap();
        let x = assemble_features(&m, &d, &s).unwrap();
        assert_eq!(x.per_face.cols(), 1);
        assert_eq!(x.per_slot.as_ref().unwrap().shape(), (20, 3));
        assert_eq!(s.channel_names(), ["dihedral0", "dihedral1", "dihedral2", "area"]);
        let table = x.to_table(&s);
        assert_eq!(table.get(0, 3), x.per_face.get(0, 0));
    }

    #[test]
    fn selection_errors() {
        assert!(matches!("".parse::<FeatureSelection>(), Err(Error::EmptySelection)));
        assert!("xyz,xyz".parse::<FeatureSelection>().is_err());
        assert!("curvature".parse::<FeatureSelection>().is_err());
        assert_eq!("XYZ+Normal".parse::<FeatureSelection>().unwrap().to_string(), "xyz,normal");
    }

    #[test]
    fn xyz_tracks_translation_exactly() {
        let m = icosahedron();
        let t = [0.5, -2.0, 3.25];
        let id = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        let mt = m.transformed(&id, t);
        for f in 0..m.face_count() {
            let a = face_centroid(&m, f);
            let b = face_centroid(&mt, f);
            for k in 0..3 {
                assert!((b[k] - a[k] - t[k]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn standardize_columns() {
        let mut t = Tensor::from_vec(3, 2, vec![1.0, 5.0, 2.0, 5.0, 3.0, 5.0]).unwrap();
        standardize(&mut t);
        assert!((t.get(0, 0) + 1.224744871391589).abs() < 1e-12);
        assert_eq!(t.get(1, 1), 0.0);
    }
}
