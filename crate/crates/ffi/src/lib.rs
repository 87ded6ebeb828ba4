//! C interface to `dualmesh`.
//!
//! Objects are opaque handles created by `dm_*_load` / `dm_*_build` style
//! functions and released with the matching `dm_*_free`. Every fallible
//! call returns a [`DmStatus`]; on failure `dm_last_error` holds a message
//! for the calling thread. Output arrays are caller-allocated and their
//! length is checked against what the call will write.
//!
//! Labels cross the boundary as `int64_t`, with `-1` meaning unlabeled.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use dualmesh::decimate::decimate_with;
use dualmesh::dual::{build_dual, DualGraph};
use dualmesh::features::{assemble_features, FeatureSelection};
use dualmesh::geodesic::{evaluate, geodesic_from};
use dualmesh::mesh::{load_mesh, save_mesh, Label, Mesh, MeshFormat};
use dualmesh::persist::load_network;
use dualmesh::train::{predict_mesh, Network};
use dualmesh::Error;

/// Result of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DmStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullArgument = 1,
    /// An output buffer has the wrong length, or input sizes disagree.
    BadLength = 2,
    Io = 3,
    Parse = 4,
    /// The mesh failed validation (bad indices, non-manifold, degenerate, ...).
    InvalidMesh = 5,
    Config = 6,
    LabelOutOfRange = 7,
    CorruptCheckpoint = 8,
    UnsupportedVersion = 9,
    Numeric = 10,
    /// Anything else, including a caught panic.
    Internal = 11,
}

/// A triangle mesh, optionally carrying per-vertex labels.
pub struct DmMesh(Mesh);

/// Face-dual graph of a mesh.
pub struct DmDual(DualGraph);

/// A trained network loaded from a checkpoint.
pub struct DmModel(Network);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> DmStatus {
    match e {
        Error::Io { .. } => DmStatus::Io,
        Error::Parse { .. } => DmStatus::Parse,
        Error::Validation(_)
        | Error::NonManifold(_)
        | Error::DegenerateFace(_)
        | Error::IsolatedVertex(_)
        | Error::Disconnected(_) => DmStatus::InvalidMesh,
        Error::Config(_)
        | Error::EmptySelection
        | Error::FeatureMismatch { .. }
        | Error::TargetUnreachable { .. } => DmStatus::Config,
        Error::ShapeMismatch(_) => DmStatus::BadLength,
        Error::LabelOutOfRange { .. } => DmStatus::LabelOutOfRange,
        Error::Corruption(_) => DmStatus::CorruptCheckpoint,
        Error::Version { .. } => DmStatus::UnsupportedVersion,
        Error::NonFinite(_) | Error::NonFiniteLoss(_) => DmStatus::Numeric,
        _ => DmStatus::Internal,
    }
}

struct Fail(DmStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> DmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => DmStatus::Ok,
        Ok(Err(Fail(s, msg))) => {
            set_error(msg);
            s
        }
        Err(_) => {
            set_error("internal panic".into());
            DmStatus::Internal
        }
    }
}

unsafe fn as_ref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref()
        .ok_or_else(|| Fail(DmStatus::NullArgument, format!("{what} is null")))
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Fail(DmStatus::NullArgument, format!("{what} is null")));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_mut<'a, T>(p: *mut T, len: usize, expected: usize, what: &str) -> Result<&'a mut [T], Fail> {
    if len != expected {
        return Err(Fail(
            DmStatus::BadLength,
            format!("{what} has length {len}, expected {expected}"),
        ));
    }
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(Fail(DmStatus::NullArgument, format!("{what} is null")));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

unsafe fn string<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(Fail(DmStatus::NullArgument, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(DmStatus::Config, format!("{what} is not UTF-8")))
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(Fail(DmStatus::NullArgument, "output handle pointer is null".into()));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

fn mesh_format(path: &str) -> Result<MeshFormat, Fail> {
    MeshFormat::from_path(&PathBuf::from(path))
        .ok_or_else(|| Fail(DmStatus::Config, format!("{path}: unknown mesh extension")))
}

fn to_labels(raw: &[i64]) -> Result<Vec<Label>, Fail> {
    raw.iter()
        .map(|&v| match v {
            -1 => Ok(None),
            v if v >= 0 => Ok(Some(v as usize)),
            v => Err(Fail(DmStatus::LabelOutOfRange, format!("invalid label {v}"))),
        })
        .collect()
}

fn from_label(l: &Label) -> i64 {
    l.map_or(-1, |v| v as i64)
}

/// Message describing the last failure on this thread. Valid until the next
/// failing call on the same thread; never null.
#[no_mangle]
pub extern "C" fn dm_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn dm_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Loads an OFF or OBJ mesh, chosen by file extension.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dm_mesh_load(path: *const c_char, out: *mut *mut DmMesh) -> DmStatus {
    guard(|| {
        let path = string(path, "path")?;
        let m = load_mesh(&PathBuf::from(path), mesh_format(path)?)?;
        put(out, DmMesh(m))
    })
}

/// Builds a mesh from `n_vertices` xyz triples and `n_faces` index triples.
///
/// # Safety
/// `vertices` must hold `3 * n_vertices` doubles and `faces` `3 * n_faces`
/// indices; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dm_mesh_from_arrays(
    vertices: *const f64,
    n_vertices: usize,
    faces: *const u32,
    n_faces: usize,
    out: *mut *mut DmMesh,
) -> DmStatus {
    guard(|| {
        let v = slice(vertices, 3 * n_vertices, "vertices")?;
        let f = slice(faces, 3 * n_faces, "faces")?;
        let v = v.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect();
        let f = f
            .chunks_exact(3)
            .map(|c| [c[0] as usize, c[1] as usize, c[2] as usize])
            .collect();
        put(out, DmMesh(Mesh::new(v, f)?))
    })
}

/// Writes the mesh; the format follows the extension.
///
/// # Safety
/// `mesh` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn dm_mesh_save(mesh: *const DmMesh, path: *const c_char) -> DmStatus {
    guard(|| {
        let m = as_ref(mesh, "mesh")?;
        let path = string(path, "path")?;
        save_mesh(&m.0, &PathBuf::from(path), mesh_format(path)?, None)?;
        Ok(())
    })
}

/// # Safety
/// `mesh` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn dm_mesh_vertex_count(mesh: *const DmMesh) -> usize {
    mesh.as_ref().map_or(0, |m| m.0.vertex_count())
}

/// # Safety
/// `mesh` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn dm_mesh_face_count(mesh: *const DmMesh) -> usize {
    mesh.as_ref().map_or(0, |m| m.0.face_count())
}

/// Whether every edge has exactly two incident faces. False for null.
///
/// # Safety
/// `mesh` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn dm_mesh_is_watertight(mesh: *const DmMesh) -> bool {
    mesh.as_ref().is_some_and(|m| m.0.is_watertight())
}

/// Copies vertex positions into `out` (length `3 * vertex_count`).
///
/// # Safety
/// `mesh` must be a live handle; `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn dm_mesh_vertices(mesh: *const DmMesh, out: *mut f64, len: usize) -> DmStatus {
    guard(|| {
        let m = &as_ref(mesh, "mesh")?.0;
        let out = slice_mut(out, len, 3 * m.vertex_count(), "out")?;
        for (o, v) in out.chunks_exact_mut(3).zip(m.vertices()) {
            o.copy_from_slice(v);
        }
        Ok(())
    })
}

/// Copies face indices into `out` (length `3 * face_count`).
///
/// # Safety
/// `mesh` must be a live handle; `out` must hold `len` indices.
#[no_mangle]
pub unsafe extern "C" fn dm_mesh_faces(mesh: *const DmMesh, out: *mut u32, len: usize) -> DmStatus {
    guard(|| {
        let m = &as_ref(mesh, "mesh")?.0;
        let out = slice_mut(out, len, 3 * m.face_count(), "out")?;
        for (o, f) in out.chunks_exact_mut(3).zip(m.faces()) {
            for (d, &s) in o.iter_mut().zip(f) {
                *d = s as u32;
            }
        }
        Ok(())
    })
}

/// Attaches per-vertex labels (length `vertex_count`, `-1` = unlabeled).
///
/// # Safety
/// `mesh` must be a live handle; `labels` must hold `len` values.
#[no_mangle]
pub unsafe extern "C" fn dm_mesh_set_labels(mesh: *mut DmMesh, labels: *const i64, len: usize) -> DmStatus {
    guard(|| {
        let m = mesh
            .as_mut()
            .ok_or_else(|| Fail(DmStatus::NullArgument, "mesh is null".into()))?;
        let l = to_labels(slice(labels, len, "labels")?)?;
        m.0 = m.0.clone().with_labels(l)?;
        Ok(())
    })
}

/// Copies the mesh's labels. Fails with `Config` if it has none.
///
/// # Safety
/// `mesh` must be a live handle; `out` must hold `len` values.
#[no_mangle]
pub unsafe extern "C" fn dm_mesh_labels(mesh: *const DmMesh, out: *mut i64, len: usize) -> DmStatus {
    guard(|| {
        let m = &as_ref(mesh, "mesh")?.0;
        let l = m
            .labels()
            .ok_or_else(|| Fail(DmStatus::Config, "mesh has no labels".into()))?;
        let out = slice_mut(out, len, l.len(), "out")?;
        for (o, l) in out.iter_mut().zip(l) {
            *o = from_label(l);
        }
        Ok(())
    })
}

/// # Safety
/// `mesh` must come from this library and not be used afterwards. Null is a no-op.
#[no_mangle]
pub unsafe extern "C" fn dm_mesh_free(mesh: *mut DmMesh) {
    if !mesh.is_null() {
        drop(Box::from_raw(mesh));
    }
}

/// Builds the face-dual graph.
///
/// # Safety
/// `mesh` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dm_dual_build(mesh: *const DmMesh, out: *mut *mut DmDual) -> DmStatus {
    guard(|| put(out, DmDual(build_dual(&as_ref(mesh, "mesh")?.0)?)))
}

/// # Safety
/// `dual` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn dm_dual_node_count(dual: *const DmDual) -> usize {
    dual.as_ref().map_or(0, |d| d.0.node_count())
}

/// Neighbor table, three entries per node in clockwise order, `-1` for PAD.
///
/// # Safety
/// `dual` must be a live handle; `out` must hold `len = 3 * node_count` values.
#[no_mangle]
pub unsafe extern "C" fn dm_dual_neighbors(dual: *const DmDual, out: *mut i64, len: usize) -> DmStatus {
    guard(|| {
        let d = &as_ref(dual, "dual")?.0;
        let out = slice_mut(out, len, 3 * d.node_count(), "out")?;
        for (o, s) in out.chunks_exact_mut(3).zip(d.slots()) {
            for (x, n) in o.iter_mut().zip(s) {
                *x = n.map_or(-1, |n| n as i64);
            }
        }
        Ok(())
    })
}

/// # Safety
/// `dual` must come from this library and not be used afterwards. Null is a no-op.
#[no_mangle]
pub unsafe extern "C" fn dm_dual_free(dual: *mut DmDual) {
    if !dual.is_null() {
        drop(Box::from_raw(dual));
    }
}

/// Column count of the feature table for a comma-separated selection such
/// as `"xyz,normal,dihedral"`.
///
/// # Safety
/// `features` must be a NUL-terminated string; `width` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dm_feature_width(features: *const c_char, width: *mut usize) -> DmStatus {
    guard(|| {
        let sel: FeatureSelection = string(features, "features")?.parse()?;
        if width.is_null() {
            return Err(Fail(DmStatus::NullArgument, "width is null".into()));
        }
        *width = sel.channel_names().len();
        Ok(())
    })
}

/// Per-face feature table, row-major, `face_count x width` doubles.
///
/// # Safety
/// `mesh` must be a live handle, `features` a NUL-terminated string and
/// `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn dm_features(
    mesh: *const DmMesh,
    features: *const c_char,
    out: *mut f64,
    len: usize,
) -> DmStatus {
    guard(|| {
        let m = &as_ref(mesh, "mesh")?.0;
        let sel: FeatureSelection = string(features, "features")?.parse()?;
        let table = assemble_features(m, &build_dual(m)?, &sel)?.to_table(&sel);
        slice_mut(out, len, table.data().len(), "out")?.copy_from_slice(table.data());
        Ok(())
    })
}

/// Shortest-edge-first decimation to `fraction` of the faces. Labels on the
/// input mesh are carried onto the result.
///
/// # Safety
/// `mesh` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dm_decimate(mesh: *const DmMesh, fraction: f64, out: *mut *mut DmMesh) -> DmStatus {
    guard(|| {
        let m = &as_ref(mesh, "mesh")?.0;
        let d = decimate_with(m, m.labels(), fraction, false)?;
        let result = match d.labels {
            Some(l) => d.mesh.with_labels(l)?,
            None => d.mesh,
        };
        put(out, DmMesh(result))
    })
}

/// Edge-graph geodesic distances from `source` to every vertex.
///
/// # Safety
/// `mesh` must be a live handle; `out` must hold `len = vertex_count` doubles.
#[no_mangle]
pub unsafe extern "C" fn dm_geodesic_distances(
    mesh: *const DmMesh,
    source: usize,
    out: *mut f64,
    len: usize,
) -> DmStatus {
    guard(|| {
        let m = &as_ref(mesh, "mesh")?.0;
        if source >= m.vertex_count() {
            return Err(Fail(
                DmStatus::LabelOutOfRange,
                format!("source {source} out of range [0, {})", m.vertex_count()),
            ));
        }
        let field = geodesic_from(m, source)?;
        slice_mut(out, len, m.vertex_count(), "out")?.copy_from_slice(&field.distances);
        Ok(())
    })
}

/// Scores `n` predicted reference-vertex labels against ground truth
/// (`-1` = unlabeled, skipped). The mean error is in percent of the
/// reference's geodesic diameter.
///
/// # Safety
/// `reference` must be a live handle; `predicted` and `truth` must hold `n`
/// values; `accuracy` and `mean_error` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dm_evaluate(
    reference: *const DmMesh,
    predicted: *const i64,
    truth: *const i64,
    n: usize,
    accuracy: *mut f64,
    mean_error: *mut f64,
) -> DmStatus {
    guard(|| {
        let r = &as_ref(reference, "reference")?.0;
        let pred: Vec<usize> = slice(predicted, n, "predicted")?
            .iter()
            .map(|&p| {
                usize::try_from(p).map_err(|_| Fail(DmStatus::LabelOutOfRange, format!("invalid prediction {p}")))
            })
            .collect::<Result<_, _>>()?;
        let truth = to_labels(slice(truth, n, "truth")?)?;
        if accuracy.is_null() || mean_error.is_null() {
            return Err(Fail(DmStatus::NullArgument, "result pointer is null".into()));
        }
        let report = evaluate(&pred, &truth, r, &[])?;
        *accuracy = report.accuracy;
        *mean_error = report.mean_geo_error;
        Ok(())
    })
}

/// Loads a model checkpoint.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dm_model_load(path: *const c_char, out: *mut *mut DmModel) -> DmStatus {
    guard(|| {
        let path = string(path, "path")?;
        put(out, DmModel(load_network(&PathBuf::from(path))?))
    })
}

/// Number of reference vertices the model classifies into.
///
/// # Safety
/// `model` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn dm_model_target_count(model: *const DmModel) -> usize {
    model.as_ref().map_or(0, |m| m.0.config().n_targets)
}

/// Predicts a reference vertex for every vertex of `mesh`. When
/// `probabilities` is non-null it receives the row-major softmax
/// (`vertex_count x target_count`, length `prob_len`).
///
/// # Safety
/// `model` and `mesh` must be live handles; `labels` must hold `len =
/// vertex_count` values; `probabilities`, if non-null, `prob_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn dm_model_predict(
    model: *mut DmModel,
    mesh: *const DmMesh,
    labels: *mut i64,
    len: usize,
    probabilities: *mut f64,
    prob_len: usize,
) -> DmStatus {
    guard(|| {
        let net = &mut model
            .as_mut()
            .ok_or_else(|| Fail(DmStatus::NullArgument, "model is null".into()))?
            .0;
        let m = &as_ref(mesh, "mesh")?.0;
        let out = slice_mut(labels, len, m.vertex_count(), "labels")?;
        let p = predict_mesh(net, m)?;
        if !probabilities.is_null() {
            let dst = slice_mut(probabilities, prob_len, p.probabilities.data().len(), "probabilities")?;
            dst.copy_from_slice(p.probabilities.data());
        }
        for (o, &l) in out.iter_mut().zip(&p.labels) {
            *o = l as i64;
        }
        Ok(())
    })
}

/// # Safety
/// `model` must come from this library and not be used afterwards. Null is a no-op.
#[no_mangle]
pub unsafe extern "C" fn dm_model_free(model: *mut DmModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}
