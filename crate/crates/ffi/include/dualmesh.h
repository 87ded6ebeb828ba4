#ifndef DUALMESH_H
#define DUALMESH_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call.
 */
typedef enum DmStatus {
  DM_STATUS_OK = 0,
  /**
   * A required pointer argument was null.
   */
  DM_STATUS_NULL_ARGUMENT = 1,
  /**
   * An output buffer has the wrong length, or input sizes disagree.
   */
  DM_STATUS_BAD_LENGTH = 2,
  DM_STATUS_IO = 3,
  DM_STATUS_PARSE = 4,
  /**
   * The mesh failed validation (bad indices, non-manifold, degenerate, ...).
   */
  DM_STATUS_INVALID_MESH = 5,
  DM_STATUS_CONFIG = 6,
  DM_STATUS_LABEL_OUT_OF_RANGE = 7,
  DM_STATUS_CORRUPT_CHECKPOINT = 8,
  DM_STATUS_UNSUPPORTED_VERSION = 9,
  DM_STATUS_NUMERIC = 10,
  /**
   * Anything else, including a caught panic.
   */
  DM_STATUS_INTERNAL = 11,
} DmStatus;

/**
 * Face-dual graph of a mesh.
 */
typedef struct DmDual DmDual;

/**
 * A triangle mesh, optionally carrying per-vertex labels.
 */
typedef struct DmMesh DmMesh;

/**
 * A trained network loaded from a checkpoint.
 */
typedef struct DmModel DmModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message describing the last failure on this thread. Valid until the next
 * failing call on the same thread; never null.
 */
const char *dm_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *dm_version(void);

/**
 * Loads an OFF or OBJ mesh, chosen by file extension.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum DmStatus dm_mesh_load(const char *path, struct DmMesh **out);

/**
 * Builds a mesh from `n_vertices` xyz triples and `n_faces` index triples.
 *
 * # Safety
 * `vertices` must hold `3 * n_vertices` doubles and `faces` `3 * n_faces`
 * indices; `out` must be writable.
 */
enum DmStatus dm_mesh_from_arrays(const double *vertices,
                                  size_t n_vertices,
                                  const uint32_t *faces,
                                  size_t n_faces,
                                  struct DmMesh **out);

/**
 * Writes the mesh; the format follows the extension.
 *
 * # Safety
 * `mesh` must be a live handle and `path` a NUL-terminated string.
 */
enum DmStatus dm_mesh_save(const struct DmMesh *mesh, const char *path);

/**
 * # Safety
 * `mesh` must be a live handle or null.
 */
size_t dm_mesh_vertex_count(const struct DmMesh *mesh);

/**
 * # Safety
 * `mesh` must be a live handle or null.
 */
size_t dm_mesh_face_count(const struct DmMesh *mesh);

/**
 * Whether every edge has exactly two incident faces. False for null.
 *
 * # Safety
 * `mesh` must be a live handle or null.
 */
bool dm_mesh_is_watertight(const struct DmMesh *mesh);

/**
 * Copies vertex positions into `out` (length `3 * vertex_count`).
 *
 * # Safety
 * `mesh` must be a live handle; `out` must hold `len` doubles.
 */
enum DmStatus dm_mesh_vertices(const struct DmMesh *mesh, double *out, size_t len);

/**
 * Copies face indices into `out` (length `3 * face_count`).
 *
 * # Safety
 * `mesh` must be a live handle; `out` must hold `len` indices.
 */
enum DmStatus dm_mesh_faces(const struct DmMesh *mesh, uint32_t *out, size_t len);

/**
 * Attaches per-vertex labels (length `vertex_count`, `-1` = unlabeled).
 *
 * # Safety
 * `mesh` must be a live handle; `labels` must hold `len` values.
 */
enum DmStatus dm_mesh_set_labels(struct DmMesh *mesh, const int64_t *labels, size_t len);

/**
 * Copies the mesh's labels. Fails with `Config` if it has none.
 *
 * # Safety
 * `mesh` must be a live handle; `out` must hold `len` values.
 */
enum DmStatus dm_mesh_labels(const struct DmMesh *mesh, int64_t *out, size_t len);

/**
 * # Safety
 * `mesh` must come from this library and not be used afterwards. Null is a no-op.
 */
void dm_mesh_free(struct DmMesh *mesh);

/**
 * Builds the face-dual graph.
 *
 * # Safety
 * `mesh` must be a live handle; `out` must be writable.
 */
enum DmStatus dm_dual_build(const struct DmMesh *mesh, struct DmDual **out);

/**
 * # Safety
 * `dual` must be a live handle or null.
 */
size_t dm_dual_node_count(const struct DmDual *dual);

/**
 * Neighbor table, three entries per node in clockwise order, `-1` for PAD.
 *
 * # Safety
 * `dual` must be a live handle; `out` must hold `len = 3 * node_count` values.
 */
enum DmStatus dm_dual_neighbors(const struct DmDual *dual, int64_t *out, size_t len);

/**
 * # Safety
 * `dual` must come from this library and not be used afterwards. Null is a no-op.
 */
void dm_dual_free(struct DmDual *dual);

/**
 * Column count of the feature table for a comma-separated selection such
 * as `"xyz,normal,dihedral"`.
 *
 * # Safety
 * `features` must be a NUL-terminated string; `width` must be writable.
 */
enum DmStatus dm_feature_width(const char *features, size_t *width);

/**
 * Per-face feature table, row-major, `face_count x width` doubles.
 *
 * # Safety
 * `mesh` must be a live handle, `features` a NUL-terminated string and
 * `out` must hold `len` doubles.
 */
enum DmStatus dm_features(const struct DmMesh *mesh, const char *features, double *out, size_t len);

/**
 * Shortest-edge-first decimation to `fraction` of the faces. Labels on the
 * input mesh are carried onto the result.
 *
 * # Safety
 * `mesh` must be a live handle; `out` must be writable.
 */
enum DmStatus dm_decimate(const struct DmMesh *mesh, double fraction, struct DmMesh **out);

/**
 * Edge-graph geodesic distances from `source` to every vertex.
 *
 * # Safety
 * `mesh` must be a live handle; `out` must hold `len = vertex_count` doubles.
 */
enum DmStatus dm_geodesic_distances(const struct DmMesh *mesh,
                                    size_t source,
                                    double *out,
                                    size_t len);

/**
 * Scores `n` predicted reference-vertex labels against ground truth
 * (`-1` = unlabeled, skipped). The mean error is in percent of the
 * reference's geodesic diameter.
 *
 * # Safety
 * `reference` must be a live handle; `predicted` and `truth` must hold `n`
 * values; `accuracy` and `mean_error` must be writable.
 */
enum DmStatus dm_evaluate(const struct DmMesh *reference,
                          const int64_t *predicted,
                          const int64_t *truth,
                          size_t n,
                          double *accuracy,
                          double *mean_error);

/**
 * Loads a model checkpoint.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum DmStatus dm_model_load(const char *path, struct DmModel **out);

/**
 * Number of reference vertices the model classifies into.
 *
 * # Safety
 * `model` must be a live handle or null.
 */
size_t dm_model_target_count(const struct DmModel *model);

/**
 * Predicts a reference vertex for every vertex of `mesh`. When
 * `probabilities` is non-null it receives the row-major softmax
 * (`vertex_count x target_count`, length `prob_len`).
 *
 * # Safety
 * `model` and `mesh` must be live handles; `labels` must hold `len =
 * vertex_count` values; `probabilities`, if non-null, `prob_len` doubles.
 */
enum DmStatus dm_model_predict(struct DmModel *model,
                               const struct DmMesh *mesh,
                               int64_t *labels,
                               size_t len,
                               double *probabilities,
                               size_t prob_len);

/**
 * # Safety
 * `model` must come from this library and not be used afterwards. Null is a no-op.
 */
void dm_model_free(struct DmModel *model);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DUALMESH_H */
