#ifndef FACEGM_H
#define FACEGM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stddef.h>
#include <stdint.h>

typedef enum FgmStatus {
  FGM_STATUS_OK = 0,
  FGM_STATUS_NULL_ARGUMENT = 1,
  FGM_STATUS_INVALID_UTF8 = 2,
  FGM_STATUS_IO_ERROR = 3,
  FGM_STATUS_PARSE_ERROR = 4,
  FGM_STATUS_INVALID_INPUT = 5,
  FGM_STATUS_BUFFER_TOO_SMALL = 6,
  FGM_STATUS_NUMERIC_ERROR = 7,
  FGM_STATUS_CONFIG_ERROR = 8,
  FGM_STATUS_PANIC = 9,
} FgmStatus;

/**
 * Opaque named landmark set.
 */
typedef struct FgmLandmarks FgmLandmarks;

/**
 * Opaque triangle mesh.
 */
typedef struct FgmMesh FgmMesh;

typedef struct FgmDistanceStats {
  double mean;
  double sd;
  double max;
  size_t n;
} FgmDistanceStats;

/**
 * `x -> scale * R * x + t`; `rotation` is row-major.
 */
typedef struct FgmTransform {
  double rotation[9];
  double scale;
  double translation[3];
} FgmTransform;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread; empty if none. The
 * pointer stays valid until the next failing call on the same thread.
 */
const char *fgm_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *fgm_version(void);

/**
 * # Safety
 * `s` must be null or a string returned by this library, not yet freed.
 */
void fgm_string_free(char *s);

/**
 * Reads a PLY file (ascii or binary little-endian).
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum FgmStatus fgm_mesh_read_ply(const char *path, struct FgmMesh **out);

/**
 * Writes a mesh as PLY; `binary` non-zero selects binary little-endian.
 *
 * # Safety
 * `mesh` must be a live handle and `path` a NUL-terminated string.
 */
enum FgmStatus fgm_mesh_write_ply(const struct FgmMesh *mesh, const char *path, int binary);

/**
 * Builds a mesh from `n_vertices` xyz triples and `n_faces` index triples.
 * `faces` may be null when `n_faces` is 0.
 *
 * # Safety
 * `xyz` must hold `3 * n_vertices` doubles and `faces` `3 * n_faces`
 * indices; `out` must be writable.
 */
enum FgmStatus fgm_mesh_from_arrays(const double *xyz,
                                    size_t n_vertices,
                                    const uint32_t *faces,
                                    size_t n_faces,
                                    struct FgmMesh **out);

/**
 * # Safety
 * `mesh` must be null or a live handle; it must not be used afterwards.
 */
void fgm_mesh_free(struct FgmMesh *mesh);

/**
 * Number of vertices, or 0 for a null handle.
 *
 * # Safety
 * `mesh` must be null or a live handle.
 */
size_t fgm_mesh_vertex_count(const struct FgmMesh *mesh);

/**
 * Number of faces, or 0 for a null handle.
 *
 * # Safety
 * `mesh` must be null or a live handle.
 */
size_t fgm_mesh_face_count(const struct FgmMesh *mesh);

/**
 * Copies the vertex coordinates (xyz interleaved) into `out`, which must
 * hold at least `3 * vertex_count` doubles (`len` is its capacity).
 *
 * # Safety
 * `mesh` must be a live handle and `out` writable for `len` doubles.
 */
enum FgmStatus fgm_mesh_vertices(const struct FgmMesh *mesh, double *out, size_t len);

/**
 * Copies the face indices into `out` (capacity `len`, at least
 * `3 * face_count`).
 *
 * # Safety
 * `mesh` must be a live handle and `out` writable for `len` values.
 */
enum FgmStatus fgm_mesh_faces(const struct FgmMesh *mesh, uint32_t *out, size_t len);

/**
 * Reads landmarks from CSV (`name,x,y,z`) or JSON (by `.json` extension).
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum FgmStatus fgm_landmarks_read(const char *path, struct FgmLandmarks **out);

/**
 * # Safety
 * `set` must be null or a live handle; it must not be used afterwards.
 */
void fgm_landmarks_free(struct FgmLandmarks *set);

/**
 * Number of landmarks, or 0 for a null handle.
 *
 * # Safety
 * `set` must be null or a live handle.
 */
size_t fgm_landmarks_count(const struct FgmLandmarks *set);

/**
 * Copies landmark coordinates (xyz interleaved, file order) into `out`.
 *
 * # Safety
 * `set` must be a live handle and `out` writable for `len` doubles.
 */
enum FgmStatus fgm_landmarks_coords(const struct FgmLandmarks *set, double *out, size_t len);

/**
 * Name of landmark `index` as a new string (free with `fgm_string_free`).
 *
 * # Safety
 * `set` must be a live handle; `out` must be writable.
 */
enum FgmStatus fgm_landmarks_name(const struct FgmLandmarks *set, size_t index, char **out);

/**
 * Nearest-vertex distances from every `source` vertex to `target`.
 *
 * # Safety
 * Both handles must be live; `out` must be writable.
 */
enum FgmStatus fgm_point_to_point_stats(const struct FgmMesh *source,
                                        const struct FgmMesh *target,
                                        struct FgmDistanceStats *out);

/**
 * Distance from every `source` vertex to the `target` surface, written to
 * `out` (capacity `len`, at least the source vertex count).
 *
 * # Safety
 * Both handles must be live; `out` must be writable for `len` doubles.
 */
enum FgmStatus fgm_surface_deviation(const struct FgmMesh *source,
                                     const struct FgmMesh *target,
                                     double *out,
                                     size_t len);

/**
 * Least-squares similarity (rigid when `allow_scale` is 0) mapping
 * `source` onto `target`; both sets must list the same names in the same
 * order.
 *
 * # Safety
 * Both handles must be live; `out` must be writable.
 */
enum FgmStatus fgm_similarity_align(const struct FgmLandmarks *source,
                                    const struct FgmLandmarks *target,
                                    int allow_scale,
                                    struct FgmTransform *out);

/**
 * Applies `transform` to every vertex (and normal) of `mesh` in place.
 *
 * # Safety
 * `mesh` must be a live handle and `transform` readable.
 */
enum FgmStatus fgm_mesh_transform(struct FgmMesh *mesh, const struct FgmTransform *transform);

/**
 * Sub-mesh within `radius` of `center` (faces kept only when all three
 * vertices are inside).
 *
 * # Safety
 * `mesh` must be a live handle, `center` readable for 3 doubles and `out`
 * writable.
 */
enum FgmStatus fgm_crop_sphere(const struct FgmMesh *mesh,
                               const double *center,
                               double radius,
                               struct FgmMesh **out);

/**
 * Runs the full evaluation pipeline for a TOML or JSON config file. When
 * `output_dir` is not null it replaces the configured output directory.
 * On success `report_json` receives the report (free with
 * `fgm_string_free`); it may be null if only the files are wanted.
 *
 * # Safety
 * `config_path` must be a NUL-terminated string, `output_dir` null or a
 * NUL-terminated string, `report_json` null or writable.
 */
enum FgmStatus fgm_run_pipeline(const char *config_path,
                                const char *output_dir,
                                char **report_json);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FACEGM_H */
