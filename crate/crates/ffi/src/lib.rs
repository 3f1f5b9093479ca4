//! C ABI over `facegm`.
//!
//! Meshes and landmark sets are opaque handles created by this library and
//! released with the matching `*_free` function. Every fallible call returns
//! an [`FgmStatus`]; on failure [`fgm_last_error`] describes the problem for
//! the calling thread. Strings returned to the caller are freed with
//! [`fgm_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use facegm::cli::{cmd_pipeline, CliError, ErrorKind, RunConfig};
use facegm::geomeval::{
    apply_transform, crop_sphere, point_to_point_stats, similarity_align, surface_deviation,
    GeomError, SimilarityTransform,
};
use facegm::meshio::{read_landmarks, read_ply, validate_mesh, write_ply, LandmarkSet, MeshIoError, PlyFormat, TriangleMesh};
use nalgebra::{Matrix3, Point3, Vector3};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FgmStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    IoError = 3,
    ParseError = 4,
    InvalidInput = 5,
    BufferTooSmall = 6,
    NumericError = 7,
    ConfigError = 8,
    Panic = 9,
}

/// Opaque triangle mesh.
pub struct FgmMesh(TriangleMesh);

/// Opaque named landmark set.
pub struct FgmLandmarks(LandmarkSet);

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct FgmDistanceStats {
    pub mean: f64,
    pub sd: f64,
    pub max: f64,
    pub n: usize,
}

/// `x -> scale * R * x + t`; `rotation` is row-major.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct FgmTransform {
    pub rotation: [f64; 9],
    pub scale: f64,
    pub translation: [f64; 3],
}

impl From<&SimilarityTransform> for FgmTransform {
    fn from(t: &SimilarityTransform) -> Self {
        let r = t.rotation;
        FgmTransform {
            rotation: [
                r[(0, 0)], r[(0, 1)], r[(0, 2)],
                r[(1, 0)], r[(1, 1)], r[(1, 2)],
                r[(2, 0)], r[(2, 1)], r[(2, 2)],
            ],
            scale: t.scale,
            translation: [t.translation.x, t.translation.y, t.translation.z],
        }
    }
}

impl From<&FgmTransform> for SimilarityTransform {
    fn from(t: &FgmTransform) -> Self {
        SimilarityTransform {
            rotation: Matrix3::from_row_slice(&t.rotation),
            scale: t.scale,
            translation: Vector3::from(t.translation),
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).expect("nul bytes removed"));
}

struct Failure(FgmStatus, String);

impl From<MeshIoError> for Failure {
    fn from(e: MeshIoError) -> Self {
        let status = match e {
            MeshIoError::Io { .. } => FgmStatus::IoError,
            MeshIoError::InvalidMesh(_) => FgmStatus::InvalidInput,
            _ => FgmStatus::ParseError,
        };
        Failure(status, e.to_string())
    }
}

impl From<GeomError> for Failure {
    fn from(e: GeomError) -> Self {
        let status = match e {
            GeomError::DegenerateConfiguration(_) => FgmStatus::NumericError,
            _ => FgmStatus::InvalidInput,
        };
        Failure(status, e.to_string())
    }
}

impl From<CliError> for Failure {
    fn from(e: CliError) -> Self {
        let status = match e.kind {
            ErrorKind::Config => FgmStatus::ConfigError,
            ErrorKind::Data => FgmStatus::InvalidInput,
            ErrorKind::Numeric => FgmStatus::NumericError,
        };
        Failure(status, e.to_string())
    }
}

fn fail(status: FgmStatus, msg: impl Into<String>) -> Failure {
    Failure(status, msg.into())
}

/// Runs `f`, converting errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> FgmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => FgmStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("internal error: {msg}"));
            FgmStatus::Panic
        }
    }
}

unsafe fn path_arg(p: *const c_char) -> Result<PathBuf, Failure> {
    if p.is_null() {
        return Err(fail(FgmStatus::NullArgument, "path is null"));
    }
    CStr::from_ptr(p)
        .to_str()
        .map(PathBuf::from)
        .map_err(|_| fail(FgmStatus::InvalidUtf8, "path is not valid UTF-8"))
}

unsafe fn get<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref()
        .ok_or_else(|| fail(FgmStatus::NullArgument, format!("{what} is null")))
}

unsafe fn out_ptr<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut()
        .ok_or_else(|| fail(FgmStatus::NullArgument, format!("{what} is null")))
}

/// Message of the last failed call on this thread; empty if none. The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn fgm_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn fgm_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// # Safety
/// `s` must be null or a string returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn fgm_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Reads a PLY file (ascii or binary little-endian).
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fgm_mesh_read_ply(path: *const c_char, out: *mut *mut FgmMesh) -> FgmStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let mesh = read_ply(path_arg(path)?)?;
        *out = Box::into_raw(Box::new(FgmMesh(mesh)));
        Ok(())
    })
}

/// Writes a mesh as PLY; `binary` non-zero selects binary little-endian.
///
/// # Safety
/// `mesh` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn fgm_mesh_write_ply(mesh: *const FgmMesh, path: *const c_char, binary: c_int) -> FgmStatus {
    guard(|| {
        let mesh = get(mesh, "mesh")?;
        let format = if binary != 0 {
            PlyFormat::BinaryLittleEndian
        } else {
            PlyFormat::Ascii
        };
        write_ply(&mesh.0, path_arg(path)?, format)?;
        Ok(())
    })
}

/// Builds a mesh from `n_vertices` xyz triples and `n_faces` index triples.
/// `faces` may be null when `n_faces` is 0.
///
/// # Safety
/// `xyz` must hold `3 * n_vertices` doubles and `faces` `3 * n_faces`
/// indices; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fgm_mesh_from_arrays(
    xyz: *const f64,
    n_vertices: usize,
    faces: *const u32,
    n_faces: usize,
    out: *mut *mut FgmMesh,
) -> FgmStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        if xyz.is_null() && n_vertices > 0 {
            return Err(fail(FgmStatus::NullArgument, "xyz is null"));
        }
        if faces.is_null() && n_faces > 0 {
            return Err(fail(FgmStatus::NullArgument, "faces is null"));
        }
        let coords = if n_vertices > 0 {
            std::slice::from_raw_parts(xyz, 3 * n_vertices)
        } else {
            &[]
        };
        let idx = if n_faces > 0 {
            std::slice::from_raw_parts(faces, 3 * n_faces)
        } else {
            &[]
        };
        let mesh = TriangleMesh::new(
            coords.chunks_exact(3).map(|c| Point3::new(c[0], c[1], c[2])).collect(),
            idx.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect(),
        );
        let report = validate_mesh(&mesh);
        if !report.is_ok() {
            return Err(fail(FgmStatus::InvalidInput, report.summary()));
        }
        *out = Box::into_raw(Box::new(FgmMesh(mesh)));
        Ok(())
    })
}

/// # Safety
/// `mesh` must be null or a live handle; it must not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn fgm_mesh_free(mesh: *mut FgmMesh) {
    if !mesh.is_null() {
        drop(Box::from_raw(mesh));
    }
}

/// Number of vertices, or 0 for a null handle.
///
/// # Safety
/// `mesh` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn fgm_mesh_vertex_count(mesh: *const FgmMesh) -> usize {
    mesh.as_ref().map_or(0, |m| m.0.vertex_count())
}

/// Number of faces, or 0 for a null handle.
///
/// # Safety
/// `mesh` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn fgm_mesh_face_count(mesh: *const FgmMesh) -> usize {
    mesh.as_ref().map_or(0, |m| m.0.face_count())
}

/// Copies the vertex coordinates (xyz interleaved) into `out`, which must
/// hold at least `3 * vertex_count` doubles (`len` is its capacity).
///
/// # Safety
/// `mesh` must be a live handle and `out` writable for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn fgm_mesh_vertices(mesh: *const FgmMesh, out: *mut f64, len: usize) -> FgmStatus {
    guard(|| {
        let mesh = get(mesh, "mesh")?;
        copy_out(mesh.0.vertices.iter().flat_map(|p| [p.x, p.y, p.z]), 3 * mesh.0.vertex_count(), out, len)
    })
}

/// Copies the face indices into `out` (capacity `len`, at least
/// `3 * face_count`).
///
/// # Safety
/// `mesh` must be a live handle and `out` writable for `len` values.
#[no_mangle]
pub unsafe extern "C" fn fgm_mesh_faces(mesh: *const FgmMesh, out: *mut u32, len: usize) -> FgmStatus {
    guard(|| {
        let mesh = get(mesh, "mesh")?;
        copy_out(mesh.0.faces.iter().flatten().copied(), 3 * mesh.0.face_count(), out, len)
    })
}

unsafe fn copy_out<T>(values: impl Iterator<Item = T>, needed: usize, out: *mut T, len: usize) -> Result<(), Failure> {
    if len < needed {
        return Err(fail(
            FgmStatus::BufferTooSmall,
            format!("buffer holds {len} values, {needed} needed"),
        ));
    }
    if needed == 0 {
        return Ok(());
    }
    if out.is_null() {
        return Err(fail(FgmStatus::NullArgument, "out is null"));
    }
    for (i, v) in values.enumerate() {
        out.add(i).write(v);
    }
    Ok(())
}

/// Reads landmarks from CSV (`name,x,y,z`) or JSON (by `.json` extension).
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fgm_landmarks_read(path: *const c_char, out: *mut *mut FgmLandmarks) -> FgmStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let set = read_landmarks(path_arg(path)?)?;
        *out = Box::into_raw(Box::new(FgmLandmarks(set)));
        Ok(())
    })
}

/// # Safety
/// `set` must be null or a live handle; it must not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn fgm_landmarks_free(set: *mut FgmLandmarks) {
    if !set.is_null() {
        drop(Box::from_raw(set));
    }
}

/// Number of landmarks, or 0 for a null handle.
///
/// # Safety
/// `set` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn fgm_landmarks_count(set: *const FgmLandmarks) -> usize {
    set.as_ref().map_or(0, |s| s.0.len())
}

/// Copies landmark coordinates (xyz interleaved, file order) into `out`.
///
/// # Safety
/// `set` must be a live handle and `out` writable for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn fgm_landmarks_coords(set: *const FgmLandmarks, out: *mut f64, len: usize) -> FgmStatus {
    guard(|| {
        let set = get(set, "set")?;
        copy_out(set.0.points().iter().flat_map(|p| [p.x, p.y, p.z]), 3 * set.0.len(), out, len)
    })
}

/// Name of landmark `index` as a new string (free with `fgm_string_free`).
///
/// # Safety
/// `set` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fgm_landmarks_name(set: *const FgmLandmarks, index: usize, out: *mut *mut c_char) -> FgmStatus {
    guard(|| {
        let set = get(set, "set")?;
        let out = out_ptr(out, "out")?;
        let name = set
            .0
            .names()
            .get(index)
            .ok_or_else(|| fail(FgmStatus::InvalidInput, format!("index {index} out of range")))?;
        *out = CString::new(name.as_str())
            .map_err(|_| fail(FgmStatus::InvalidInput, "name contains NUL"))?
            .into_raw();
        Ok(())
    })
}

/// Nearest-vertex distances from every `source` vertex to `target`.
///
/// # Safety
/// Both handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fgm_point_to_point_stats(
    source: *const FgmMesh,
    target: *const FgmMesh,
    out: *mut FgmDistanceStats,
) -> FgmStatus {
    guard(|| {
        let (s, t) = (get(source, "source")?, get(target, "target")?);
        let out = out_ptr(out, "out")?;
        let stats = point_to_point_stats(&s.0, &t.0)?;
        *out = FgmDistanceStats {
            mean: stats.mean,
            sd: stats.sd,
            max: stats.max,
            n: stats.per_point.len(),
        };
        Ok(())
    })
}

/// Distance from every `source` vertex to the `target` surface, written to
/// `out` (capacity `len`, at least the source vertex count).
///
/// # Safety
/// Both handles must be live; `out` must be writable for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn fgm_surface_deviation(
    source: *const FgmMesh,
    target: *const FgmMesh,
    out: *mut f64,
    len: usize,
) -> FgmStatus {
    guard(|| {
        let (s, t) = (get(source, "source")?, get(target, "target")?);
        let field = surface_deviation(&s.0, &t.0)?;
        let n = field.len();
        copy_out(field.per_vertex.into_iter(), n, out, len)
    })
}

/// Least-squares similarity (rigid when `allow_scale` is 0) mapping
/// `source` onto `target`; both sets must list the same names in the same
/// order.
///
/// # Safety
/// Both handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fgm_similarity_align(
    source: *const FgmLandmarks,
    target: *const FgmLandmarks,
    allow_scale: c_int,
    out: *mut FgmTransform,
) -> FgmStatus {
    guard(|| {
        let (s, t) = (get(source, "source")?, get(target, "target")?);
        let out = out_ptr(out, "out")?;
        let transform = similarity_align(&s.0, &t.0, allow_scale != 0)?;
        *out = FgmTransform::from(&transform);
        Ok(())
    })
}

/// Applies `transform` to every vertex (and normal) of `mesh` in place.
///
/// # Safety
/// `mesh` must be a live handle and `transform` readable.
#[no_mangle]
pub unsafe extern "C" fn fgm_mesh_transform(mesh: *mut FgmMesh, transform: *const FgmTransform) -> FgmStatus {
    guard(|| {
        let t = SimilarityTransform::from(get(transform, "transform")?);
        if !(t.scale.is_finite() && t.rotation.iter().chain(t.translation.iter()).all(|v| v.is_finite())) {
            return Err(fail(FgmStatus::InvalidInput, "transform is not finite"));
        }
        let mesh = out_ptr(mesh, "mesh")?;
        mesh.0 = apply_transform(&mesh.0, &t);
        Ok(())
    })
}

/// Sub-mesh within `radius` of `center` (faces kept only when all three
/// vertices are inside).
///
/// # Safety
/// `mesh` must be a live handle, `center` readable for 3 doubles and `out`
/// writable.
#[no_mangle]
pub unsafe extern "C" fn fgm_crop_sphere(
    mesh: *const FgmMesh,
    center: *const f64,
    radius: f64,
    out: *mut *mut FgmMesh,
) -> FgmStatus {
    guard(|| {
        let mesh = get(mesh, "mesh")?;
        if center.is_null() {
            return Err(fail(FgmStatus::NullArgument, "center is null"));
        }
        let out = out_ptr(out, "out")?;
        let c = std::slice::from_raw_parts(center, 3);
        let cropped = crop_sphere(&mesh.0, &Point3::new(c[0], c[1], c[2]), radius)?;
        *out = Box::into_raw(Box::new(FgmMesh(cropped)));
        Ok(())
    })
}

/// Runs the full evaluation pipeline for a TOML or JSON config file. When
/// `output_dir` is not null it replaces the configured output directory.
/// On success `report_json` receives the report (free with
/// `fgm_string_free`); it may be null if only the files are wanted.
///
/// # Safety
/// `config_path` must be a NUL-terminated string, `output_dir` null or a
/// NUL-terminated string, `report_json` null or writable.
#[no_mangle]
pub unsafe extern "C" fn fgm_run_pipeline(
    config_path: *const c_char,
    output_dir: *const c_char,
    report_json: *mut *mut c_char,
) -> FgmStatus {
    guard(|| {
        let mut cfg = RunConfig::load(path_arg(config_path)?)?;
        if !output_dir.is_null() {
            cfg.output_dir = std::path::absolute(path_arg(output_dir)?)
                .map_err(|e| fail(FgmStatus::ConfigError, format!("bad output directory: {e}")))?;
        }
        let report = cmd_pipeline(&cfg)?;
        if let Some(out) = report_json.as_mut() {
            *out = CString::new(report.to_json())
                .map_err(|_| fail(FgmStatus::InvalidInput, "report contains NUL"))?
                .into_raw();
        }
        Ok(())
    })
}
