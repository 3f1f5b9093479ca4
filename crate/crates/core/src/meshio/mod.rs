//! Triangle meshes and landmark sets: in-memory types, PLY and landmark file
//! formats, and structural validation.

mod landmarks;
mod ply;
mod validate;

use std::path::PathBuf;

use nalgebra::{Point3, Vector3};
use thiserror::Error;

pub use landmarks::{
    read_landmarks, read_landmarks_csv, read_landmarks_json, write_landmarks, LandmarkFormat,
    LandmarkSet,
};
pub use ply::{parse_ply, read_ply, serialize_ply, write_ply, PlyFormat};
pub use validate::{validate_mesh, Finding, ValidationReport};

/// Indexed triangle surface. Coordinates are millimetres, always held as f64.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TriangleMesh {
    pub vertices: Vec<Point3<f64>>,
    pub faces: Vec<[u32; 3]>,
    pub vertex_colors: Option<Vec<[u8; 3]>>,
    pub vertex_normals: Option<Vec<Vector3<f64>>>,
}

impl TriangleMesh {
    pub fn new(vertices: Vec<Point3<f64>>, faces: Vec<[u32; 3]>) -> Self {
        TriangleMesh {
            vertices,
            faces,
            vertex_colors: None,
            vertex_normals: None,
        }
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    /// Corner positions of face `f`. Panics if an index is out of range.
    pub fn triangle(&self, f: usize) -> [Point3<f64>; 3] {
        let [a, b, c] = self.faces[f];
        [
            self.vertices[a as usize],
            self.vertices[b as usize],
            self.vertices[c as usize],
        ]
    }
}

#[derive(Debug, Error)]
pub enum MeshIoError {
    #[error("i/o failure on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed PLY header: {0}")]
    MalformedHeader(String),
    #[error("unsupported PLY format: {0}")]
    UnsupportedFormat(String),
    #[error("malformed PLY payload: {0}")]
    MalformedPayload(String),
    #[error("PLY payload truncated while reading {0}")]
    TruncatedPayload(String),
    #[error("face {face} references vertex {index}, but only {vertex_count} vertices exist")]
    IndexOutOfRange {
        face: usize,
        index: u64,
        vertex_count: usize,
    },
    #[error("face {0} is not a triangle ({1} vertices)")]
    NonTriangleFace(usize, usize),
    #[error("non-finite coordinate at {0}")]
    NonFiniteCoordinate(String),
    #[error("mesh failed validation: {0}")]
    InvalidMesh(String),
    #[error("duplicate landmark name {0:?}")]
    DuplicateName(String),
    #[error("non-numeric coordinate {value:?} for landmark {name:?}")]
    NonNumericCoordinate { name: String, value: String },
    #[error("at least 3 landmarks are required, found {0}")]
    TooFewLandmarks(usize),
    #[error("malformed landmark file: {0}")]
    MalformedLandmarks(String),
}

impl MeshIoError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        MeshIoError::Io {
            path: path.into(),
            source,
        }
    }
}
