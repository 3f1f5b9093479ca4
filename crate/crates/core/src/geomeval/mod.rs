//! Geometric fidelity between a low-cost mesh and the ground-truth mesh:
//! spatial indexing, vertex and surface distances, spherical cropping,
//! landmark-based similarity alignment and deviation colorization.

mod align;
mod colorize;
mod crop;
mod distance;
mod kdtree;

use thiserror::Error;

pub use align::{
    apply_transform, fit_similarity, similarity_align, similarity_align_subset, ApplyTransform,
    SimilarityTransform,
};
pub use colorize::{colorize_deviation, colormap, default_cap, BLUE, RED};
pub use crop::crop_sphere;
pub use distance::{
    closest_point_on_triangle, point_to_point_stats, point_to_point_stats_directed,
    point_to_triangle_distance, surface_deviation, DeviationField, Direction, DistanceStats,
    TriangleLocator,
};
pub use kdtree::{build_spatial_index, nearest_neighbor, SpatialIndex};

#[derive(Debug, Error)]
pub enum GeomError {
    #[error("point set is empty")]
    EmptyPointSet,
    #[error("point {0} has a non-finite coordinate")]
    NonFinitePoint(usize),
    #[error("target mesh has no faces")]
    NoFaces,
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),
    #[error("field has {found} values for {expected} vertices")]
    LengthMismatch { expected: usize, found: usize },
    #[error("no vertex lies within the crop sphere")]
    EmptyResult,
    #[error("crop radius must be positive and finite, got {0}")]
    InvalidRadius(f64),
    #[error("landmark name sequences differ")]
    NameMismatch,
    #[error("landmark {0:?} is missing")]
    MissingLandmark(String),
    #[error("degenerate configuration: {0}")]
    DegenerateConfiguration(String),
}
