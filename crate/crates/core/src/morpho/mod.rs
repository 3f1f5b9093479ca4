//! Landmark-based geometric morphometrics: centroid size, Procrustes fits
//! and distances, generalized Procrustes analysis, PCA morphospace, convex
//! hull overlap, permutation tests and correlation.

mod config;
mod correlation;
mod gpa;
mod hull;
mod pca;
mod permutation;
mod procrustes;

use thiserror::Error;

pub use config::{centroid_size, preshape, Configuration};
pub(crate) use config::check_same_names;
pub use correlation::{pearson_correlation, CorrelationResult};
pub use gpa::{gpa, pairwise_procrustes_distances, GpaOptions, GpaResult};
pub use hull::{clip_convex, convex_hull_2d, polygon_area, polygon_iou, Point2};
pub use pca::{pca, PcaResult};
pub use permutation::{permutation_test_pd, permutation_test_pd_with, PermutationResult};
pub use procrustes::{orthogonal_procrustes, procrustes_distance, RotationFit};

#[derive(Debug, Error)]
pub enum MorphoError {
    #[error("degenerate configuration: {0}")]
    DegenerateConfiguration(String),
    #[error("expected {expected} landmarks, found {found}")]
    LandmarkCountMismatch { expected: usize, found: usize },
    #[error("landmark names of {subject:?} differ from the first specimen")]
    NameMismatch { subject: String },
    #[error("at least {required} specimens are required, found {found}")]
    TooFewSpecimens { required: usize, found: usize },
    #[error("each group needs at least 2 specimens, found {0}")]
    GroupTooSmall(usize),
    #[error("sequences differ in length ({left} vs {right})")]
    LengthMismatch { left: usize, right: usize },
    #[error("at least 3 samples are required, found {0}")]
    TooFewSamples(usize),
    #[error("a variable has zero variance")]
    ZeroVariance,
    #[error("degenerate hull: {0}")]
    DegenerateHull(String),
    #[error("polygon has zero area")]
    ZeroArea,
}
