use nalgebra::{Matrix3, Point3, Vector3};
use serde::{Deserialize, Serialize};

use super::GeomError;
use crate::meshio::{LandmarkSet, TriangleMesh};

/// `x -> scale * rotation * x + translation`, with a proper rotation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimilarityTransform {
    pub rotation: Matrix3<f64>,
    pub scale: f64,
    pub translation: Vector3<f64>,
}

impl Default for SimilarityTransform {
    fn default() -> Self {
        Self::identity()
    }
}

impl SimilarityTransform {
    pub fn identity() -> Self {
        SimilarityTransform {
            rotation: Matrix3::identity(),
            scale: 1.0,
            translation: Vector3::zeros(),
        }
    }

    pub fn apply(&self, p: &Point3<f64>) -> Point3<f64> {
        Point3::from(self.rotation * p.coords * self.scale + self.translation)
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        SimilarityTransform {
            rotation: rt,
            scale: 1.0 / self.scale,
            translation: -(rt * self.translation) / self.scale,
        }
    }

    /// Rotation angle in radians.
    pub fn rotation_angle(&self) -> f64 {
        ((self.rotation.trace() - 1.0) / 2.0).clamp(-1.0, 1.0).acos()
    }
}

pub trait ApplyTransform: Sized {
    fn transformed(&self, t: &SimilarityTransform) -> Self;
}

impl ApplyTransform for TriangleMesh {
    fn transformed(&self, t: &SimilarityTransform) -> Self {
        TriangleMesh {
            vertices: self.vertices.iter().map(|p| t.apply(p)).collect(),
            faces: self.faces.clone(),
            vertex_colors: self.vertex_colors.clone(),
            vertex_normals: self
                .vertex_normals
                .as_ref()
                .map(|ns| ns.iter().map(|n| t.rotation * n).collect()),
        }
    }
}

impl ApplyTransform for LandmarkSet {
    fn transformed(&self, t: &SimilarityTransform) -> Self {
        self.with_points(self.points().iter().map(|p| t.apply(p)).collect())
            .expect("a finite similarity keeps coordinates finite")
    }
}

pub fn apply_transform<G: ApplyTransform>(geometry: &G, t: &SimilarityTransform) -> G {
    geometry.transformed(t)
}

/// Least-squares similarity (or rigid, when `allow_scale` is false) mapping
/// `source` onto `target` over all landmarks, via the SVD of the
/// cross-covariance with the reflection case excluded.
pub fn similarity_align(
    source: &LandmarkSet,
    target: &LandmarkSet,
    allow_scale: bool,
) -> Result<SimilarityTransform, GeomError> {
    if source.names() != target.names() {
        return Err(GeomError::NameMismatch);
    }
    fit_similarity(source.points(), target.points(), allow_scale)
}

/// Same as [`similarity_align`] but restricted to the named landmarks, in
/// the given order.
pub fn similarity_align_subset(
    source: &LandmarkSet,
    target: &LandmarkSet,
    names: &[String],
    allow_scale: bool,
) -> Result<SimilarityTransform, GeomError> {
    let pick = |set: &LandmarkSet| -> Result<Vec<Point3<f64>>, GeomError> {
        names
            .iter()
            .map(|n| {
                set.point(n)
                    .ok_or_else(|| GeomError::MissingLandmark(n.clone()))
            })
            .collect()
    };
    fit_similarity(&pick(source)?, &pick(target)?, allow_scale)
}

/// Closed-form point-set similarity fit (Umeyama).
pub fn fit_similarity(
    source: &[Point3<f64>],
    target: &[Point3<f64>],
    allow_scale: bool,
) -> Result<SimilarityTransform, GeomError> {
    if source.len() != target.len() {
        return Err(GeomError::NameMismatch);
    }
    if source.len() < 3 {
        return Err(GeomError::DegenerateConfiguration(
            "at least 3 correspondences are required".into(),
        ));
    }
    let n = source.len() as f64;
    let mu_s = source.iter().map(|p| p.coords).sum::<Vector3<f64>>() / n;
    let mu_t = target.iter().map(|p| p.coords).sum::<Vector3<f64>>() / n;

    let mut scatter = Matrix3::zeros();
    let mut cross = Matrix3::zeros();
    let mut var_s = 0.0;
    for (s, t) in source.iter().zip(target) {
        let sc = s.coords - mu_s;
        let tc = t.coords - mu_t;
        scatter += sc * sc.transpose();
        cross += tc * sc.transpose();
        var_s += sc.norm_squared();
    }
    let sv = scatter.symmetric_eigenvalues();
    let mut sv: Vec<f64> = sv.iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    if sv[0] <= 0.0 || sv[1] <= 1e-12 * sv[0] {
        return Err(GeomError::DegenerateConfiguration(
            "source landmarks are coincident or collinear".into(),
        ));
    }

    if source == target {
        return Ok(SimilarityTransform::identity());
    }

    let svd = cross.svd(true, true);
    let u = svd.u.expect("u requested");
    let v_t = svd.v_t.expect("v_t requested");
    let d = if (u * v_t).determinant() < 0.0 { -1.0 } else { 1.0 };
    let signs = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, d));
    let rotation = u * signs * v_t;
    let scale = if allow_scale {
        let sigma = svd.singular_values;
        (sigma[0] + sigma[1] + d * sigma[2]) / var_s
    } else {
        1.0
    };
    if scale.is_nan() || scale <= 0.0 {
        return Err(GeomError::DegenerateConfiguration(
            "fitted scale is not positive".into(),
        ));
    }
    let translation = mu_t - rotation * mu_s * scale;
    Ok(SimilarityTransform {
        rotation,
        scale,
        translation,
    })
}
