use nalgebra::Point3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{GeomError, SpatialIndex};
use crate::meshio::TriangleMesh;

/// Per-point distances with their mean, sample standard deviation and
/// maximum. Aggregates are always recomputed from `per_point` in index
/// order, so they do not depend on how the distances were produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceStats {
    pub per_point: Vec<f64>,
    pub mean: f64,
    pub sd: f64,
    pub max: f64,
}

impl DistanceStats {
    pub fn from_distances(per_point: Vec<f64>) -> Result<Self, GeomError> {
        if per_point.is_empty() {
            return Err(GeomError::EmptyPointSet);
        }
        let (mean, sd, max) = summarize(&per_point);
        Ok(DistanceStats {
            per_point,
            mean,
            sd,
            max,
        })
    }

    /// Concatenates several per-point sequences (in the given order) and
    /// recomputes the aggregates.
    pub fn pooled<'a>(parts: impl IntoIterator<Item = &'a DistanceStats>) -> Result<Self, GeomError> {
        let all: Vec<f64> = parts
            .into_iter()
            .flat_map(|s| s.per_point.iter().copied())
            .collect();
        DistanceStats::from_distances(all)
    }
}

/// Mean, sample SD (n - 1 denominator, 0 for a single value) and max.
pub(crate) fn summarize(values: &[f64]) -> (f64, f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let sd = if values.len() > 1 {
        (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    let max = values.iter().copied().fold(0.0, f64::max);
    (mean, sd, max)
}

/// Which mesh's vertices are the query points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// Low-cost (source) vertices queried against ground truth (target).
    #[default]
    SourceToTarget,
    TargetToSource,
}

/// For every source vertex, the distance to the nearest target vertex.
pub fn point_to_point_stats(
    source: &TriangleMesh,
    target: &TriangleMesh,
) -> Result<DistanceStats, GeomError> {
    if source.vertices.is_empty() {
        return Err(GeomError::EmptyPointSet);
    }
    let index = SpatialIndex::build(&target.vertices)?;
    let per_point: Vec<f64> = source
        .vertices
        .par_iter()
        .map(|p| index.nearest(p).1)
        .collect();
    DistanceStats::from_distances(per_point)
}

pub fn point_to_point_stats_directed(
    source: &TriangleMesh,
    target: &TriangleMesh,
    direction: Direction,
) -> Result<DistanceStats, GeomError> {
    match direction {
        Direction::SourceToTarget => point_to_point_stats(source, target),
        Direction::TargetToSource => point_to_point_stats(target, source),
    }
}

/// Closest point on triangle `abc` to `p`, by Voronoi-region classification.
/// Triangles whose area vanishes relative to their edge lengths are treated
/// as the union of their three edges.
pub fn closest_point_on_triangle(p: &Point3<f64>, tri: &[Point3<f64>; 3]) -> Point3<f64> {
    let [a, b, c] = tri;
    let ab = b - a;
    let ac = c - a;
    let n2 = ab.cross(&ac).norm_squared();
    let scale = ab.norm_squared().max(ac.norm_squared()).max((c - b).norm_squared());
    if n2 <= 1e-24 * scale * scale {
        let candidates = [
            closest_on_segment(p, a, b),
            closest_on_segment(p, b, c),
            closest_on_segment(p, c, a),
        ];
        return candidates
            .into_iter()
            .min_by(|x, y| (x - p).norm_squared().total_cmp(&(y - p).norm_squared()))
            .expect("three candidates");
    }

    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return *a;
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return *b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return a + ab * v;
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return *c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return a + ac * w;
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return b + (c - b) * w;
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    a + ab * v + ac * w
}

fn closest_on_segment(p: &Point3<f64>, a: &Point3<f64>, b: &Point3<f64>) -> Point3<f64> {
    let ab = b - a;
    let len2 = ab.norm_squared();
    if len2 == 0.0 {
        return *a;
    }
    let t = ((p - a).dot(&ab) / len2).clamp(0.0, 1.0);
    a + ab * t
}

/// Euclidean distance from `p` to the closest point of triangle `tri`.
pub fn point_to_triangle_distance(p: &Point3<f64>, tri: &[Point3<f64>; 3]) -> f64 {
    (p - closest_point_on_triangle(p, tri)).norm()
}

/// Per-vertex point-to-surface distances aligned with a mesh's vertices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviationField {
    pub per_vertex: Vec<f64>,
}

impl DeviationField {
    pub fn len(&self) -> usize {
        self.per_vertex.len()
    }

    pub fn is_empty(&self) -> bool {
        self.per_vertex.is_empty()
    }
}

/// Triangle lookup structure: a kD-tree over centroids plus the largest
/// centroid-to-corner radius, which bounds how far a closer triangle's
/// centroid can be from the query.
pub struct TriangleLocator<'m> {
    mesh: &'m TriangleMesh,
    centroids: SpatialIndex,
    max_radius: f64,
}

impl<'m> TriangleLocator<'m> {
    pub fn new(mesh: &'m TriangleMesh) -> Result<Self, GeomError> {
        if mesh.faces.is_empty() {
            return Err(GeomError::NoFaces);
        }
        let report = crate::meshio::validate_mesh(mesh);
        if !report.is_ok() {
            return Err(GeomError::InvalidMesh(report.summary()));
        }
        let mut max_radius: f64 = 0.0;
        let centroids: Vec<Point3<f64>> = (0..mesh.faces.len())
            .map(|f| {
                let [a, b, c] = mesh.triangle(f);
                let g = Point3::from((a.coords + b.coords + c.coords) / 3.0);
                let r = (a - g).norm().max((b - g).norm()).max((c - g).norm());
                max_radius = max_radius.max(r);
                g
            })
            .collect();
        Ok(TriangleLocator {
            mesh,
            centroids: SpatialIndex::build(&centroids)?,
            max_radius,
        })
    }

    /// Exact minimum point-to-triangle distance over every face.
    pub fn distance(&self, p: &Point3<f64>) -> f64 {
        let (seed, _) = self.centroids.nearest(p);
        let mut best = point_to_triangle_distance(p, &self.mesh.triangle(seed));
        // Any triangle closer than `best` has its centroid within
        // best + max_radius; the small inflation absorbs rounding.
        let reach = (best + self.max_radius) * (1.0 + 1e-12) + 1e-12;
        for f in self.centroids.within_radius(p, reach) {
            let d = point_to_triangle_distance(p, &self.mesh.triangle(f));
            if d < best {
                best = d;
            }
        }
        best
    }
}

/// For every source vertex, the exact distance to the target surface.
pub fn surface_deviation(
    source: &TriangleMesh,
    target: &TriangleMesh,
) -> Result<DeviationField, GeomError> {
    let locator = TriangleLocator::new(target)?;
    let per_vertex = source
        .vertices
        .par_iter()
        .map(|p| locator.distance(p))
        .collect();
    Ok(DeviationField { per_vertex })
}
