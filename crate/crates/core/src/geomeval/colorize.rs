use super::{DeviationField, GeomError};
use crate::meshio::TriangleMesh;
use crate::stats::quantile;

pub const BLUE: [u8; 3] = [0, 0, 255];
pub const RED: [u8; 3] = [255, 0, 0];

/// Linear blue-to-red ramp over `t` in [0, 1].
pub fn colormap(t: f64) -> [u8; 3] {
    let t = if t.is_nan() { 0.0 } else { t.clamp(0.0, 1.0) };
    [(255.0 * t).round() as u8, 0, (255.0 * (1.0 - t)).round() as u8]
}

/// Default color cap: the 95th percentile of the field.
pub fn default_cap(field: &DeviationField) -> f64 {
    if field.per_vertex.is_empty() {
        return 0.0;
    }
    let mut v = field.per_vertex.clone();
    v.sort_by(f64::total_cmp);
    quantile(&v, 0.95)
}

/// Copy of `mesh` with vertex colors encoding `field`: 0 is blue, values at
/// or above `cap` are red. A non-positive cap colors everything blue.
pub fn colorize_deviation(
    mesh: &TriangleMesh,
    field: &DeviationField,
    cap: Option<f64>,
) -> Result<TriangleMesh, GeomError> {
    if field.len() != mesh.vertices.len() {
        return Err(GeomError::LengthMismatch {
            expected: mesh.vertices.len(),
            found: field.len(),
        });
    }
    let cap = cap.unwrap_or_else(|| default_cap(field));
    let colors = field
        .per_vertex
        .iter()
        .map(|&d| if cap > 0.0 { colormap(d / cap) } else { BLUE })
        .collect();
    let mut out = mesh.clone();
    out.vertex_colors = Some(colors);
    Ok(out)
}
