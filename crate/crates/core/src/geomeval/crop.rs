use nalgebra::Point3;

use super::GeomError;
use crate::meshio::TriangleMesh;

/// Keeps the part of `mesh` inside a sphere.
///
/// A vertex survives when its distance to `center` is at most `radius`; a
/// face survives only when all three corners survive. Vertices that no
/// surviving face references are dropped too (unless the input had no faces
/// at all, in which case the retained point cloud is returned). Colors and
/// normals follow their vertices. Relative vertex order is preserved.
pub fn crop_sphere(
    mesh: &TriangleMesh,
    center: &Point3<f64>,
    radius: f64,
) -> Result<TriangleMesh, GeomError> {
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(GeomError::InvalidRadius(radius));
    }
    let r2 = radius * radius;
    let inside: Vec<bool> = mesh
        .vertices
        .iter()
        .map(|v| (v - center).norm_squared() <= r2)
        .collect();

    let kept_faces: Vec<[u32; 3]> = mesh
        .faces
        .iter()
        .copied()
        .filter(|f| f.iter().all(|&i| inside[i as usize]))
        .collect();

    let keep: Vec<bool> = if mesh.faces.is_empty() {
        inside
    } else {
        let mut used = vec![false; mesh.vertices.len()];
        for f in &kept_faces {
            for &i in f {
                used[i as usize] = true;
            }
        }
        used
    };

    let mut remap = vec![u32::MAX; mesh.vertices.len()];
    let mut next = 0u32;
    for (i, &k) in keep.iter().enumerate() {
        if k {
            remap[i] = next;
            next += 1;
        }
    }
    if next == 0 {
        return Err(GeomError::EmptyResult);
    }

    let select = |i: usize| keep[i];
    Ok(TriangleMesh {
        vertices: (0..mesh.vertices.len())
            .filter(|&i| select(i))
            .map(|i| mesh.vertices[i])
            .collect(),
        faces: kept_faces
            .iter()
            .map(|f| f.map(|i| remap[i as usize]))
            .collect(),
        vertex_colors: mesh.vertex_colors.as_ref().map(|c| {
            (0..c.len()).filter(|&i| select(i)).map(|i| c[i]).collect()
        }),
        vertex_normals: mesh.vertex_normals.as_ref().map(|n| {
            (0..n.len()).filter(|&i| select(i)).map(|i| n[i]).collect()
        }),
    })
}
