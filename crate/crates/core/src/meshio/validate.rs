use serde::{Deserialize, Serialize};

use super::TriangleMesh;

/// A single validation finding: a stable machine code plus a human message.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Finding {
    pub code: String,
    pub message: String,
}

/// Errors block downstream use; warnings are informational.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub errors: Vec<Finding>,
    pub warnings: Vec<Finding>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.errors.is_empty()
    }

    pub(crate) fn error(&mut self, code: &str, message: String) {
        self.errors.push(Finding {
            code: code.to_string(),
            message,
        });
    }

    pub(crate) fn warn(&mut self, code: &str, message: String) {
        self.warnings.push(Finding {
            code: code.to_string(),
            message,
        });
    }

    pub fn has_warning(&self, code: &str) -> bool {
        self.warnings.iter().any(|f| f.code == code)
    }

    pub fn has_error(&self, code: &str) -> bool {
        self.errors.iter().any(|f| f.code == code)
    }

    /// All error messages joined on one line.
    pub fn summary(&self) -> String {
        self.errors
            .iter()
            .map(|f| format!("{}: {}", f.code, f.message))
            .collect::<Vec<_>>()
            .join("; ")
    }
}

/// Structural checks on a mesh.
///
/// Errors: non-finite coordinates or normals, face indices out of range,
/// color/normal arrays whose length differs from the vertex count.
/// Warnings: zero-area faces and vertices no face references.
pub fn validate_mesh(mesh: &TriangleMesh) -> ValidationReport {
    let mut report = ValidationReport::default();
    let n = mesh.vertices.len();

    for (i, v) in mesh.vertices.iter().enumerate() {
        if !(v.x.is_finite() && v.y.is_finite() && v.z.is_finite()) {
            report.error(
                "non_finite_coordinate",
                format!("vertex {i} has a non-finite coordinate ({}, {}, {})", v.x, v.y, v.z),
            );
        }
    }

    if let Some(colors) = &mesh.vertex_colors {
        if colors.len() != n {
            report.error(
                "color_length_mismatch",
                format!("{} colors for {} vertices", colors.len(), n),
            );
        }
    }
    if let Some(normals) = &mesh.vertex_normals {
        if normals.len() != n {
            report.error(
                "normal_length_mismatch",
                format!("{} normals for {} vertices", normals.len(), n),
            );
        }
        for (i, nv) in normals.iter().enumerate() {
            if !nv.iter().all(|c| c.is_finite()) {
                report.error("non_finite_normal", format!("normal {i} is not finite"));
            }
        }
    }

    let mut referenced = vec![false; n];
    for (f, face) in mesh.faces.iter().enumerate() {
        let mut in_range = true;
        for &idx in face {
            if (idx as usize) < n {
                referenced[idx as usize] = true;
            } else {
                in_range = false;
                report.error(
                    "index_out_of_range",
                    format!("face {f} references vertex {idx} of {n}"),
                );
            }
        }
        if !in_range {
            continue;
        }
        let [a, b, c] = mesh.triangle(f);
        let doubled_area = (b - a).cross(&(c - a)).norm();
        if face[0] == face[1] || face[1] == face[2] || face[0] == face[2] || doubled_area == 0.0 {
            report.warn(
                "degenerate_face",
                format!("face {f} ({}, {}, {}) has zero area", face[0], face[1], face[2]),
            );
        }
    }

    let unreferenced = referenced.iter().filter(|r| !**r).count();
    if unreferenced > 0 && !mesh.faces.is_empty() {
        report.warn(
            "unreferenced_vertex",
            format!("{unreferenced} vertices are not referenced by any face"),
        );
    }
    report
}
