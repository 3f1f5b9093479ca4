//! Seeded synthetic landmark populations and analytic test meshes.

use std::f64::consts::{PI, TAU};

use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::meshio::TriangleMesh;
use crate::morpho::{Configuration, MorphoError};
use crate::rng::Stream;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("unknown landmark name {0:?}")]
    UnknownLandmarkName(String),
    #[error("invalid population spec: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Morpho(#[from] MorphoError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GroupLabel {
    A,
    B,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectSpec {
    pub target_landmarks: Vec<String>,
    pub displacement: Vector3<f64>,
    pub applies_to: GroupLabel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PopulationSpec {
    pub template: Configuration,
    pub group_sizes: (usize, usize),
    /// Isotropic per-coordinate standard deviation (mm).
    pub noise_sd: f64,
    pub effects: Vec<EffectSpec>,
    pub seed: u64,
}

/// Midline landmarks of [`face_template`].
pub const MIDLINE: [&str; 9] = ["g", "n", "prn", "sn", "ls", "sto", "li", "sl", "pg"];
/// Bilateral landmarks of [`face_template`]; each appears with `_r` and `_l`.
pub const BILATERAL: [&str; 6] = ["ex", "en", "al", "ch", "zy", "go"];

/// A 21-landmark facial template in millimetres: x to the subject's left,
/// y up, z forward, pronasale (`prn`) at the origin.
pub fn face_template() -> Configuration {
    let midline: [[f64; 3]; 9] = [
        [0.0, 48.0, -22.0],
        [0.0, 34.0, -20.0],
        [0.0, 0.0, 0.0],
        [0.0, -14.0, -12.0],
        [0.0, -26.0, -10.0],
        [0.0, -33.0, -12.0],
        [0.0, -40.0, -11.0],
        [0.0, -50.0, -15.0],
        [0.0, -62.0, -12.0],
    ];
    // Left-side coordinates; the right side mirrors x.
    let lateral: [[f64; 3]; 6] = [
        [45.0, 30.0, -35.0],
        [16.0, 30.0, -28.0],
        [17.0, -6.0, -14.0],
        [25.0, -35.0, -22.0],
        [65.0, 20.0, -60.0],
        [55.0, -55.0, -70.0],
    ];
    let mut names = Vec::with_capacity(21);
    let mut coords = Vec::with_capacity(21);
    for (name, c) in MIDLINE.iter().zip(midline) {
        names.push(name.to_string());
        coords.push(Vector3::from(c));
    }
    for (name, c) in BILATERAL.iter().zip(lateral) {
        names.push(format!("{name}_r"));
        coords.push(Vector3::new(-c[0], c[1], c[2]));
        names.push(format!("{name}_l"));
        coords.push(Vector3::from(c));
    }
    Configuration::new("template", "template", names, coords).expect("valid template")
}

/// Noise-free configuration of one group: the template plus that group's
/// effects.
pub fn group_mean(spec: &PopulationSpec, group: GroupLabel) -> Result<Configuration, SynthError> {
    let mut coords = spec.template.coords.clone();
    for effect in spec.effects.iter().filter(|e| e.applies_to == group) {
        for name in &effect.target_landmarks {
            let i = spec
                .template
                .names
                .iter()
                .position(|n| n == name)
                .ok_or_else(|| SynthError::UnknownLandmarkName(name.clone()))?;
            coords[i] += effect.displacement;
        }
    }
    Ok(spec.template.with_coords(coords))
}

/// Draws both groups. Specimen `k` (group A first, then group B) uses RNG
/// stream `k` of `spec.seed`, adding independent N(0, noise_sd^2) noise to
/// every coordinate in x, y, z order, landmark by landmark.
pub fn generate_population(
    spec: &PopulationSpec,
) -> Result<(Vec<Configuration>, Vec<Configuration>), SynthError> {
    let (n_a, n_b) = spec.group_sizes;
    if n_a < 2 || n_b < 2 {
        return Err(SynthError::InvalidSpec(format!(
            "group sizes must be at least 2, got ({n_a}, {n_b})"
        )));
    }
    if !(spec.noise_sd >= 0.0 && spec.noise_sd.is_finite()) {
        return Err(SynthError::InvalidSpec(format!("noise_sd = {}", spec.noise_sd)));
    }
    if spec
        .effects
        .iter()
        .any(|e| !e.displacement.iter().all(|v| v.is_finite()))
    {
        return Err(SynthError::InvalidSpec("non-finite displacement".into()));
    }
    let mean_a = group_mean(spec, GroupLabel::A)?;
    let mean_b = group_mean(spec, GroupLabel::B)?;

    let draw = |mean: &Configuration, k: usize, id: String| {
        let mut stream = Stream::new(spec.seed, k as u64);
        let coords = mean
            .coords
            .iter()
            .map(|c| {
                let mut p = *c;
                for v in p.iter_mut() {
                    *v += spec.noise_sd * stream.normal();
                }
                p
            })
            .collect();
        let mut c = mean.with_coords(coords);
        c.subject_id = id;
        c
    };
    let a = (0..n_a)
        .map(|i| draw(&mean_a, i, format!("A{:03}", i + 1)))
        .collect();
    let b = (0..n_b)
        .map(|i| draw(&mean_b, n_a + i, format!("B{:03}", i + 1)))
        .collect();
    Ok((a, b))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestMeshKind {
    Plane,
    Sphere,
}

/// Analytic fixture meshes.
///
/// * `Plane`: a `resolution x resolution` vertex grid spanning
///   `[-extent/2, extent/2]^2` at z = 0, two triangles per cell.
/// * `Sphere`: a UV sphere of radius `extent` centred at the origin with
///   `resolution` latitude bands and `2 * resolution` longitude segments.
///
/// Panics if `resolution < 2`.
pub fn generate_test_mesh(kind: TestMeshKind, resolution: usize, extent: f64) -> TriangleMesh {
    assert!(resolution >= 2, "resolution must be at least 2");
    match kind {
        TestMeshKind::Plane => plane(resolution, extent),
        TestMeshKind::Sphere => sphere(resolution, extent),
    }
}

fn plane(n: usize, extent: f64) -> TriangleMesh {
    let step = extent / (n - 1) as f64;
    let mut vertices = Vec::with_capacity(n * n);
    for j in 0..n {
        for i in 0..n {
            vertices.push(Point3::new(
                -extent / 2.0 + i as f64 * step,
                -extent / 2.0 + j as f64 * step,
                0.0,
            ));
        }
    }
    let mut faces = Vec::with_capacity(2 * (n - 1) * (n - 1));
    let at = |i: usize, j: usize| (j * n + i) as u32;
    for j in 0..n - 1 {
        for i in 0..n - 1 {
            faces.push([at(i, j), at(i + 1, j), at(i + 1, j + 1)]);
            faces.push([at(i, j), at(i + 1, j + 1), at(i, j + 1)]);
        }
    }
    TriangleMesh::new(vertices, faces)
}

fn sphere(bands: usize, radius: f64) -> TriangleMesh {
    let segments = 2 * bands;
    let mut vertices = vec![Point3::new(0.0, 0.0, radius)];
    for b in 1..bands {
        let theta = PI * b as f64 / bands as f64;
        for s in 0..segments {
            let phi = TAU * s as f64 / segments as f64;
            vertices.push(Point3::new(
                radius * theta.sin() * phi.cos(),
                radius * theta.sin() * phi.sin(),
                radius * theta.cos(),
            ));
        }
    }
    vertices.push(Point3::new(0.0, 0.0, -radius));
    let south = (vertices.len() - 1) as u32;
    let ring = |b: usize, s: usize| (1 + (b - 1) * segments + s % segments) as u32;

    let mut faces = Vec::new();
    for s in 0..segments {
        faces.push([0, ring(1, s), ring(1, s + 1)]);
    }
    for b in 1..bands - 1 {
        for s in 0..segments {
            faces.push([ring(b, s), ring(b + 1, s), ring(b + 1, s + 1)]);
            faces.push([ring(b, s), ring(b + 1, s + 1), ring(b, s + 1)]);
        }
    }
    for s in 0..segments {
        faces.push([ring(bands - 1, s), south, ring(bands - 1, s + 1)]);
    }
    TriangleMesh::new(vertices, faces)
}

/// Smooth face-like height field on a `resolution x resolution` grid over
/// `[-extent/2, extent/2]^2`: a paraboloid of apex curvature radius
/// `radius` opening towards -z, plus a Gaussian nose bump of height
/// `nose_height` (sigma 12 mm) whose tip sits at the origin.
pub fn generate_face_surface(resolution: usize, extent: f64, radius: f64, nose_height: f64) -> TriangleMesh {
    let mut mesh = plane(resolution.max(2), extent);
    for v in &mut mesh.vertices {
        let r2 = v.x * v.x + v.y * v.y;
        v.z = -r2 / (2.0 * radius) + nose_height * ((-r2 / (2.0 * 144.0)).exp() - 1.0);
    }
    mesh
}
