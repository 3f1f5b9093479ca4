use nalgebra::{Matrix3, Point3, Vector3};

use super::MorphoError;
use crate::meshio::LandmarkSet;

/// One specimen's landmark coordinates (L x 3, millimetres) with its
/// identifying metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct Configuration {
    pub subject_id: String,
    pub method_tag: String,
    pub names: Vec<String>,
    pub coords: Vec<Vector3<f64>>,
}

impl Configuration {
    pub fn new(
        subject_id: impl Into<String>,
        method_tag: impl Into<String>,
        names: Vec<String>,
        coords: Vec<Vector3<f64>>,
    ) -> Result<Self, MorphoError> {
        if names.len() != coords.len() {
            return Err(MorphoError::LandmarkCountMismatch {
                expected: names.len(),
                found: coords.len(),
            });
        }
        if coords.len() < 3 {
            return Err(MorphoError::DegenerateConfiguration(format!(
                "{} landmarks, at least 3 required",
                coords.len()
            )));
        }
        if coords.iter().any(|c| !c.iter().all(|v| v.is_finite())) {
            return Err(MorphoError::DegenerateConfiguration(
                "non-finite coordinate".into(),
            ));
        }
        Ok(Configuration {
            subject_id: subject_id.into(),
            method_tag: method_tag.into(),
            names,
            coords,
        })
    }

    /// Unnamed configuration (`l0`, `l1`, ...), mostly for tests and
    /// synthetic data.
    pub fn from_coords(coords: Vec<Vector3<f64>>) -> Result<Self, MorphoError> {
        let names = (0..coords.len()).map(|i| format!("l{i}")).collect();
        Configuration::new("", "", names, coords)
    }

    pub fn from_landmarks(set: &LandmarkSet) -> Result<Self, MorphoError> {
        Configuration::new(
            set.subject_id(),
            set.method_tag(),
            set.names().to_vec(),
            set.points().iter().map(|p| p.coords).collect(),
        )
    }

    pub fn to_points(&self) -> Vec<Point3<f64>> {
        self.coords.iter().map(|c| Point3::from(*c)).collect()
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn centroid(&self) -> Vector3<f64> {
        self.coords.iter().sum::<Vector3<f64>>() / self.coords.len() as f64
    }

    /// Copy with coordinates replaced, metadata kept.
    pub fn with_coords(&self, coords: Vec<Vector3<f64>>) -> Configuration {
        debug_assert_eq!(coords.len(), self.coords.len());
        Configuration {
            subject_id: self.subject_id.clone(),
            method_tag: self.method_tag.clone(),
            names: self.names.clone(),
            coords,
        }
    }

    pub fn centered(&self) -> Configuration {
        let c = self.centroid();
        self.with_coords(self.coords.iter().map(|p| p - c).collect())
    }

    pub fn scaled(&self, factor: f64) -> Configuration {
        self.with_coords(self.coords.iter().map(|p| p * factor).collect())
    }

    pub fn rotated(&self, rotation: &Matrix3<f64>) -> Configuration {
        self.with_coords(self.coords.iter().map(|p| rotation * p).collect())
    }

    /// Row-major flattening `x0 y0 z0 x1 ...`.
    pub fn flatten(&self) -> Vec<f64> {
        self.coords.iter().flat_map(|c| [c.x, c.y, c.z]).collect()
    }

    pub fn squared_norm(&self) -> f64 {
        self.coords.iter().map(|c| c.norm_squared()).sum()
    }
}

/// Square root of the summed squared distances of the landmarks to their
/// centroid.
pub fn centroid_size(c: &Configuration) -> Result<f64, MorphoError> {
    let g = c.centroid();
    let cs = c
        .coords
        .iter()
        .map(|p| (p - g).norm_squared())
        .sum::<f64>()
        .sqrt();
    if cs > 0.0 {
        Ok(cs)
    } else {
        Err(MorphoError::DegenerateConfiguration(
            "all landmarks coincide (centroid size 0)".into(),
        ))
    }
}

/// Centered, unit-centroid-size copy.
pub fn preshape(c: &Configuration) -> Result<Configuration, MorphoError> {
    let cs = centroid_size(c)?;
    Ok(c.centered().scaled(1.0 / cs))
}

pub(crate) fn check_same_names(configs: &[Configuration]) -> Result<(), MorphoError> {
    let Some(first) = configs.first() else {
        return Ok(());
    };
    for c in &configs[1..] {
        if c.names != first.names {
            return Err(MorphoError::NameMismatch {
                subject: c.subject_id.clone(),
            });
        }
    }
    Ok(())
}
