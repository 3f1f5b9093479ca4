use std::collections::HashSet;
use std::fs;
use std::path::Path;

use nalgebra::Point3;
use serde::{Deserialize, Serialize};

use super::{MeshIoError, ValidationReport};

/// Named, ordered 3D landmark configuration for one subject and one
/// acquisition method. Names are opaque identifiers; analyses that combine
/// several sets require identical name sequences.
#[derive(Debug, Clone, PartialEq)]
pub struct LandmarkSet {
    subject_id: String,
    method_tag: String,
    names: Vec<String>,
    points: Vec<Point3<f64>>,
}

impl LandmarkSet {
    pub fn new(
        subject_id: impl Into<String>,
        method_tag: impl Into<String>,
        names: Vec<String>,
        points: Vec<Point3<f64>>,
    ) -> Result<Self, MeshIoError> {
        if names.len() != points.len() {
            return Err(MeshIoError::MalformedLandmarks(format!(
                "{} names for {} points",
                names.len(),
                points.len()
            )));
        }
        if names.len() < 3 {
            return Err(MeshIoError::TooFewLandmarks(names.len()));
        }
        let mut seen = HashSet::with_capacity(names.len());
        for n in &names {
            if !seen.insert(n.as_str()) {
                return Err(MeshIoError::DuplicateName(n.clone()));
            }
        }
        for (n, p) in names.iter().zip(&points) {
            if !p.iter().all(|c| c.is_finite()) {
                return Err(MeshIoError::NonFiniteCoordinate(format!("landmark {n:?}")));
            }
        }
        Ok(LandmarkSet {
            subject_id: subject_id.into(),
            method_tag: method_tag.into(),
            names,
            points,
        })
    }

    pub fn subject_id(&self) -> &str {
        &self.subject_id
    }

    pub fn method_tag(&self) -> &str {
        &self.method_tag
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn points(&self) -> &[Point3<f64>] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn point(&self, name: &str) -> Option<Point3<f64>> {
        self.index_of(name).map(|i| self.points[i])
    }

    pub fn with_metadata(mut self, subject_id: impl Into<String>, method_tag: impl Into<String>) -> Self {
        self.subject_id = subject_id.into();
        self.method_tag = method_tag.into();
        self
    }

    /// Same names and metadata, new coordinates. Coordinates must be finite.
    pub fn with_points(&self, points: Vec<Point3<f64>>) -> Result<Self, MeshIoError> {
        LandmarkSet::new(
            self.subject_id.clone(),
            self.method_tag.clone(),
            self.names.clone(),
            points,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LandmarkFormat {
    Csv,
    Json,
}

impl LandmarkFormat {
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "csv" => Some(LandmarkFormat::Csv),
            "json" => Some(LandmarkFormat::Json),
            _ => None,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct JsonLandmark {
    name: String,
    x: f64,
    y: f64,
    z: f64,
}

#[derive(Serialize, Deserialize)]
struct JsonLandmarkFile {
    #[serde(default)]
    subject_id: String,
    #[serde(default)]
    method_tag: String,
    landmarks: Vec<JsonLandmark>,
}

/// Reads a landmark file; `.json` selects JSON, anything else is parsed as
/// `name,x,y,z` CSV. CSV carries no metadata, so subject_id and method_tag
/// come back empty.
pub fn read_landmarks(path: impl AsRef<Path>) -> Result<LandmarkSet, MeshIoError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| MeshIoError::io(path, e))?;
    match LandmarkFormat::from_path(path) {
        Some(LandmarkFormat::Json) => read_landmarks_json(&text),
        _ => read_landmarks_csv(&text),
    }
}

fn parse_coord(name: &str, raw: &str) -> Result<f64, MeshIoError> {
    let v = raw
        .trim()
        .parse::<f64>()
        .map_err(|_| MeshIoError::NonNumericCoordinate {
            name: name.to_string(),
            value: raw.to_string(),
        })?;
    if !v.is_finite() {
        return Err(MeshIoError::NonNumericCoordinate {
            name: name.to_string(),
            value: raw.to_string(),
        });
    }
    Ok(v)
}

pub fn read_landmarks_csv(text: &str) -> Result<LandmarkSet, MeshIoError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| MeshIoError::MalformedLandmarks(e.to_string()))?;
    let expected = ["name", "x", "y", "z"];
    if headers.len() != 4
        || !headers
            .iter()
            .zip(expected)
            .all(|(h, e)| h.trim_start_matches('\u{feff}').eq_ignore_ascii_case(e))
    {
        return Err(MeshIoError::MalformedLandmarks(format!(
            "expected header name,x,y,z, found {:?}",
            headers.iter().collect::<Vec<_>>()
        )));
    }
    let mut names = Vec::new();
    let mut points = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| MeshIoError::MalformedLandmarks(e.to_string()))?;
        if record.len() != 4 {
            return Err(MeshIoError::MalformedLandmarks(format!(
                "row has {} fields, expected 4",
                record.len()
            )));
        }
        let name = record[0].to_string();
        let p = Point3::new(
            parse_coord(&name, &record[1])?,
            parse_coord(&name, &record[2])?,
            parse_coord(&name, &record[3])?,
        );
        names.push(name);
        points.push(p);
    }
    LandmarkSet::new("", "", names, points)
}

pub fn read_landmarks_json(text: &str) -> Result<LandmarkSet, MeshIoError> {
    let file: JsonLandmarkFile =
        serde_json::from_str(text).map_err(|e| MeshIoError::MalformedLandmarks(e.to_string()))?;
    let (names, points) = file
        .landmarks
        .into_iter()
        .map(|l| (l.name, Point3::new(l.x, l.y, l.z)))
        .unzip();
    LandmarkSet::new(file.subject_id, file.method_tag, names, points)
}

/// Writes a landmark set. The CSV format cannot carry subject_id/method_tag;
/// when either is non-empty the returned report holds a `metadata_dropped`
/// warning.
pub fn write_landmarks(
    set: &LandmarkSet,
    path: impl AsRef<Path>,
    format: LandmarkFormat,
) -> Result<ValidationReport, MeshIoError> {
    let path = path.as_ref();
    let mut report = ValidationReport::default();
    let text = match format {
        LandmarkFormat::Csv => {
            if !set.subject_id.is_empty() || !set.method_tag.is_empty() {
                report.warn(
                    "metadata_dropped",
                    format!(
                        "CSV output drops subject_id {:?} and method_tag {:?}",
                        set.subject_id, set.method_tag
                    ),
                );
            }
            let mut w = csv::Writer::from_writer(Vec::new());
            let io_err = |e: csv::Error| MeshIoError::io(path, std::io::Error::other(e));
            w.write_record(["name", "x", "y", "z"]).map_err(io_err)?;
            for (n, p) in set.names.iter().zip(&set.points) {
                w.write_record([n.clone(), p.x.to_string(), p.y.to_string(), p.z.to_string()])
                    .map_err(io_err)?;
            }
            let bytes = w
                .into_inner()
                .map_err(|e| MeshIoError::io(path, std::io::Error::other(e.to_string())))?;
            String::from_utf8(bytes).expect("csv writer emits UTF-8")
        }
        LandmarkFormat::Json => {
            let file = JsonLandmarkFile {
                subject_id: set.subject_id.clone(),
                method_tag: set.method_tag.clone(),
                landmarks: set
                    .names
                    .iter()
                    .zip(&set.points)
                    .map(|(n, p)| JsonLandmark {
                        name: n.clone(),
                        x: p.x,
                        y: p.y,
                        z: p.z,
                    })
                    .collect(),
            };
            let mut s = serde_json::to_string_pretty(&file).expect("landmarks serialize");
            s.push('\n');
            s
        }
    };
    fs::write(path, text).map_err(|e| MeshIoError::io(path, e))?;
    Ok(report)
}
