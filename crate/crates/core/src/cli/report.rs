use serde::{Deserialize, Serialize};

use crate::edma::{MatchingDistances, SignificantDistanceSet};
use crate::geomeval::DistanceStats;
use crate::morpho::CorrelationResult;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub config_sha256: String,
    pub seed: u64,
    pub tool: String,
    pub tool_version: String,
    /// The only field that differs between identical runs.
    pub timestamp: String,
}

/// Mean, sample SD and max of a distance sequence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Triple {
    pub mean: f64,
    pub sd: f64,
    pub max: f64,
    pub n: usize,
}

impl From<&DistanceStats> for Triple {
    fn from(s: &DistanceStats) -> Self {
        Triple {
            mean: s.mean,
            sd: s.sd,
            max: s.max,
            n: s.per_point.len(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeviationSummary {
    pub mean: f64,
    pub p50: f64,
    pub p95: f64,
    pub max: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentRecord {
    pub method: String,
    pub subject: String,
    pub scale: f64,
    pub rotation_angle: f64,
    /// Row-major rotation matrix.
    pub rotation: [[f64; 3]; 3],
    pub translation: [f64; 3],
    /// RMS residual over the alignment landmarks (mm).
    pub alignment_rms: f64,
    /// RMS residual over all landmarks (mm).
    pub landmark_rms: f64,
    pub vertices_before_crop: usize,
    pub vertices_after_crop: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CropRecord {
    pub subject: String,
    pub vertices_before_crop: usize,
    pub vertices_after_crop: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignCropReport {
    pub ground_truth: Vec<CropRecord>,
    pub methods: Vec<AlignmentRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectGeometry {
    pub subject: String,
    pub point_to_point: Triple,
    pub surface: DeviationSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodGeometry {
    pub method: String,
    /// Table row: `method, avg, sd, max` over the concatenated per-point
    /// distances of every subject.
    pub pooled: Triple,
    /// Mean of the per-subject means.
    pub mean_of_subject_means: f64,
    pub surface_pooled: DeviationSummary,
    pub subjects: Vec<SubjectGeometry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeometricReport {
    pub direction: String,
    pub methods: Vec<MethodGeometry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaSummary {
    /// Variance of each component's scores.
    pub variance_explained: Vec<f64>,
    pub proportion_explained: Vec<f64>,
    pub total_variance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodMorphometrics {
    pub method: String,
    /// Centroid sizes of the method's landmarks against the ground truth's,
    /// subject by subject.
    pub cs_correlation: Option<CorrelationResult>,
    /// Within-method pairwise Procrustes distances against the ground
    /// truth's, pair by pair.
    pub ppd_correlation: Option<CorrelationResult>,
    /// Procrustes distance between the method and ground-truth mean shapes.
    pub procrustes_distance: f64,
    pub permutation_p: f64,
    pub n_perm: usize,
    /// Overlap of the method's PC1-PC2 convex hull with the ground truth's.
    pub hull_iou: Option<f64>,
    pub gpa_iterations: usize,
    pub gpa_converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MorphometricReport {
    pub pca: PcaSummary,
    pub methods: Vec<MethodMorphometrics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopNSets {
    pub n: usize,
    pub longer: Vec<String>,
    pub shorter: Vec<String>,
    /// Overlap with the ground truth's top-n sets (absent for the ground
    /// truth itself).
    pub matching: Option<MatchingDistances>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodEdma {
    pub method: String,
    pub significant: SignificantDistanceSet,
    pub top_n: Vec<TopNSets>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdmaReport {
    /// Numerator and denominator group labels of every ratio.
    pub groups: (String, String),
    pub n_boot: usize,
    pub alpha: f64,
    pub n_pairs: usize,
    pub ground_truth: MethodEdma,
    pub methods: Vec<MethodEdma>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub schema_version: u32,
    pub provenance: Provenance,
    pub ground_truth: String,
    pub subjects: Vec<String>,
    pub landmarks: Vec<String>,
    pub alignment: AlignCropReport,
    pub geometric: GeometricReport,
    pub morphometric: MorphometricReport,
    pub edma: Option<EdmaReport>,
    /// Metrics that could not be computed, with the reason.
    pub warnings: Vec<String>,
}

impl EvaluationReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}
