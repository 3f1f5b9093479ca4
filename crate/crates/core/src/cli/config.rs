use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::error::CliError;
use crate::edma::{DEFAULT_ALPHA, DEFAULT_N_BOOT};
use crate::geomeval::Direction;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubjectInputs {
    pub id: String,
    pub mesh: PathBuf,
    pub landmarks: PathBuf,
}

/// One acquisition method: a tag plus the files of every subject.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodInputs {
    pub tag: String,
    pub subjects: Vec<SubjectInputs>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GpaSection {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for GpaSection {
    fn default() -> Self {
        GpaSection {
            tol: 1e-10,
            max_iter: 100,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PermutationSection {
    pub n_perm: usize,
}

impl Default for PermutationSection {
    fn default() -> Self {
        PermutationSection { n_perm: 10_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EdmaSection {
    pub n_boot: usize,
    pub alpha: f64,
    pub top_n: Vec<usize>,
}

impl Default for EdmaSection {
    fn default() -> Self {
        EdmaSection {
            n_boot: DEFAULT_N_BOOT,
            alpha: DEFAULT_ALPHA,
            top_n: vec![5, 10],
        }
    }
}

fn default_crop_radius() -> f64 {
    100.0
}

fn default_nose_tip() -> String {
    "prn".into()
}

fn default_true() -> bool {
    true
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("facegm-out")
}

/// Everything one evaluation run needs. Relative paths in a config file are
/// resolved against the directory containing that file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub ground_truth: MethodInputs,
    pub methods: Vec<MethodInputs>,
    #[serde(default = "default_crop_radius")]
    pub crop_radius: f64,
    #[serde(default = "default_nose_tip")]
    pub nose_tip_name: String,
    pub align_landmark_names: Vec<String>,
    /// Subject id to group label; exactly two labels. Without it the EDMA
    /// stage is skipped.
    #[serde(default)]
    pub grouping: BTreeMap<String, String>,
    #[serde(default)]
    pub gpa: GpaSection,
    #[serde(default)]
    pub permutation: PermutationSection,
    #[serde(default)]
    pub edma: EdmaSection,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub direction: Direction,
    /// Use the input meshes as they are instead of aligning them on the
    /// ground truth.
    #[serde(default)]
    pub skip_alignment: bool,
    /// Fit a similarity (with scale) rather than a rigid transform.
    #[serde(default = "default_true")]
    pub align_allow_scale: bool,
    /// Upper end of the deviation colormap (mm); the 95th percentile of each
    /// field when absent.
    #[serde(default)]
    pub deviation_cap: Option<f64>,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl RunConfig {
    /// Reads a `.json` or TOML (any other extension) config file.
    pub fn load(path: impl AsRef<Path>) -> Result<RunConfig, CliError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
        let is_json = path
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("json"));
        let mut cfg = if is_json {
            RunConfig::from_json(&text)?
        } else {
            RunConfig::from_toml(&text)?
        };
        cfg.base_dir = path
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_default();
        Ok(cfg)
    }

    pub fn from_toml(text: &str) -> Result<RunConfig, CliError> {
        toml::from_str(text).map_err(|e| CliError::config(format!("invalid TOML config: {e}")))
    }

    pub fn from_json(text: &str) -> Result<RunConfig, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::config(format!("invalid JSON config: {e}")))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn output_path(&self) -> PathBuf {
        self.resolve(&self.output_dir)
    }

    /// Ground truth first, then the methods in configured order.
    pub fn all_methods(&self) -> impl Iterator<Item = &MethodInputs> {
        std::iter::once(&self.ground_truth).chain(&self.methods)
    }

    pub fn subject_ids(&self) -> Vec<String> {
        self.ground_truth.subjects.iter().map(|s| s.id.clone()).collect()
    }

    /// SHA-256 of the analysis settings and input paths (JSON encoding,
    /// output directory excluded), hex encoded.
    pub fn hash(&self) -> String {
        let mut value = serde_json::to_value(self).expect("config serializes");
        if let Some(map) = value.as_object_mut() {
            map.remove("output_dir");
        }
        let bytes = serde_json::to_vec(&value).expect("config serializes");
        hex::encode(Sha256::digest(&bytes))
    }

    /// The two group labels in sorted order, or `None` without grouping.
    pub fn group_labels(&self) -> Option<(String, String)> {
        let labels: BTreeSet<&String> = self.grouping.values().collect();
        let mut it = labels.into_iter();
        match (it.next(), it.next(), it.next()) {
            (Some(a), Some(b), None) => Some((a.clone(), b.clone())),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let err = |m: String| Err(CliError::config(m));
        if !(self.crop_radius > 0.0 && self.crop_radius.is_finite()) {
            return err(format!("crop_radius must be positive, got {}", self.crop_radius));
        }
        if self.methods.is_empty() {
            return err("at least one method is required".into());
        }
        let mut tags = BTreeSet::new();
        for m in self.all_methods() {
            if m.tag.is_empty() || !is_safe_component(&m.tag) {
                return err(format!("invalid method tag {:?}", m.tag));
            }
            if !tags.insert(&m.tag) {
                return err(format!("duplicate method tag {:?}", m.tag));
            }
            let mut ids = BTreeSet::new();
            for s in &m.subjects {
                if !is_safe_component(&s.id) {
                    return err(format!("invalid subject id {:?} in {:?}", s.id, m.tag));
                }
                if !ids.insert(&s.id) {
                    return err(format!("duplicate subject {:?} in {:?}", s.id, m.tag));
                }
            }
        }
        let reference: BTreeSet<&String> = self.ground_truth.subjects.iter().map(|s| &s.id).collect();
        if reference.is_empty() {
            return err("ground truth lists no subjects".into());
        }
        for m in &self.methods {
            let ids: BTreeSet<&String> = m.subjects.iter().map(|s| &s.id).collect();
            if ids != reference {
                let missing: Vec<_> = reference.difference(&ids).collect();
                let extra: Vec<_> = ids.difference(&reference).collect();
                return Err(CliError::config(format!(
                    "subject mismatch: method {:?} is missing {missing:?} and adds {extra:?}",
                    m.tag
                ))
                .in_method(&m.tag));
            }
        }
        if self.align_landmark_names.len() < 3 {
            return err(format!(
                "align_landmark_names needs at least 3 names, got {}",
                self.align_landmark_names.len()
            ));
        }
        if self.nose_tip_name.is_empty() {
            return err("nose_tip_name is empty".into());
        }
        if self.gpa.tol.is_nan() || self.gpa.tol <= 0.0 || self.gpa.max_iter == 0 {
            return err("gpa.tol must be positive and gpa.max_iter at least 1".into());
        }
        if self.permutation.n_perm == 0 {
            return err("permutation.n_perm must be at least 1".into());
        }
        if self.edma.n_boot == 0 {
            return err("edma.n_boot must be at least 1".into());
        }
        if !(self.edma.alpha > 0.0 && self.edma.alpha < 1.0) {
            return err(format!("edma.alpha must lie in (0, 1), got {}", self.edma.alpha));
        }
        if self.edma.top_n.is_empty() || self.edma.top_n.contains(&0) {
            return err("edma.top_n must list positive sizes".into());
        }
        if let Some(cap) = self.deviation_cap {
            if !(cap > 0.0 && cap.is_finite()) {
                return err(format!("deviation_cap must be positive, got {cap}"));
            }
        }
        if !self.grouping.is_empty() {
            for id in &reference {
                if !self.grouping.contains_key(*id) {
                    return Err(CliError::config("grouping does not cover this subject").in_subject(id));
                }
            }
            if let Some(extra) = self.grouping.keys().find(|k| !reference.contains(k)) {
                return Err(CliError::config("grouping names an unknown subject").in_subject(extra));
            }
            let Some((a, b)) = self.group_labels() else {
                return err("grouping must use exactly two labels".into());
            };
            for label in [a, b] {
                let n = self.grouping.values().filter(|v| **v == label).count();
                if n < 2 {
                    return err(format!("group {label:?} has {n} subject(s), at least 2 required"));
                }
            }
        }
        Ok(())
    }
}

/// Tags and ids become directory names.
fn is_safe_component(s: &str) -> bool {
    !s.is_empty()
        && s != "."
        && s != ".."
        && !s.contains(['/', '\\', '\0'])
}
