use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use nalgebra::{Point3, Rotation3, Vector3};
use serde::{Deserialize, Serialize};

use super::config::{EdmaSection, GpaSection, MethodInputs, PermutationSection, RunConfig, SubjectInputs};
use super::error::CliError;
use crate::geomeval::{apply_transform, Direction, SimilarityTransform};
use crate::meshio::{write_landmarks, write_ply, LandmarkFormat, LandmarkSet, PlyFormat, TriangleMesh};
use crate::rng::Stream;
use crate::synthkit::{face_template, generate_face_surface, generate_population, EffectSpec, GroupLabel, PopulationSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SynthMethod {
    /// Byte-for-byte copy of the ground truth (landmarks as CSV).
    Copy,
    /// Ground truth with landmark and surface noise, moved by a random
    /// similarity transform.
    Noisy,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthStudyOptions {
    pub subjects: usize,
    pub seed: u64,
    /// Between-subject landmark variation of the ground truth (mm).
    pub subject_sd: f64,
    /// Landmark noise of the noisy method (mm).
    pub landmark_noise: f64,
    /// Surface noise of the noisy method along z (mm).
    pub surface_noise: f64,
    /// Displacement of `prn` along x in group A (mm).
    pub group_effect: f64,
    pub resolution: usize,
    pub methods: Vec<SynthMethod>,
    pub n_perm: usize,
    pub n_boot: usize,
}

impl Default for SynthStudyOptions {
    fn default() -> Self {
        SynthStudyOptions {
            subjects: 10,
            seed: 1,
            subject_sd: 2.0,
            landmark_noise: 1.0,
            surface_noise: 0.3,
            group_effect: 3.0,
            resolution: 41,
            methods: vec![SynthMethod::Copy, SynthMethod::Noisy],
            n_perm: 999,
            n_boot: 200,
        }
    }
}

/// The five landmarks used for alignment in synthetic studies: inner eye
/// corners, subnasale and mouth corners.
pub const SYNTH_ALIGN_NAMES: [&str; 5] = ["en_r", "en_l", "sn", "ch_r", "ch_l"];

fn method_tag(m: SynthMethod) -> &'static str {
    match m {
        SynthMethod::Copy => "copy",
        SynthMethod::Noisy => "noisy",
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::data(format!("cannot write {}: {e}", path.display()))
}

/// Writes ground-truth and method meshes and landmarks for a synthetic
/// study under `dir`, together with `dir/config.toml`, and returns that
/// configuration. Subjects are split into two groups (A first, then B);
/// group A has `prn` displaced by `group_effect` along x.
///
/// Random streams: the population uses seed `seed`, per-subject surfaces
/// seed `seed + 1` and the noisy method seed `seed + 2`, each with one
/// stream per subject.
pub fn write_synthetic_study(dir: &Path, opts: &SynthStudyOptions) -> Result<RunConfig, CliError> {
    if opts.subjects < 4 {
        return Err(CliError::config("a synthetic study needs at least 4 subjects"));
    }
    let n_a = opts.subjects.div_ceil(2);
    let spec = PopulationSpec {
        template: face_template(),
        group_sizes: (n_a, opts.subjects - n_a),
        noise_sd: opts.subject_sd,
        effects: vec![EffectSpec {
            target_landmarks: vec!["prn".into()],
            displacement: Vector3::new(opts.group_effect, 0.0, 0.0),
            applies_to: GroupLabel::A,
        }],
        seed: opts.seed,
    };
    let (a, b) = generate_population(&spec).map_err(|e| CliError::config(e.to_string()))?;

    let gt_tag = "gt";
    let mut gt_subjects = Vec::new();
    let mut method_subjects: Vec<Vec<SubjectInputs>> = vec![Vec::new(); opts.methods.len()];
    let mut grouping = BTreeMap::new();
    for (k, (config, label)) in a
        .iter()
        .map(|c| (c, "A"))
        .chain(b.iter().map(|c| (c, "B")))
        .enumerate()
    {
        let id = format!("s{:02}", k + 1);
        grouping.insert(id.clone(), label.to_string());
        let points: Vec<Point3<f64>> = config.coords.iter().map(|c| Point3::from(*c)).collect();
        let landmarks = LandmarkSet::new(&id, gt_tag, config.names.clone(), points)?;

        let mut stream = Stream::new(opts.seed.wrapping_add(1), k as u64);
        let radius = 90.0 + 5.0 * stream.normal();
        let nose = 18.0 + 2.0 * stream.normal();
        let mut mesh = generate_face_surface(opts.resolution, 180.0, radius, nose);
        // Carry the surface with the subject's nose tip.
        let tip = landmarks.point("prn").expect("template has prn").coords;
        for v in &mut mesh.vertices {
            *v += tip;
        }

        let rel = |tag: &str, file: &str| PathBuf::from(tag).join(file);
        let gt_mesh = rel(gt_tag, &format!("{id}.ply"));
        let gt_lm = rel(gt_tag, &format!("{id}.json"));
        save_mesh(&dir.join(&gt_mesh), &mesh)?;
        save_landmarks(&dir.join(&gt_lm), &landmarks, LandmarkFormat::Json)?;
        gt_subjects.push(SubjectInputs {
            id: id.clone(),
            mesh: gt_mesh,
            landmarks: gt_lm,
        });

        for (j, m) in opts.methods.iter().enumerate() {
            let tag = method_tag(*m);
            let (mesh_out, lm_out) = match m {
                SynthMethod::Copy => (mesh.clone(), landmarks.clone().with_metadata(&id, tag)),
                SynthMethod::Noisy => noisy_copy(&mesh, &landmarks, opts, k)?,
            };
            let mp = rel(tag, &format!("{id}.ply"));
            let lp = rel(tag, &format!("{id}.csv"));
            save_mesh(&dir.join(&mp), &mesh_out)?;
            save_landmarks(&dir.join(&lp), &lm_out, LandmarkFormat::Csv)?;
            method_subjects[j].push(SubjectInputs {
                id: id.clone(),
                mesh: mp,
                landmarks: lp,
            });
        }
    }

    let cfg = RunConfig {
        ground_truth: MethodInputs {
            tag: gt_tag.into(),
            subjects: gt_subjects,
        },
        methods: opts
            .methods
            .iter()
            .zip(method_subjects)
            .map(|(m, subjects)| MethodInputs {
                tag: method_tag(*m).into(),
                subjects,
            })
            .collect(),
        crop_radius: 100.0,
        nose_tip_name: "prn".into(),
        align_landmark_names: SYNTH_ALIGN_NAMES.iter().map(|s| s.to_string()).collect(),
        grouping,
        gpa: GpaSection::default(),
        permutation: PermutationSection { n_perm: opts.n_perm },
        edma: EdmaSection {
            n_boot: opts.n_boot,
            ..EdmaSection::default()
        },
        seed: opts.seed,
        output_dir: PathBuf::from("out"),
        direction: Direction::SourceToTarget,
        skip_alignment: false,
        align_allow_scale: true,
        deviation_cap: None,
        base_dir: dir.to_path_buf(),
    };
    let path = dir.join("config.toml");
    std::fs::write(&path, cfg.to_toml()).map_err(|e| io_err(&path, e))?;
    Ok(cfg)
}

fn noisy_copy(
    mesh: &TriangleMesh,
    landmarks: &LandmarkSet,
    opts: &SynthStudyOptions,
    k: usize,
) -> Result<(TriangleMesh, LandmarkSet), CliError> {
    let mut stream = Stream::new(opts.seed.wrapping_add(2), k as u64);
    let mut noisy = mesh.clone();
    for v in &mut noisy.vertices {
        v.z += opts.surface_noise * stream.normal();
    }
    let points = landmarks
        .points()
        .iter()
        .map(|p| p + Vector3::new(stream.normal(), stream.normal(), stream.normal()) * opts.landmark_noise)
        .collect();
    let lm = landmarks.with_points(points)?.with_metadata(landmarks.subject_id(), "noisy");
    let axis = Vector3::new(stream.normal(), stream.normal(), stream.normal());
    let t = SimilarityTransform {
        rotation: *Rotation3::new(axis.normalize() * 0.3 * stream.uniform()).matrix(),
        scale: 0.8 + 0.4 * stream.uniform(),
        translation: Vector3::new(stream.normal(), stream.normal(), stream.normal()) * 20.0,
    };
    Ok((apply_transform(&noisy, &t), apply_transform(&lm, &t)))
}

fn save_mesh(path: &Path, mesh: &TriangleMesh) -> Result<(), CliError> {
    if let Some(d) = path.parent() {
        std::fs::create_dir_all(d).map_err(|e| io_err(d, e))?;
    }
    write_ply(mesh, path, PlyFormat::BinaryLittleEndian)?;
    Ok(())
}

fn save_landmarks(path: &Path, set: &LandmarkSet, format: LandmarkFormat) -> Result<(), CliError> {
    if let Some(d) = path.parent() {
        std::fs::create_dir_all(d).map_err(|e| io_err(d, e))?;
    }
    write_landmarks(set, path, format)?;
    Ok(())
}
