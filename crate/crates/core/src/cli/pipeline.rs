use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use nalgebra::Point3;
use rayon::prelude::*;

use super::config::{MethodInputs, RunConfig, SubjectInputs};
use super::error::{CliError, ErrorKind};
use super::report::*;
use crate::edma::{
    bootstrap_fdm, direction_of, form_matrix, matching_distances, pair_label, significant_distances,
    top_n, FormDifferenceResult, FormMatrix, TopN,
};
use crate::geomeval::{
    apply_transform, colorize_deviation, crop_sphere, point_to_point_stats_directed,
    similarity_align_subset, surface_deviation, DistanceStats, Direction, SimilarityTransform,
};
use crate::meshio::{
    read_landmarks, read_ply, validate_mesh, write_landmarks, write_ply, LandmarkFormat, LandmarkSet,
    PlyFormat, TriangleMesh,
};
use crate::morpho::{
    centroid_size, convex_hull_2d, gpa, pairwise_procrustes_distances, pca, pearson_correlation,
    permutation_test_pd_with, polygon_iou, Configuration, GpaOptions, GpaResult, Point2,
};
use crate::stats::quantile;

/// One subject after alignment and cropping, in the ground-truth frame.
#[derive(Debug, Clone)]
pub struct Subject {
    pub id: String,
    pub mesh: TriangleMesh,
    pub landmarks: LandmarkSet,
}

#[derive(Debug, Clone)]
pub struct MethodData {
    pub tag: String,
    /// In ground-truth subject order.
    pub subjects: Vec<Subject>,
}

/// Inputs after the load and align/crop stages.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub ground_truth: MethodData,
    pub methods: Vec<MethodData>,
    pub landmark_names: Vec<String>,
    pub alignment: AlignCropReport,
}

const STAGE_LOAD: &str = "load";
const STAGE_ALIGN: &str = "align_crop";
const STAGE_GEOM: &str = "geometric";
const STAGE_MORPHO: &str = "morphometric";
const STAGE_EDMA: &str = "edma";
const STAGE_OUTPUT: &str = "output";

/// Runs `f` over `items` in parallel and returns the results in input order,
/// or the error of the first failing item in that order.
fn par_map_ordered<T: Sync, R: Send>(
    items: &[T],
    f: impl Fn(&T) -> Result<R, CliError> + Sync + Send,
) -> Result<Vec<R>, CliError> {
    items
        .par_iter()
        .map(f)
        .collect::<Vec<_>>()
        .into_iter()
        .collect()
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let fail = |e: std::io::Error| {
        CliError::data(format!("cannot write {}: {e}", path.display())).in_stage(STAGE_OUTPUT)
    };
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(fail)?;
    }
    std::fs::write(path, bytes).map_err(fail)
}

fn subject_dir(cfg: &RunConfig, method: &str, subject: &str) -> PathBuf {
    cfg.output_path().join(method).join(subject)
}

fn load_subject(cfg: &RunConfig, tag: &str, s: &SubjectInputs) -> Result<(TriangleMesh, LandmarkSet), CliError> {
    let tagged = |e: CliError| e.in_stage(STAGE_LOAD).in_method(tag).in_subject(&s.id);
    let mesh = read_ply(cfg.resolve(&s.mesh)).map_err(|e| tagged(e.into()))?;
    let report = validate_mesh(&mesh);
    if !report.is_ok() {
        return Err(tagged(CliError::data(format!("invalid mesh: {}", report.summary()))));
    }
    let landmarks = read_landmarks(cfg.resolve(&s.landmarks))
        .map_err(|e| tagged(e.into()))?
        .with_metadata(&s.id, tag);
    Ok((mesh, landmarks))
}

/// Reorders `set` to `names`; the two name sets must be equal.
fn reorder(set: &LandmarkSet, names: &[String]) -> Result<LandmarkSet, CliError> {
    if set.len() != names.len() {
        return Err(CliError::data(format!(
            "expected {} landmarks, found {}",
            names.len(),
            set.len()
        )));
    }
    let points = names
        .iter()
        .map(|n| {
            set.point(n)
                .ok_or_else(|| CliError::data(format!("landmark {n:?} is missing")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(LandmarkSet::new(set.subject_id(), set.method_tag(), names.to_vec(), points)?)
}

fn inputs_in_order<'a>(m: &'a MethodInputs, order: &[String]) -> Vec<&'a SubjectInputs> {
    order
        .iter()
        .map(|id| m.subjects.iter().find(|s| &s.id == id).expect("validated subject set"))
        .collect()
}

fn nose_tip(cfg: &RunConfig, set: &LandmarkSet) -> Result<Point3<f64>, CliError> {
    set.point(&cfg.nose_tip_name).ok_or_else(|| {
        CliError::data(format!("nose tip landmark {:?} is missing", cfg.nose_tip_name))
    })
}

fn rms(a: &[Point3<f64>], b: &[Point3<f64>]) -> f64 {
    let ss: f64 = a.iter().zip(b).map(|(p, q)| (p - q).norm_squared()).sum();
    (ss / a.len() as f64).sqrt()
}

fn pick(set: &LandmarkSet, names: &[String]) -> Vec<Point3<f64>> {
    names.iter().filter_map(|n| set.point(n)).collect()
}

/// Loads every input, aligns each method subject onto its ground-truth
/// counterpart over the alignment landmarks and crops all meshes at their
/// nose tip. With `write`, the normalized meshes and landmarks are saved
/// under `<output>/<method>/<subject>/`.
pub fn prepare(cfg: &RunConfig, write: bool) -> Result<Prepared, CliError> {
    cfg.validate()?;
    let order = cfg.subject_ids();

    let gt_inputs = inputs_in_order(&cfg.ground_truth, &order);
    let gt_tag = cfg.ground_truth.tag.as_str();
    let gt_loaded = par_map_ordered(&gt_inputs, |s| load_subject(cfg, gt_tag, s))?;
    let landmark_names = gt_loaded[0].1.names().to_vec();

    let gt: Vec<(Subject, CropRecord)> = par_map_ordered(&gt_loaded, |(mesh, lm)| {
        let id = lm.subject_id().to_string();
        let tagged = |e: CliError| e.in_stage(STAGE_ALIGN).in_method(gt_tag).in_subject(&id);
        let landmarks = reorder(lm, &landmark_names).map_err(|e| tagged(e.in_stage(STAGE_LOAD)))?;
        let tip = nose_tip(cfg, &landmarks).map_err(tagged)?;
        let cropped = crop_sphere(mesh, &tip, cfg.crop_radius).map_err(|e| tagged(e.into()))?;
        Ok((
            Subject {
                id: id.clone(),
                mesh: cropped.clone(),
                landmarks,
            },
            CropRecord {
                subject: id.clone(),
                vertices_before_crop: mesh.vertex_count(),
                vertices_after_crop: cropped.vertex_count(),
            },
        ))
    })?;
    let (gt_subjects, gt_crops): (Vec<Subject>, Vec<CropRecord>) = gt.into_iter().unzip();

    let mut methods = Vec::with_capacity(cfg.methods.len());
    let mut records = Vec::new();
    for m in &cfg.methods {
        let inputs = inputs_in_order(m, &order);
        let loaded = par_map_ordered(&inputs, |s| load_subject(cfg, &m.tag, s))?;
        let jobs: Vec<(usize, &(TriangleMesh, LandmarkSet))> = loaded.iter().enumerate().collect();
        let done = par_map_ordered(&jobs, |(i, (mesh, lm))| {
            let reference = &gt_subjects[*i];
            let tagged = |e: CliError| e.in_stage(STAGE_ALIGN).in_method(&m.tag).in_subject(&reference.id);
            let lm = reorder(lm, &landmark_names).map_err(|e| tagged(e.in_stage(STAGE_LOAD)))?;
            let t = if cfg.skip_alignment {
                SimilarityTransform::identity()
            } else {
                similarity_align_subset(
                    &lm,
                    &reference.landmarks,
                    &cfg.align_landmark_names,
                    cfg.align_allow_scale,
                )
                .map_err(|e| tagged(e.into()))?
            };
            let moved_mesh = apply_transform(mesh, &t);
            let moved_lm = apply_transform(&lm, &t);
            let tip = nose_tip(cfg, &moved_lm).map_err(tagged)?;
            let cropped = crop_sphere(&moved_mesh, &tip, cfg.crop_radius).map_err(|e| tagged(e.into()))?;
            let r = t.rotation;
            let record = AlignmentRecord {
                method: m.tag.clone(),
                subject: reference.id.clone(),
                scale: t.scale,
                rotation_angle: t.rotation_angle(),
                rotation: [
                    [r[(0, 0)], r[(0, 1)], r[(0, 2)]],
                    [r[(1, 0)], r[(1, 1)], r[(1, 2)]],
                    [r[(2, 0)], r[(2, 1)], r[(2, 2)]],
                ],
                translation: [t.translation.x, t.translation.y, t.translation.z],
                alignment_rms: rms(
                    &pick(&moved_lm, &cfg.align_landmark_names),
                    &pick(&reference.landmarks, &cfg.align_landmark_names),
                ),
                landmark_rms: rms(moved_lm.points(), reference.landmarks.points()),
                vertices_before_crop: mesh.vertex_count(),
                vertices_after_crop: cropped.vertex_count(),
            };
            Ok((
                Subject {
                    id: reference.id.clone(),
                    mesh: cropped,
                    landmarks: moved_lm,
                },
                record,
            ))
        })?;
        let (subjects, recs): (Vec<Subject>, Vec<AlignmentRecord>) = done.into_iter().unzip();
        records.extend(recs);
        methods.push(MethodData {
            tag: m.tag.clone(),
            subjects,
        });
    }

    let prepared = Prepared {
        ground_truth: MethodData {
            tag: gt_tag.to_string(),
            subjects: gt_subjects,
        },
        methods,
        landmark_names,
        alignment: AlignCropReport {
            ground_truth: gt_crops,
            methods: records,
        },
    };
    if write {
        write_prepared(cfg, &prepared)?;
    }
    Ok(prepared)
}

fn write_prepared(cfg: &RunConfig, p: &Prepared) -> Result<(), CliError> {
    for m in std::iter::once(&p.ground_truth).chain(&p.methods) {
        par_map_ordered(&m.subjects, |s| {
            let dir = subject_dir(cfg, &m.tag, &s.id);
            let tagged = |e: CliError| e.in_stage(STAGE_OUTPUT).in_method(&m.tag).in_subject(&s.id);
            std::fs::create_dir_all(&dir)
                .map_err(|e| tagged(CliError::data(format!("cannot create {}: {e}", dir.display()))))?;
            write_ply(&s.mesh, dir.join("mesh.ply"), PlyFormat::BinaryLittleEndian)
                .map_err(|e| tagged(e.into()))?;
            write_landmarks(&s.landmarks, dir.join("landmarks.json"), LandmarkFormat::Json)
                .map_err(|e| tagged(e.into()))?;
            Ok(())
        })?;
    }
    Ok(())
}

fn deviation_summary(values: &[f64]) -> DeviationSummary {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    DeviationSummary {
        mean: crate::stats::mean(values),
        p50: quantile(&sorted, 0.5),
        p95: quantile(&sorted, 0.95),
        max: sorted.last().copied().unwrap_or(0.0),
        n: values.len(),
    }
}

fn distances_csv(values: &[f64]) -> String {
    let mut out = String::from("index,distance\n");
    for (i, d) in values.iter().enumerate() {
        writeln!(out, "{i},{d}").expect("write to string");
    }
    out
}

fn direction_name(d: Direction) -> &'static str {
    match d {
        Direction::SourceToTarget => "source_to_target",
        Direction::TargetToSource => "target_to_source",
    }
}

/// Point-to-point statistics and surface deviation of every method subject
/// against its ground truth. With `write`, saves per subject
/// `deviation.ply` (colored by surface deviation), `point_distances.csv`
/// and `surface_deviation.csv`.
pub fn geometric_stage(cfg: &RunConfig, p: &Prepared, write: bool) -> Result<GeometricReport, CliError> {
    let mut methods = Vec::with_capacity(p.methods.len());
    for m in &p.methods {
        let jobs: Vec<(&Subject, &Subject)> = m.subjects.iter().zip(&p.ground_truth.subjects).collect();
        let per_subject = par_map_ordered(&jobs, |(s, gt)| {
            let tagged = |e: CliError| e.in_stage(STAGE_GEOM).in_method(&m.tag).in_subject(&s.id);
            let p2p = point_to_point_stats_directed(&s.mesh, &gt.mesh, cfg.direction)
                .map_err(|e| tagged(e.into()))?;
            let field = surface_deviation(&s.mesh, &gt.mesh).map_err(|e| tagged(e.into()))?;
            if write {
                let dir = subject_dir(cfg, &m.tag, &s.id);
                let colored = colorize_deviation(&s.mesh, &field, cfg.deviation_cap)
                    .map_err(|e| tagged(e.into()))?;
                std::fs::create_dir_all(&dir)
                    .map_err(|e| tagged(CliError::data(format!("cannot create {}: {e}", dir.display()))))?;
                write_ply(&colored, dir.join("deviation.ply"), PlyFormat::BinaryLittleEndian)
                    .map_err(|e| tagged(e.into()))?;
                write_file(&dir.join("point_distances.csv"), distances_csv(&p2p.per_point).as_bytes())
                    .map_err(tagged)?;
                write_file(&dir.join("surface_deviation.csv"), distances_csv(&field.per_vertex).as_bytes())
                    .map_err(tagged)?;
            }
            Ok((p2p, field.per_vertex))
        })?;
        let pooled = DistanceStats::pooled(per_subject.iter().map(|(s, _)| s))
            .map_err(|e| CliError::from(e).in_stage(STAGE_GEOM).in_method(&m.tag))?;
        let means: Vec<f64> = per_subject.iter().map(|(s, _)| s.mean).collect();
        let all_surface: Vec<f64> = per_subject.iter().flat_map(|(_, f)| f.iter().copied()).collect();
        methods.push(MethodGeometry {
            method: m.tag.clone(),
            pooled: Triple::from(&pooled),
            mean_of_subject_means: crate::stats::mean(&means),
            surface_pooled: deviation_summary(&all_surface),
            subjects: m
                .subjects
                .iter()
                .zip(&per_subject)
                .map(|(s, (p2p, field))| SubjectGeometry {
                    subject: s.id.clone(),
                    point_to_point: Triple::from(p2p),
                    surface: deviation_summary(field),
                })
                .collect(),
        });
    }
    Ok(GeometricReport {
        direction: direction_name(cfg.direction).to_string(),
        methods,
    })
}

fn configurations(m: &MethodData) -> Result<Vec<Configuration>, CliError> {
    m.subjects
        .iter()
        .map(|s| {
            Configuration::from_landmarks(&s.landmarks)
                .map_err(|e| CliError::from(e).in_method(&m.tag).in_subject(&s.id))
        })
        .collect()
}

fn gpa_options(cfg: &RunConfig) -> GpaOptions {
    GpaOptions {
        scale: true,
        tol: cfg.gpa.tol,
        max_iter: cfg.gpa.max_iter,
    }
}

fn hull_of(points: &[Point2]) -> Result<Vec<Point2>, String> {
    convex_hull_2d(points).map_err(|e| e.to_string())
}

/// Centroid-size and pairwise-Procrustes-distance correlations, permutation
/// test on mean shapes, joint PCA and PC1-PC2 hull overlap. With `write`,
/// saves `pca_scores.csv` at the top of the output directory. Metrics that
/// cannot be computed (for example a correlation over constant values) are
/// reported as absent with a warning.
pub fn morphometric_stage(
    cfg: &RunConfig,
    p: &Prepared,
    write: bool,
    warnings: &mut Vec<String>,
) -> Result<MorphometricReport, CliError> {
    let tag_err = |e: CliError| e.in_stage(STAGE_MORPHO);
    let n = p.ground_truth.subjects.len();
    if n < 3 {
        return Err(tag_err(CliError::config(format!(
            "too few subjects: at least 3 required, found {n}"
        ))));
    }
    let opts = gpa_options(cfg);
    let gt_configs = configurations(&p.ground_truth).map_err(tag_err)?;
    let gt_cs = gt_configs
        .iter()
        .map(|c| centroid_size(c).map_err(|e| tag_err(CliError::from(e).in_subject(&c.subject_id))))
        .collect::<Result<Vec<_>, _>>()?;
    let gt_gpa = gpa(&gt_configs, &opts).map_err(|e| tag_err(CliError::from(e).in_method(&p.ground_truth.tag)))?;
    note_convergence(&gt_gpa, &p.ground_truth.tag, "within-method", warnings);
    let gt_ppd = pairwise_procrustes_distances(&gt_gpa);

    // Joint superimposition of every specimen for the morphospace.
    let mut all_configs = gt_configs.clone();
    let mut method_configs = Vec::with_capacity(p.methods.len());
    for m in &p.methods {
        let c = configurations(m).map_err(tag_err)?;
        all_configs.extend(c.iter().cloned());
        method_configs.push(c);
    }
    let joint = gpa(&all_configs, &opts).map_err(|e| tag_err(e.into()))?;
    note_convergence(&joint, "all methods", "joint", warnings);
    let pcs = pca(&joint.aligned).map_err(|e| tag_err(e.into()))?;
    let pc12 = pcs.pc12();
    let gt_hull = hull_of(&pc12[..n]);
    if let Err(e) = &gt_hull {
        warnings.push(format!("{}: PC1-PC2 hull unavailable ({e})", p.ground_truth.tag));
    }

    let mut methods = Vec::with_capacity(p.methods.len());
    for (k, (m, configs)) in p.methods.iter().zip(&method_configs).enumerate() {
        let tagged = |e: CliError| e.in_stage(STAGE_MORPHO).in_method(&m.tag);
        let cs = configs
            .iter()
            .map(|c| centroid_size(c).map_err(|e| tagged(CliError::from(e).in_subject(&c.subject_id))))
            .collect::<Result<Vec<_>, _>>()?;
        let cs_correlation = match pearson_correlation(&gt_cs, &cs) {
            Ok(c) => Some(c),
            Err(e) => {
                warnings.push(format!("{}: CS correlation unavailable ({e})", m.tag));
                None
            }
        };
        let own = gpa(configs, &opts).map_err(|e| tagged(e.into()))?;
        note_convergence(&own, &m.tag, "within-method", warnings);
        let ppd = pairwise_procrustes_distances(&own);
        let ppd_correlation = match pearson_correlation(&gt_ppd, &ppd) {
            Ok(c) => Some(c),
            Err(e) => {
                warnings.push(format!("{}: PPD correlation unavailable ({e})", m.tag));
                None
            }
        };
        let (perm, pair_gpa) =
            permutation_test_pd_with(&gt_configs, configs, cfg.permutation.n_perm, cfg.seed, &opts)
                .map_err(|e| tagged(e.into()))?;
        note_convergence(&pair_gpa, &m.tag, "ground-truth pair", warnings);
        let start = n * (k + 1);
        let hull_iou = match (&gt_hull, hull_of(&pc12[start..start + n])) {
            (Ok(a), Ok(b)) => match polygon_iou(a, &b) {
                Ok(v) => Some(v),
                Err(e) => {
                    warnings.push(format!("{}: hull IoU unavailable ({e})", m.tag));
                    None
                }
            },
            (_, Err(e)) => {
                warnings.push(format!("{}: PC1-PC2 hull unavailable ({e})", m.tag));
                None
            }
            (Err(_), _) => None,
        };
        methods.push(MethodMorphometrics {
            method: m.tag.clone(),
            cs_correlation,
            ppd_correlation,
            procrustes_distance: perm.observed_statistic,
            permutation_p: perm.p_value,
            n_perm: perm.n_perm(),
            hull_iou,
            gpa_iterations: own.iterations,
            gpa_converged: own.converged,
        });
    }

    if write {
        let mut csv = String::from("subject_id,method_tag");
        for c in 0..pcs.scores.ncols() {
            write!(csv, ",PC{}", c + 1).expect("write to string");
        }
        csv.push('\n');
        for (i, c) in joint.aligned.iter().enumerate() {
            write!(csv, "{},{}", c.subject_id, c.method_tag).expect("write to string");
            for v in pcs.scores.row(i).iter() {
                write!(csv, ",{v}").expect("write to string");
            }
            csv.push('\n');
        }
        write_file(&cfg.output_path().join("pca_scores.csv"), csv.as_bytes())?;
    }

    Ok(MorphometricReport {
        pca: PcaSummary {
            proportion_explained: pcs.proportion_explained(),
            variance_explained: pcs.variance_explained,
            total_variance: pcs.total_variance,
        },
        methods,
    })
}

fn note_convergence(g: &GpaResult, what: &str, kind: &str, warnings: &mut Vec<String>) {
    if !g.converged {
        warnings.push(format!(
            "{what}: {kind} GPA did not converge in {} iterations",
            g.iterations
        ));
    }
}

fn fdm_csv(fdm: &FormDifferenceResult) -> String {
    let mut out = String::from("pair,ratio,ci_low,ci_high,significant,direction\n");
    for k in 0..fdm.ratios.len() {
        let (r, lo, hi) = (fdm.ratios[k], fdm.ci_low[k], fdm.ci_high[k]);
        let significant = lo > 1.0 || hi < 1.0;
        writeln!(
            out,
            "{},{r},{lo},{hi},{significant},{}",
            pair_label(&fdm.pair_names[k]),
            direction_of(r, lo, hi)
        )
        .expect("write to string");
    }
    out
}

fn labels(t: &[crate::edma::SignificantPair]) -> Vec<String> {
    t.iter().map(|s| pair_label(&s.pair)).collect()
}

/// Form difference matrices between the two configured groups, for the
/// ground truth and every method, with their top-n sets and the overlap of
/// each method's sets with the ground truth's. With `write`, saves
/// `<output>/<method>/fdm.csv`.
pub fn edma_stage(cfg: &RunConfig, p: &Prepared, write: bool) -> Result<EdmaReport, CliError> {
    let (label_a, label_b) = cfg.group_labels().ok_or_else(|| {
        CliError::config("the EDMA comparison needs a grouping with exactly two labels")
            .in_stage(STAGE_EDMA)
    })?;
    let analyze = |m: &MethodData| -> Result<(MethodEdma, Vec<TopN>, usize), CliError> {
        let tagged = |e: CliError| e.in_stage(STAGE_EDMA).in_method(&m.tag);
        let mut a: Vec<FormMatrix> = Vec::new();
        let mut b: Vec<FormMatrix> = Vec::new();
        for s in &m.subjects {
            let c = Configuration::from_landmarks(&s.landmarks)
                .map_err(|e| tagged(CliError::from(e).in_subject(&s.id)))?;
            let f = form_matrix(&c).map_err(|e| tagged(CliError::from(e).in_subject(&s.id)))?;
            if cfg.grouping[&s.id] == label_a {
                a.push(f);
            } else {
                b.push(f);
            }
        }
        let fdm = bootstrap_fdm(&a, &b, cfg.edma.n_boot, cfg.edma.alpha, cfg.seed)
            .map_err(|e| tagged(e.into()))?;
        if write {
            write_file(&cfg.output_path().join(&m.tag).join("fdm.csv"), fdm_csv(&fdm).as_bytes())
                .map_err(tagged)?;
        }
        let significant = significant_distances(&fdm);
        let tops = cfg
            .edma
            .top_n
            .iter()
            .map(|&n| top_n(&significant, n).map_err(|e| tagged(e.into())))
            .collect::<Result<Vec<_>, _>>()?;
        let n_pairs = fdm.ratios.len();
        Ok((
            MethodEdma {
                method: m.tag.clone(),
                significant,
                top_n: Vec::new(),
            },
            tops,
            n_pairs,
        ))
    };

    let (mut gt_block, gt_tops, n_pairs) = analyze(&p.ground_truth)?;
    gt_block.top_n = gt_tops
        .iter()
        .map(|t| TopNSets {
            n: t.n,
            longer: labels(&t.longer),
            shorter: labels(&t.shorter),
            matching: None,
        })
        .collect();
    let mut methods = Vec::with_capacity(p.methods.len());
    for m in &p.methods {
        let (mut block, tops, _) = analyze(m)?;
        block.top_n = tops
            .iter()
            .zip(&gt_tops)
            .map(|(t, reference)| {
                Ok(TopNSets {
                    n: t.n,
                    longer: labels(&t.longer),
                    shorter: labels(&t.shorter),
                    matching: Some(
                        matching_distances(reference, t)
                            .map_err(|e| CliError::from(e).in_stage(STAGE_EDMA).in_method(&m.tag))?,
                    ),
                })
            })
            .collect::<Result<Vec<_>, CliError>>()?;
        methods.push(block);
    }
    Ok(EdmaReport {
        groups: (label_a, label_b),
        n_boot: cfg.edma.n_boot,
        alpha: cfg.edma.alpha,
        n_pairs,
        ground_truth: gt_block,
        methods,
    })
}

pub fn cmd_align_crop(cfg: &RunConfig) -> Result<AlignCropReport, CliError> {
    Ok(prepare(cfg, true)?.alignment)
}

pub fn cmd_geom_compare(cfg: &RunConfig) -> Result<GeometricReport, CliError> {
    let p = prepare(cfg, false)?;
    geometric_stage(cfg, &p, true)
}

/// Returns the morphometric block and any warnings about metrics that could
/// not be computed.
pub fn cmd_gpa_analyze(cfg: &RunConfig) -> Result<(MorphometricReport, Vec<String>), CliError> {
    let p = prepare(cfg, false)?;
    let mut warnings = Vec::new();
    let r = morphometric_stage(cfg, &p, true, &mut warnings)?;
    Ok((r, warnings))
}

pub fn cmd_edma_compare(cfg: &RunConfig) -> Result<EdmaReport, CliError> {
    let p = prepare(cfg, false)?;
    edma_stage(cfg, &p, true)
}

fn timestamp() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

/// Full run: align/crop, geometric, morphometric and EDMA stages (the last
/// only with a grouping). Writes every artifact plus `report.json` to the
/// output directory.
pub fn cmd_pipeline(cfg: &RunConfig) -> Result<EvaluationReport, CliError> {
    let p = prepare(cfg, true)?;
    let geometric = geometric_stage(cfg, &p, true)?;
    let mut warnings = Vec::new();
    let morphometric = morphometric_stage(cfg, &p, true, &mut warnings)?;
    let edma = if cfg.grouping.is_empty() {
        None
    } else {
        Some(edma_stage(cfg, &p, true)?)
    };
    let report = EvaluationReport {
        schema_version: SCHEMA_VERSION,
        provenance: Provenance {
            config_sha256: cfg.hash(),
            seed: cfg.seed,
            tool: env!("CARGO_PKG_NAME").to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp: timestamp(),
        },
        ground_truth: p.ground_truth.tag.clone(),
        subjects: cfg.subject_ids(),
        landmarks: p.landmark_names.clone(),
        alignment: p.alignment,
        geometric,
        morphometric,
        edma,
        warnings,
    };
    check_finite(&report)?;
    write_file(&cfg.output_path().join("report.json"), report.to_json().as_bytes())?;
    Ok(report)
}

/// JSON has no encoding for NaN or infinity (serde_json writes `null`), so
/// a report holding one does not survive a parse round trip.
fn check_finite(report: &EvaluationReport) -> Result<(), CliError> {
    match EvaluationReport::from_json(&report.to_json()) {
        Ok(back) if back == *report => Ok(()),
        _ => Err(CliError::new(ErrorKind::Numeric, "report contains a non-finite value")
            .in_stage(STAGE_OUTPUT)),
    }
}
