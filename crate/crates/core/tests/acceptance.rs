//! End-to-end acceptance checks. Each test prints one `PASS`/`FAIL` line
//! (written straight to stderr so it shows without `--nocapture`) and fails
//! if its check or its time budget is missed.

use std::io::Write;
use std::time::{Duration, Instant};

use facegm::cli::{cmd_pipeline, write_synthetic_study, SynthMethod, SynthStudyOptions};
use facegm::edma::{
    bootstrap_fdm, form_matrix, matching_distances, significant_distances, top_n, FormMatrix,
    SignificantDistanceSet, SignificantPair,
};
use facegm::geomeval::{build_spatial_index, nearest_neighbor, similarity_align, surface_deviation};
use facegm::meshio::{read_ply, write_ply, LandmarkSet, PlyFormat, TriangleMesh};
use facegm::morpho::{centroid_size, gpa, permutation_test_pd, polygon_iou, Configuration, GpaOptions};
use facegm::rng::Stream;
use facegm::synthkit::{
    face_template, generate_population, group_mean, EffectSpec, GroupLabel, PopulationSpec,
};
use nalgebra::{Point3, Rotation3, Vector3};

fn check(name: &str, budget: Duration, f: impl FnOnce() -> Result<String, String>) {
    let start = Instant::now();
    let outcome = f();
    let elapsed = start.elapsed();
    let outcome = match outcome {
        Ok(detail) if elapsed > budget => Err(format!("{detail}; took {elapsed:.2?}, budget {budget:?}")),
        other => other,
    };
    let line = match &outcome {
        Ok(detail) => format!("PASS {name}: {detail} ({elapsed:.2?})"),
        Err(why) => format!("FAIL {name}: {why} ({elapsed:.2?})"),
    };
    let _ = writeln!(std::io::stderr(), "{line}");
    if let Err(why) = outcome {
        panic!("{name}: {why}");
    }
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn random_point(s: &mut Stream, half: f64) -> Point3<f64> {
    Point3::new(
        (s.uniform() * 2.0 - 1.0) * half,
        (s.uniform() * 2.0 - 1.0) * half,
        (s.uniform() * 2.0 - 1.0) * half,
    )
}

fn random_rotation(s: &mut Stream) -> Rotation3<f64> {
    let axis = Vector3::new(s.normal(), s.normal(), s.normal()).normalize();
    Rotation3::new(axis * (s.uniform() * 2.0 - 1.0) * std::f64::consts::PI)
}

#[test]
fn landmark_pair_count() {
    let c = face_template();
    let start = Instant::now();
    let f = form_matrix(&c).unwrap();
    let spent = start.elapsed();
    check("landmark_pair_count", Duration::from_millis(1), || {
        ensure(c.len() == 21 && f.len() == 210, || format!("{} landmarks gave {} pairs", c.len(), f.len()))?;
        ensure(spent < Duration::from_millis(1), || format!("form_matrix took {spent:?}"))?;
        Ok("21 landmarks, 210 distances".into())
    });
}

#[test]
fn kdtree_matches_brute_force() {
    check("kdtree_matches_brute_force", Duration::from_secs(1), || {
        let mut s = Stream::new(11, 0);
        let points: Vec<Point3<f64>> = (0..1000).map(|_| random_point(&mut s, 100.0)).collect();
        let queries: Vec<Point3<f64>> = (0..500).map(|_| random_point(&mut s, 120.0)).collect();
        let index = build_spatial_index(&points).map_err(|e| e.to_string())?;
        for (qi, q) in queries.iter().enumerate() {
            let mut best = (usize::MAX, f64::INFINITY);
            for (i, p) in points.iter().enumerate() {
                let d = (p - q).norm();
                if d < best.1 {
                    best = (i, d);
                }
            }
            let got = nearest_neighbor(&index, q);
            ensure(got == best, || format!("query {qi}: {got:?} vs brute force {best:?}"))?;
        }
        Ok("500 queries over 1000 points, index and distance identical".into())
    });
}

/// Distance from `p` to triangle `abc` by projecting onto the plane and
/// falling back to the three edges when the projection lies outside.
fn triangle_distance_oracle(p: &Point3<f64>, a: &Point3<f64>, b: &Point3<f64>, c: &Point3<f64>) -> f64 {
    let segment = |u: &Point3<f64>, v: &Point3<f64>| {
        let d = v - u;
        let len2 = d.norm_squared();
        let t = if len2 > 0.0 { ((p - u).dot(&d) / len2).clamp(0.0, 1.0) } else { 0.0 };
        (p - (u + d * t)).norm()
    };
    let edges = segment(a, b).min(segment(b, c)).min(segment(c, a));
    let n = (b - a).cross(&(c - a));
    let area2 = n.norm();
    if area2 == 0.0 {
        return edges;
    }
    let n = n / area2;
    let q = p - n * (p - a).dot(&n);
    let inside = [(a, b), (b, c), (c, a)]
        .iter()
        .all(|(u, v)| (*v - *u).cross(&(q - *u)).dot(&n) >= 0.0);
    if inside {
        (p - q).norm()
    } else {
        edges
    }
}

#[test]
fn surface_deviation_matches_exhaustive_search() {
    check("surface_deviation_matches_exhaustive_search", Duration::from_secs(5), || {
        let mut s = Stream::new(12, 0);
        // A bumpy sheet of 500 triangles plus random points around it.
        let mut vertices = Vec::new();
        let mut faces = Vec::new();
        let (nx, ny) = (26usize, 11usize);
        for j in 0..ny {
            for i in 0..nx {
                let (x, y) = (i as f64 * 4.0 - 50.0, j as f64 * 4.0 - 20.0);
                vertices.push(Point3::new(x + s.normal() * 0.5, y + s.normal() * 0.5, 3.0 * s.normal()));
            }
        }
        for j in 0..ny - 1 {
            for i in 0..nx - 1 {
                let v = (j * nx + i) as u32;
                let w = nx as u32;
                faces.push([v, v + 1, v + w + 1]);
                faces.push([v, v + w + 1, v + w]);
            }
        }
        let target = TriangleMesh::new(vertices, faces);
        ensure(target.face_count() == 500, || format!("{} triangles", target.face_count()))?;
        let source = TriangleMesh::new((0..200).map(|_| random_point(&mut s, 40.0)).collect(), vec![]);

        let field = surface_deviation(&source, &target).map_err(|e| e.to_string())?;
        let mut worst: f64 = 0.0;
        for (p, d) in source.vertices.iter().zip(&field.per_vertex) {
            let exact = (0..target.face_count())
                .map(|f| {
                    let [a, b, c] = target.triangle(f);
                    triangle_distance_oracle(p, &a, &b, &c)
                })
                .fold(f64::INFINITY, f64::min);
            worst = worst.max((d - exact).abs());
        }
        ensure(worst < 1e-9, || format!("max error {worst:e} mm"))?;
        Ok(format!("200 vertices vs 500 triangles, max error {worst:.1e} mm"))
    });
}

#[test]
fn alignment_recovers_similarity() {
    check("alignment_recovers_similarity", Duration::from_secs(1), || {
        let template = face_template();
        let target = LandmarkSet::new("t", "gt", template.names.clone(), template.to_points())
            .map_err(|e| e.to_string())?;
        let mut s = Stream::new(13, 0);
        let mut worst = (0.0f64, 0.0f64, 0.0f64);
        for _ in 0..20 {
            let r = random_rotation(&mut s);
            let scale = 0.5 + 1.5 * s.uniform();
            let t = Vector3::new(s.normal(), s.normal(), s.normal()) * 50.0;
            // source = (target - t) R^T / scale, so target = scale R source + t.
            let source_pts: Vec<Point3<f64>> = target
                .points()
                .iter()
                .map(|p| Point3::from(r.inverse() * (p.coords - t) / scale))
                .collect();
            let source = target.with_points(source_pts).map_err(|e| e.to_string())?;
            let fit = similarity_align(&source, &target, true).map_err(|e| e.to_string())?;
            let rot_err = (fit.rotation - r.matrix()).norm();
            let scale_err = (fit.scale - scale).abs() / scale;
            let rms = (source
                .points()
                .iter()
                .zip(target.points())
                .map(|(p, q)| (fit.apply(p) - q).norm_squared())
                .sum::<f64>()
                / source.len() as f64)
                .sqrt();
            worst = (worst.0.max(rot_err), worst.1.max(scale_err), worst.2.max(rms));
        }
        ensure(worst.0 < 1e-9, || format!("rotation error {:e}", worst.0))?;
        ensure(worst.1 < 1e-12, || format!("relative scale error {:e}", worst.1))?;
        ensure(worst.2 < 1e-9, || format!("RMS {:e} mm", worst.2))?;
        Ok(format!(
            "20 transforms, rotation {:.1e}, scale {:.1e}, RMS {:.1e} mm",
            worst.0, worst.1, worst.2
        ))
    });
}

#[test]
fn gpa_is_invariant_to_similarity_transforms() {
    let spec = PopulationSpec {
        template: face_template(),
        group_sizes: (41, 41),
        noise_sd: 2.0,
        effects: vec![],
        seed: 14,
    };
    let (a, b) = generate_population(&spec).unwrap();
    let specimens: Vec<Configuration> = a.into_iter().chain(b).collect();
    let mut s = Stream::new(14, 1);
    let moved: Vec<Configuration> = specimens
        .iter()
        .map(|c| {
            let r = random_rotation(&mut s);
            let k = 0.3 + 3.0 * s.uniform();
            let t = Vector3::new(s.normal(), s.normal(), s.normal()) * 100.0;
            c.with_coords(c.coords.iter().map(|p| r * p * k + t).collect())
        })
        .collect();
    check("gpa_is_invariant_to_similarity_transforms", Duration::from_secs(1), || {
        let opts = GpaOptions::default();
        let base = gpa(&specimens, &opts).map_err(|e| e.to_string())?;
        let other = gpa(&moved, &opts).map_err(|e| e.to_string())?;
        let count = (specimens.len() * 21 * 3) as f64;
        let rms = (base
            .aligned
            .iter()
            .zip(&other.aligned)
            .flat_map(|(x, y)| x.coords.iter().zip(&y.coords).map(|(p, q)| (p - q).norm_squared()))
            .sum::<f64>()
            / count)
            .sqrt();
        ensure(rms < 1e-8, || format!("aligned coordinates moved by {rms:e} RMS"))?;
        for g in [&base, &other] {
            let cs = centroid_size(&g.consensus).map_err(|e| e.to_string())?;
            ensure((cs - 1.0).abs() < 1e-12, || format!("consensus CS {cs}"))?;
        }
        Ok(format!("N = 82, L = 21, RMS change {rms:.1e}"))
    });
}

#[test]
fn self_comparison_is_an_identity() {
    check("self_comparison_is_an_identity", Duration::from_secs(30), || {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let opts = SynthStudyOptions {
            subjects: 10,
            methods: vec![SynthMethod::Copy],
            ..SynthStudyOptions::default()
        };
        let cfg = write_synthetic_study(dir.path(), &opts).map_err(|e| e.to_string())?;
        let report = cmd_pipeline(&cfg).map_err(|e| e.to_string())?;
        let g = &report.geometric.methods[0];
        ensure(g.pooled.mean == 0.0 && g.pooled.max == 0.0, || {
            format!("point-to-point mean {} max {}", g.pooled.mean, g.pooled.max)
        })?;
        let m = &report.morphometric.methods[0];
        ensure(m.procrustes_distance == 0.0, || format!("PD {}", m.procrustes_distance))?;
        ensure(m.permutation_p == 1.0, || format!("p {}", m.permutation_p))?;
        let r = |c: &Option<facegm::morpho::CorrelationResult>| c.map(|c| c.r);
        ensure(r(&m.cs_correlation) == Some(1.0), || format!("CS r {:?}", m.cs_correlation))?;
        ensure(r(&m.ppd_correlation) == Some(1.0), || format!("PPD r {:?}", m.ppd_correlation))?;
        let edma = report.edma.as_ref().ok_or("no EDMA section")?;
        for t in &edma.methods[0].top_n {
            let md = t.matching.ok_or("no matching distances")?;
            ensure(md.longer == 100.0 && md.shorter == 100.0, || format!("top-{} MD {:?}", t.n, md))?;
        }
        let ns: Vec<usize> = edma.methods[0].top_n.iter().map(|t| t.n).collect();
        ensure(ns == [5, 10], || format!("top-n sets {ns:?}"))?;
        Ok("10 subjects: distances 0, PD 0, p 1, r 1, MD 100% at top-5 and top-10".into())
    });
}

#[test]
fn permutation_test_is_calibrated() {
    check("permutation_test_is_calibrated", Duration::from_secs(300), || {
        let reps = 200;
        let mut rejections = 0;
        for rep in 0..reps {
            let spec = PopulationSpec {
                template: face_template(),
                group_sizes: (20, 20),
                noise_sd: 1.0,
                effects: vec![],
                seed: 1_000 + rep,
            };
            let (a, b) = generate_population(&spec).map_err(|e| e.to_string())?;
            let r = permutation_test_pd(&a, &b, 999, rep).map_err(|e| e.to_string())?;
            if r.p_value <= 0.05 {
                rejections += 1;
            }
        }
        let rate = rejections as f64 / reps as f64;
        ensure((0.02..=0.09).contains(&rate), || format!("rejection rate {rate}"))?;
        Ok(format!("rejection rate {rate} over {reps} null repetitions"))
    });
}

fn ranked_set(pairs: Vec<SignificantPair>) -> SignificantDistanceSet {
    let mut set = SignificantDistanceSet::default();
    for p in pairs {
        if p.ratio > 1.0 {
            set.longer.push(p);
        } else {
            set.shorter.push(p);
        }
    }
    set.longer.sort_by(|a, b| b.ratio.total_cmp(&a.ratio).then_with(|| a.pair.cmp(&b.pair)));
    set.shorter.sort_by(|a, b| a.ratio.total_cmp(&b.ratio).then_with(|| a.pair.cmp(&b.pair)));
    set
}

#[test]
fn edma_recovers_a_known_effect() {
    check("edma_recovers_a_known_effect", Duration::from_secs(120), || {
        let spec = PopulationSpec {
            template: face_template(),
            group_sizes: (40, 40),
            noise_sd: 1.0,
            effects: vec![EffectSpec {
                target_landmarks: vec!["prn".into()],
                displacement: Vector3::new(3.0, 0.0, 0.0),
                applies_to: GroupLabel::A,
            }],
            seed: 15,
        };
        let err = |e: &dyn std::fmt::Display| e.to_string();
        let truth_a = form_matrix(&group_mean(&spec, GroupLabel::A).map_err(|e| err(&e))?).map_err(|e| err(&e))?;
        let truth_b = form_matrix(&group_mean(&spec, GroupLabel::B).map_err(|e| err(&e))?).map_err(|e| err(&e))?;
        let true_ratio: Vec<f64> = truth_a.distances.iter().zip(&truth_b.distances).map(|(a, b)| a / b).collect();

        let (a, b) = generate_population(&spec).map_err(|e| err(&e))?;
        let forms = |g: &[Configuration]| -> Result<Vec<FormMatrix>, String> {
            g.iter().map(|c| form_matrix(c).map_err(|e| err(&e))).collect()
        };
        let fdm = bootstrap_fdm(&forms(&a)?, &forms(&b)?, 1000, 0.10, 15).map_err(|e| err(&e))?;
        let found = significant_distances(&fdm);
        let listed = |pair: &(String, String)| {
            found.longer.iter().chain(&found.shorter).any(|p| &p.pair == pair)
        };

        let mut required = 0;
        for (pair, r) in truth_a.pair_names.iter().zip(&true_ratio) {
            let involves = pair.0 == "prn" || pair.1 == "prn";
            if involves && (r - 1.0).abs() > 0.05 {
                required += 1;
                ensure(listed(pair), || format!("{}-{} (true ratio {r:.3}) not significant", pair.0, pair.1))?;
            }
        }
        ensure(required > 0, || "no pair deviates by more than 5%".into())?;

        // Reference: every pair whose true ratio differs from 1 by more than
        // 1%, ranked like the bootstrap result.
        let reference = ranked_set(
            truth_a
                .pair_names
                .iter()
                .zip(&true_ratio)
                .filter(|(_, r)| (**r - 1.0).abs() > 0.01)
                .map(|(pair, &r)| SignificantPair {
                    pair: pair.clone(),
                    ratio: r,
                    ci_low: r,
                    ci_high: r,
                })
                .collect(),
        );
        let md = matching_distances(
            &top_n(&reference, 10).map_err(|e| err(&e))?,
            &top_n(&found, 10).map_err(|e| err(&e))?,
        )
        .map_err(|e| err(&e))?;
        ensure(md.average >= 80.0, || format!("MD% at top-10 {:.1} ({:?})", md.average, md))?;
        Ok(format!(
            "{required} required pairs significant, MD% at top-10 {:.1} (longer {:.1}, shorter {:.1})",
            md.average, md.longer, md.shorter
        ))
    });
}

#[test]
fn iou_closed_forms() {
    let square = |x: f64, y: f64| vec![[x, y], [x + 1.0, y], [x + 1.0, y + 1.0], [x, y + 1.0]];
    let start = Instant::now();
    let half = polygon_iou(&square(0.0, 0.0), &square(0.5, 0.0));
    let same = polygon_iou(&square(0.0, 0.0), &square(0.0, 0.0));
    let apart = polygon_iou(&square(0.0, 0.0), &square(3.0, 0.0));
    let spent = start.elapsed();
    check("iou_closed_forms", Duration::from_millis(1), || {
        let (half, same, apart) = (
            half.map_err(|e| e.to_string())?,
            same.map_err(|e| e.to_string())?,
            apart.map_err(|e| e.to_string())?,
        );
        ensure((half - 1.0 / 3.0).abs() < 1e-12, || format!("half overlap {half}"))?;
        ensure(same == 1.0, || format!("identical {same}"))?;
        ensure(apart == 0.0, || format!("disjoint {apart}"))?;
        ensure(spent < Duration::from_millis(1), || format!("took {spent:?}"))?;
        Ok("1/3, 1 and 0".into())
    });
}

#[test]
fn pipeline_is_deterministic() {
    check("pipeline_is_deterministic", Duration::from_secs(60), || {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let opts = SynthStudyOptions {
            subjects: 8,
            ..SynthStudyOptions::default()
        };
        let cfg = write_synthetic_study(dir.path(), &opts).map_err(|e| e.to_string())?;
        let strip = |text: String| -> String {
            text.lines().filter(|l| !l.contains("\"timestamp\"")).collect::<Vec<_>>().join("\n")
        };
        let mut reports = Vec::new();
        for _ in 0..2 {
            cmd_pipeline(&cfg).map_err(|e| e.to_string())?;
            let text = std::fs::read_to_string(cfg.output_path().join("report.json")).map_err(|e| e.to_string())?;
            reports.push(strip(text));
        }
        ensure(reports[0] == reports[1], || "reports differ".into())?;
        Ok(format!("two runs, {} identical bytes", reports[0].len()))
    });
}

#[test]
fn ply_binary_roundtrip_is_exact() {
    let mut s = Stream::new(16, 0);
    let n = 10_000usize;
    let mut mesh = TriangleMesh::new(
        (0..n).map(|_| random_point(&mut s, 100.0)).collect(),
        (0..2 * n)
            .map(|_| [s.below(n as u64) as u32, s.below(n as u64) as u32, s.below(n as u64) as u32])
            .collect(),
    );
    mesh.vertex_colors = Some((0..n).map(|_| [s.below(256) as u8, s.below(256) as u8, s.below(256) as u8]).collect());
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("mesh.ply");
    check("ply_binary_roundtrip_is_exact", Duration::from_secs(1), || {
        write_ply(&mesh, &path, PlyFormat::BinaryLittleEndian).map_err(|e| e.to_string())?;
        let back = read_ply(&path).map_err(|e| e.to_string())?;
        let bits = |m: &TriangleMesh| -> Vec<u64> {
            m.vertices.iter().flat_map(|p| [p.x.to_bits(), p.y.to_bits(), p.z.to_bits()]).collect()
        };
        ensure(bits(&back) == bits(&mesh), || "coordinates differ".into())?;
        ensure(back.faces == mesh.faces, || "faces differ".into())?;
        ensure(back.vertex_colors == mesh.vertex_colors, || "colors differ".into())?;
        ensure(back == mesh, || "meshes differ".into())?;
        Ok("10000 colored vertices, 20000 faces, bit-exact".into())
    });
}
