use facegm::morpho::{
    centroid_size, convex_hull_2d, gpa, pca, pearson_correlation, permutation_test_pd, polygon_iou,
    procrustes_distance, Configuration, GpaOptions, Point2,
};
use facegm::rng::Stream;
use facegm::synthkit::{face_template, generate_population, EffectSpec, GroupLabel, PopulationSpec};
use nalgebra::{Rotation3, Vector3};
use proptest::prelude::*;

fn sample(n: usize, noise_sd: f64, seed: u64) -> Vec<Configuration> {
    let spec = PopulationSpec {
        template: face_template(),
        group_sizes: (n - n / 2, n / 2),
        noise_sd,
        effects: vec![],
        seed,
    };
    let (a, b) = generate_population(&spec).unwrap();
    a.into_iter().chain(b).collect()
}

fn rotation() -> impl Strategy<Value = Rotation3<f64>> {
    (-3.1..3.1f64, -1.5..1.5f64, -3.1..3.1f64).prop_map(|(r, p, y)| Rotation3::from_euler_angles(r, p, y))
}

fn similarity() -> impl Strategy<Value = (Rotation3<f64>, f64, Vector3<f64>)> {
    (rotation(), 0.2..5.0f64, (-100.0..100.0f64, -100.0..100.0f64, -100.0..100.0f64))
        .prop_map(|(r, s, (x, y, z))| (r, s, Vector3::new(x, y, z)))
}

fn moved(c: &Configuration, (r, s, t): &(Rotation3<f64>, f64, Vector3<f64>)) -> Configuration {
    c.with_coords(c.coords.iter().map(|p| r * p * *s + t).collect())
}

fn max_coord_diff(a: &Configuration, b: &Configuration) -> f64 {
    a.coords
        .iter()
        .zip(&b.coords)
        .map(|(p, q)| (p - q).amax())
        .fold(0.0, f64::max)
}

fn small_config() -> impl Strategy<Value = Configuration> {
    prop::collection::vec((-50.0..50.0f64, -50.0..50.0f64, -50.0..50.0f64), 5)
        .prop_map(|v| Configuration::from_coords(v.into_iter().map(|(x, y, z)| Vector3::new(x, y, z)).collect()).unwrap())
        .prop_filter("non-degenerate", |c| centroid_size(c).map(|s| s > 1.0).unwrap_or(false))
}

fn polygon_points() -> impl Strategy<Value = Vec<Point2>> {
    prop::collection::vec((-10.0..10.0f64, -10.0..10.0f64).prop_map(|(x, y)| [x, y]), 3..25)
        .prop_filter("has area", |p| convex_hull_2d(p).is_ok())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn gpa_ignores_similarity_transforms(
        seed in any::<u64>(),
        moves in prop::collection::vec(similarity(), 12),
    ) {
        let specimens = sample(12, 2.0, seed);
        let opts = GpaOptions::default();
        let base = gpa(&specimens, &opts).unwrap();
        let transformed: Vec<Configuration> =
            specimens.iter().zip(&moves).map(|(c, m)| moved(c, m)).collect();
        let other = gpa(&transformed, &opts).unwrap();
        for (a, b) in base.aligned.iter().zip(&other.aligned) {
            prop_assert!(max_coord_diff(a, b) < 1e-9, "{}", max_coord_diff(a, b));
        }
        for ((cs, cs2), m) in base.centroid_sizes.iter().zip(&other.centroid_sizes).zip(&moves) {
            prop_assert!((cs * m.1 - cs2).abs() <= 1e-12 * cs2.abs(), "{} vs {}", cs * m.1, cs2);
        }
    }

    #[test]
    fn gpa_is_idempotent(seed in any::<u64>()) {
        let opts = GpaOptions::default();
        let once = gpa(&sample(10, 2.0, seed), &opts).unwrap();
        let twice = gpa(&once.aligned, &opts).unwrap();
        for (a, b) in once.aligned.iter().zip(&twice.aligned) {
            prop_assert!(max_coord_diff(a, b) < 1e-9);
        }
        prop_assert!(max_coord_diff(&once.consensus, &twice.consensus) < 1e-9);
    }

    #[test]
    fn gpa_ignores_specimen_order(seed in any::<u64>(), shuffle_seed in any::<u64>()) {
        let specimens = sample(10, 2.0, seed);
        let mut order: Vec<usize> = (0..specimens.len()).collect();
        Stream::new(shuffle_seed, 0).shuffle(&mut order);
        let reordered: Vec<Configuration> = order.iter().map(|&i| specimens[i].clone()).collect();
        let opts = GpaOptions::default();
        let a = gpa(&specimens, &opts).unwrap();
        let b = gpa(&reordered, &opts).unwrap();
        prop_assert!(max_coord_diff(&a.consensus, &b.consensus) < 1e-9);
        for (k, &i) in order.iter().enumerate() {
            prop_assert!(max_coord_diff(&a.aligned[i], &b.aligned[k]) < 1e-9);
            prop_assert_eq!(a.centroid_sizes[i], b.centroid_sizes[k]);
        }
    }

    #[test]
    fn procrustes_distance_is_a_pseudometric(
        a in small_config(),
        b in small_config(),
        c in small_config(),
        m in similarity(),
    ) {
        let ab = procrustes_distance(&a, &b).unwrap();
        let ba = procrustes_distance(&b, &a).unwrap();
        let bc = procrustes_distance(&b, &c).unwrap();
        let ac = procrustes_distance(&a, &c).unwrap();
        prop_assert_eq!(procrustes_distance(&a, &a).unwrap(), 0.0);
        prop_assert!(procrustes_distance(&a, &moved(&a, &m)).unwrap() < 1e-7);
        prop_assert!((procrustes_distance(&moved(&a, &m), &b).unwrap() - ab).abs() < 1e-9);
        prop_assert!((procrustes_distance(&a, &moved(&b, &m)).unwrap() - ab).abs() < 1e-9);
        prop_assert!(ab >= 0.0);
        prop_assert!((ab - ba).abs() < 1e-12);
        prop_assert!(ac <= ab + bc + 1e-9, "{} > {} + {}", ac, ab, bc);
    }

    #[test]
    fn iou_is_symmetric_bounded_and_rigid_invariant(
        a in polygon_points(),
        b in polygon_points(),
        angle in -3.1..3.1f64,
        shift in (-5.0..5.0f64, -5.0..5.0f64),
    ) {
        let ha = convex_hull_2d(&a).unwrap();
        let hb = convex_hull_2d(&b).unwrap();
        let ab = polygon_iou(&ha, &hb).unwrap();
        let ba = polygon_iou(&hb, &ha).unwrap();
        prop_assert!((0.0..=1.0).contains(&ab));
        prop_assert!((ab - ba).abs() < 1e-12);
        prop_assert!((polygon_iou(&ha, &ha).unwrap() - 1.0).abs() < 1e-12);

        let (s, c) = angle.sin_cos();
        let mv = |p: &Point2| [c * p[0] - s * p[1] + shift.0, s * p[0] + c * p[1] + shift.1];
        let ra: Vec<Point2> = ha.iter().map(mv).collect();
        let rb: Vec<Point2> = hb.iter().map(mv).collect();
        let moved_iou = polygon_iou(&convex_hull_2d(&ra).unwrap(), &convex_hull_2d(&rb).unwrap()).unwrap();
        prop_assert!((moved_iou - ab).abs() < 1e-9, "{} vs {}", moved_iou, ab);
    }

    #[test]
    fn centroid_size_matches_definition(c in (3usize..30).prop_flat_map(|l| {
        prop::collection::vec((-50.0..50.0f64, -50.0..50.0f64, -50.0..50.0f64), l)
    })) {
        let l = c.len() as f64;
        let mean = c.iter().fold((0.0, 0.0, 0.0), |m, p| (m.0 + p.0 / l, m.1 + p.1 / l, m.2 + p.2 / l));
        let ss: f64 = c
            .iter()
            .map(|p| (p.0 - mean.0).powi(2) + (p.1 - mean.1).powi(2) + (p.2 - mean.2).powi(2))
            .sum();
        let config = Configuration::from_coords(c.iter().map(|p| Vector3::new(p.0, p.1, p.2)).collect()).unwrap();
        match centroid_size(&config) {
            Ok(cs) => prop_assert!((cs - ss.sqrt()).abs() <= 1e-12 * ss.sqrt().max(1.0)),
            Err(_) => prop_assert!(ss.sqrt() < 1e-9),
        }
    }

    #[test]
    fn hull_contains_every_point(pts in prop::collection::vec((-10.0..10.0f64, -10.0..10.0f64), 100)) {
        let pts: Vec<Point2> = pts.into_iter().map(|(x, y)| [x, y]).collect();
        let hull = convex_hull_2d(&pts).unwrap();
        for p in &pts {
            for k in 0..hull.len() {
                let (a, b) = (hull[k], hull[(k + 1) % hull.len()]);
                let cross = (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]);
                prop_assert!(cross >= -1e-9, "{:?} outside edge {:?}-{:?}", p, a, b);
            }
        }
    }

    #[test]
    fn correlation_matches_definition(
        pairs in prop::collection::vec((-100.0..100.0f64, -100.0..100.0f64), 50),
    ) {
        let (x, y): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let n = 50.0;
        let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
        let cov: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
        let vx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
        let vy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
        let r = pearson_correlation(&x, &y).unwrap();
        prop_assert!((r.r - cov / (vx * vy).sqrt()).abs() < 1e-12);
        prop_assert_eq!(r.n, 50);
    }

    #[test]
    fn correlation_properties(
        x in prop::collection::vec(-100.0..100.0f64, 3..40),
        slope in 0.1..10.0f64,
        offset in -50.0..50.0f64,
        noise in prop::collection::vec(-1.0..1.0f64, 40),
    ) {
        prop_assume!(x.iter().any(|v| (v - x[0]).abs() > 1e-3));
        let y: Vec<f64> = x.iter().zip(&noise).map(|(v, e)| v + 5.0 * e).collect();
        let r = pearson_correlation(&x, &y).unwrap();
        prop_assert!((-1.0..=1.0).contains(&r.r));
        prop_assert!((0.0..=1.0).contains(&r.p_value));
        let swapped = pearson_correlation(&y, &x).unwrap();
        prop_assert!((r.r - swapped.r).abs() < 1e-12);
        // Invariant under positive affine maps, negated under negative ones.
        let affine: Vec<f64> = y.iter().map(|v| slope * v + offset).collect();
        prop_assert!((pearson_correlation(&x, &affine).unwrap().r - r.r).abs() < 1e-9);
        let flipped: Vec<f64> = y.iter().map(|v| -v).collect();
        prop_assert!((pearson_correlation(&x, &flipped).unwrap().r + r.r).abs() < 1e-12);
    }
}

/// Under the null hypothesis the permutation p-value is uniform: the largest
/// gap between its empirical CDF and the identity must stay below 0.1.
#[test]
fn permutation_p_values_are_uniform_under_null() {
    let runs = 200;
    let mut p: Vec<f64> = (0..runs)
        .map(|run| {
            let specimens = sample(16, 1.5, 10_000 + run);
            permutation_test_pd(&specimens[..8], &specimens[8..], 199, run).unwrap().p_value
        })
        .collect();
    p.sort_by(f64::total_cmp);
    let mut worst: f64 = 0.0;
    for (i, v) in p.iter().enumerate() {
        let below = i as f64 / runs as f64;
        let at = (i + 1) as f64 / runs as f64;
        worst = worst.max((at - v).abs()).max((v - below).abs());
    }
    assert!(worst < 0.1, "ECDF deviation {worst}");
}

#[test]
fn default_permutation_count_bounds_the_p_value() {
    let specimens = sample(8, 1.0, 31);
    let r = permutation_test_pd(&specimens[..4], &specimens[4..], 10_000, 31).unwrap();
    assert_eq!(r.n_perm(), 10_000);
    assert!(r.p_value >= 1.0 / 10_001.0 && r.p_value <= 1.0);
    let far: Vec<Configuration> = specimens[4..]
        .iter()
        .map(|c| c.with_coords(c.coords.iter().enumerate().map(|(i, p)| p + Vector3::new(0.0, 0.0, 30.0 * (i % 3) as f64)).collect()))
        .collect();
    let r = permutation_test_pd(&specimens[..4], &far, 10_000, 32).unwrap();
    // Only relabelings that keep the two groups intact (2 of 70) can match.
    assert!(r.p_value <= 0.03, "{}", r.p_value);
}

#[test]
fn first_component_separates_two_clusters() {
    let spec = PopulationSpec {
        template: face_template(),
        group_sizes: (15, 15),
        noise_sd: 0.5,
        effects: vec![EffectSpec {
            target_landmarks: vec!["prn".into(), "sn".into(), "al_r".into(), "al_l".into()],
            displacement: Vector3::new(0.0, 0.0, 8.0),
            applies_to: GroupLabel::A,
        }],
        seed: 33,
    };
    let (a, b) = generate_population(&spec).unwrap();
    let specimens: Vec<Configuration> = a.into_iter().chain(b).collect();
    let aligned = gpa(&specimens, &GpaOptions::default()).unwrap().aligned;
    let pcs = pca(&aligned).unwrap();
    let share = pcs.proportion_explained();
    assert!(share[0] > 0.5, "PC1 explains {}", share[0]);
    assert!(share[1..].iter().all(|s| *s < share[0]));
    let pc1: Vec<f64> = pcs.pc12().iter().map(|p| p[0]).collect();
    let (ga, gb) = pc1.split_at(15);
    let separated = ga.iter().all(|x| gb.iter().all(|y| x > y)) || ga.iter().all(|x| gb.iter().all(|y| x < y));
    assert!(separated, "{pc1:?}");
}
