use facegm::edma::{
    bootstrap_fdm, form_difference_matrix, form_matrix, matching_distances, mean_form,
    significant_distances, top_n, FormMatrix,
};
use facegm::morpho::Configuration;
use facegm::rng::Stream;
use facegm::synthkit::{face_template, generate_population, EffectSpec, GroupLabel, PopulationSpec};
use nalgebra::{Rotation3, Vector3};
use proptest::prelude::*;

fn config(l: usize) -> impl Strategy<Value = Configuration> {
    prop::collection::vec((-50.0..50.0f64, -50.0..50.0f64, -50.0..50.0f64), l).prop_map(|v| {
        Configuration::from_coords(v.into_iter().map(|(x, y, z)| Vector3::new(x, y, z)).collect()).unwrap()
    })
}

fn groups(seed: u64, n: usize, effect: f64) -> (Vec<FormMatrix>, Vec<FormMatrix>) {
    groups_with(seed, n, Vector3::new(effect, 0.0, 0.0))
}

fn groups_with(seed: u64, n: usize, effect: Vector3<f64>) -> (Vec<FormMatrix>, Vec<FormMatrix>) {
    let spec = PopulationSpec {
        template: face_template(),
        group_sizes: (n, n),
        noise_sd: 1.0,
        effects: vec![EffectSpec {
            target_landmarks: vec!["prn".into()],
            displacement: effect,
            applies_to: GroupLabel::A,
        }],
        seed,
    };
    let (a, b) = generate_population(&spec).unwrap();
    let forms = |g: Vec<Configuration>| g.iter().map(|c| form_matrix(c).unwrap()).collect();
    (forms(a), forms(b))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn form_matrix_has_every_pair_once(c in (3usize..25).prop_flat_map(config)) {
        let f = form_matrix(&c).unwrap();
        let l = c.len();
        prop_assert_eq!(f.len(), l * (l - 1) / 2);
        let mut names = f.pair_names.clone();
        names.sort();
        names.dedup();
        prop_assert_eq!(names.len(), f.len());
    }

    #[test]
    fn form_matrix_is_rigid_invariant_and_scales_linearly(
        c in config(12),
        angles in (-3.1..3.1f64, -1.5..1.5f64, -3.1..3.1f64),
        t in (-100.0..100.0f64, -100.0..100.0f64, -100.0..100.0f64),
        s in 0.1..10.0f64,
    ) {
        let r = Rotation3::from_euler_angles(angles.0, angles.1, angles.2);
        let t = Vector3::new(t.0, t.1, t.2);
        let f = form_matrix(&c).unwrap();
        let moved = form_matrix(&c.with_coords(c.coords.iter().map(|p| r * p + t).collect())).unwrap();
        let scaled = form_matrix(&c.with_coords(c.coords.iter().map(|p| p * s).collect())).unwrap();
        for ((d, m), k) in f.distances.iter().zip(&moved.distances).zip(&scaled.distances) {
            prop_assert!((d - m).abs() <= 1e-12 * d.max(1.0), "{} vs {}", d, m);
            prop_assert!((d * s - k).abs() <= 1e-12 * k.max(1.0), "{} vs {}", d * s, k);
        }
    }

    #[test]
    fn mean_form_and_ratios_match_definition(seed in any::<u64>(), effect in 0.0..5.0f64) {
        let (a, b) = groups(seed, 4, effect);
        let column_mean = |g: &[FormMatrix], k: usize| g.iter().map(|f| f.distances[k]).sum::<f64>() / g.len() as f64;
        let ma = mean_form(&a).unwrap();
        let ratios = form_difference_matrix(&a, &b).unwrap();
        for k in 0..ma.len() {
            prop_assert!((ma.distances[k] - column_mean(&a, k)).abs() <= 1e-12 * ma.distances[k]);
            let direct = column_mean(&a, k) / column_mean(&b, k);
            prop_assert!((ratios[k] - direct).abs() <= 1e-12 * direct);
        }
    }

    #[test]
    fn group_compared_with_itself_has_no_significant_pairs(seed in any::<u64>(), boot_seed in any::<u64>()) {
        let (a, _) = groups(seed, 6, 0.0);
        let fdm = bootstrap_fdm(&a, &a, 100, 0.10, boot_seed).unwrap();
        prop_assert!(fdm.ratios.iter().all(|r| *r == 1.0));
        let set = significant_distances(&fdm);
        prop_assert!(set.longer.is_empty() && set.shorter.is_empty());
    }

    #[test]
    fn intervals_contain_the_observed_ratio(seed in any::<u64>(), effect in 0.0..5.0f64) {
        let (a, b) = groups(seed, 5, effect);
        let fdm = bootstrap_fdm(&a, &b, 50, 0.10, seed).unwrap();
        for k in 0..fdm.ratios.len() {
            prop_assert!(fdm.ci_low[k] <= fdm.ratios[k] && fdm.ratios[k] <= fdm.ci_high[k]);
        }
    }

    #[test]
    fn matching_is_symmetric_for_equal_sized_lists(seed_a in any::<u64>(), seed_b in any::<u64>(), n in 1usize..15) {
        let (a1, b1) = groups(seed_a, 5, 4.0);
        let (a2, b2) = groups(seed_b, 5, 4.0);
        let s1 = significant_distances(&bootstrap_fdm(&a1, &b1, 60, 0.10, 1).unwrap());
        let s2 = significant_distances(&bootstrap_fdm(&a2, &b2, 60, 0.10, 2).unwrap());
        let (t1, t2) = (top_n(&s1, n).unwrap(), top_n(&s2, n).unwrap());
        let forward = matching_distances(&t1, &t2).unwrap();
        let backward = matching_distances(&t2, &t1).unwrap();
        if t1.longer.len() == t2.longer.len() {
            prop_assert_eq!(forward.longer, backward.longer);
        }
        if t1.shorter.len() == t2.shorter.len() {
            prop_assert_eq!(forward.shorter, backward.shorter);
        }
        prop_assert_eq!(matching_distances(&t1, &t1).unwrap().average, 100.0);
    }
}

#[test]
fn bootstrap_is_identical_across_thread_counts() {
    let (a, b) = groups(7, 12, 3.0);
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| bootstrap_fdm(&a, &b, 500, 0.10, 99).unwrap())
    };
    let one = run(1);
    for threads in [2, 3, 8] {
        assert_eq!(run(threads), one, "{threads} threads");
    }
}

fn quantile7(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Replays the documented resampling scheme and checks that the interval
/// bounds are the 5th and 95th percentiles (widened to the observed ratio).
#[test]
fn intervals_are_percentiles_of_the_documented_resampling() {
    let (a, b) = groups(8, 7, 2.0);
    let (n_boot, seed) = (400, 5);
    let fdm = bootstrap_fdm(&a, &b, n_boot, 0.10, seed).unwrap();
    let p = fdm.ratios.len();
    let mut columns = vec![Vec::with_capacity(n_boot); p];
    for k in 0..n_boot {
        let mut s = Stream::new(seed, k as u64);
        let ia: Vec<usize> = (0..a.len()).map(|_| s.below(a.len() as u64) as usize).collect();
        let ib: Vec<usize> = (0..b.len()).map(|_| s.below(b.len() as u64) as usize).collect();
        for (j, col) in columns.iter_mut().enumerate() {
            let ma = ia.iter().map(|&i| a[i].distances[j]).sum::<f64>() / ia.len() as f64;
            let mb = ib.iter().map(|&i| b[i].distances[j]).sum::<f64>() / ib.len() as f64;
            col.push(ma / mb);
        }
    }
    for (j, col) in columns.iter_mut().enumerate() {
        col.sort_by(f64::total_cmp);
        let lo = quantile7(col, 0.05).min(fdm.ratios[j]);
        let hi = quantile7(col, 0.95).max(fdm.ratios[j]);
        assert!((fdm.ci_low[j] - lo).abs() < 1e-12, "pair {j}: {} vs {lo}", fdm.ci_low[j]);
        assert!((fdm.ci_high[j] - hi).abs() < 1e-12, "pair {j}: {} vs {hi}", fdm.ci_high[j]);
    }
}

#[test]
fn large_ratio_with_small_noise_is_significant() {
    let mut s = Stream::new(41, 0);
    let names = vec![("a".to_string(), "b".to_string()), ("a".to_string(), "c".to_string())];
    let mut form = |base: [f64; 2]| FormMatrix {
        subject_id: String::new(),
        method_tag: String::new(),
        distances: base.iter().map(|d| d * (1.0 + 0.01 * s.normal())).collect(),
        pair_names: names.clone(),
    };
    let a: Vec<FormMatrix> = (0..40).map(|_| form([15.0, 20.0])).collect();
    let b: Vec<FormMatrix> = (0..40).map(|_| form([10.0, 20.0])).collect();
    let fdm = bootstrap_fdm(&a, &b, 1000, 0.10, 41).unwrap();
    assert!(fdm.ci_low[0] > 1.0, "{:?}", (fdm.ci_low[0], fdm.ci_high[0]));
    assert!((fdm.ratios[0] - 1.5).abs() < 0.01);
}

#[test]
fn nose_effect_fills_the_longer_top_ten() {
    let (a, b) = groups_with(43, 30, Vector3::new(0.0, 0.0, 5.0));
    let set = significant_distances(&bootstrap_fdm(&a, &b, 1000, 0.10, 43).unwrap());
    let top = top_n(&set, 10).unwrap();
    assert_eq!(top.longer.len(), 10);
    for p in &top.longer {
        assert!(p.pair.0 == "prn" || p.pair.1 == "prn", "{:?}", p.pair);
    }
}
