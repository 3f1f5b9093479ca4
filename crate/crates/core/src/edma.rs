//! Euclidean Distance Matrix Analysis.
//!
//! A form matrix is the vector of all inter-landmark distances of one
//! specimen. Two groups are compared through per-pair ratios of their mean
//! forms; a percentile bootstrap over subjects gives confidence intervals,
//! and ratios whose interval excludes 1 are reported as significantly longer
//! or shorter. Forms are compared in raw millimetres (no size scaling).

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::morpho::Configuration;
use crate::rng::Stream;
use crate::stats::quantile;

pub const DEFAULT_ALPHA: f64 = 0.10;
pub const DEFAULT_N_BOOT: usize = 1000;

#[derive(Debug, Error)]
pub enum EdmaError {
    #[error("landmarks {0:?} and {1:?} coincide")]
    CoincidentLandmarks(String, String),
    #[error("form matrices have different landmark pairs")]
    PairNameMismatch,
    #[error("a group is empty")]
    EmptyGroup,
    #[error("each group needs at least 2 subjects, found {0}")]
    GroupTooSmall(usize),
    #[error("mean distance for pair {0} is zero")]
    ZeroDenominator(String),
    #[error("alpha must lie strictly between 0 and 1, got {0}")]
    InvalidAlpha(f64),
    #[error("{0}")]
    InvalidArgument(String),
}

pub type PairName = (String, String);

pub fn pair_label(pair: &PairName) -> String {
    format!("{}-{}", pair.0, pair.1)
}

/// All inter-landmark distances of one specimen, pairs in lexicographic
/// index order (0,1), (0,2), ..., (1,2), ...
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FormMatrix {
    pub subject_id: String,
    pub method_tag: String,
    pub distances: Vec<f64>,
    pub pair_names: Vec<PairName>,
}

impl FormMatrix {
    pub fn len(&self) -> usize {
        self.distances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.distances.is_empty()
    }
}

pub fn form_matrix(c: &Configuration) -> Result<FormMatrix, EdmaError> {
    let l = c.len();
    let mut distances = Vec::with_capacity(l * (l - 1) / 2);
    let mut pair_names = Vec::with_capacity(l * (l - 1) / 2);
    for i in 0..l {
        for j in i + 1..l {
            let d = (c.coords[i] - c.coords[j]).norm();
            if d <= 0.0 {
                return Err(EdmaError::CoincidentLandmarks(
                    c.names[i].clone(),
                    c.names[j].clone(),
                ));
            }
            distances.push(d);
            pair_names.push((c.names[i].clone(), c.names[j].clone()));
        }
    }
    Ok(FormMatrix {
        subject_id: c.subject_id.clone(),
        method_tag: c.method_tag.clone(),
        distances,
        pair_names,
    })
}

fn check_pairs(forms: &[FormMatrix], reference: &[PairName]) -> Result<(), EdmaError> {
    if forms.iter().any(|f| f.pair_names != reference) {
        return Err(EdmaError::PairNameMismatch);
    }
    Ok(())
}

fn mean_of(forms: &[FormMatrix], members: impl Iterator<Item = usize>, out: &mut [f64]) {
    out.iter_mut().for_each(|v| *v = 0.0);
    let mut count = 0usize;
    for m in members {
        for (o, d) in out.iter_mut().zip(&forms[m].distances) {
            *o += d;
        }
        count += 1;
    }
    out.iter_mut().for_each(|v| *v /= count as f64);
}

/// Per-pair arithmetic mean of the group's distances.
pub fn mean_form(group: &[FormMatrix]) -> Result<FormMatrix, EdmaError> {
    let first = group.first().ok_or(EdmaError::EmptyGroup)?;
    check_pairs(group, &first.pair_names)?;
    let mut distances = vec![0.0; first.len()];
    mean_of(group, 0..group.len(), &mut distances);
    Ok(FormMatrix {
        subject_id: "mean".into(),
        method_tag: first.method_tag.clone(),
        distances,
        pair_names: first.pair_names.clone(),
    })
}

/// `mean_form(A)_k / mean_form(B)_k` for every pair `k`.
pub fn form_difference_matrix(
    group_a: &[FormMatrix],
    group_b: &[FormMatrix],
) -> Result<Vec<f64>, EdmaError> {
    let ma = mean_form(group_a)?;
    let mb = mean_form(group_b)?;
    if ma.pair_names != mb.pair_names {
        return Err(EdmaError::PairNameMismatch);
    }
    ma.distances
        .iter()
        .zip(&mb.distances)
        .zip(&mb.pair_names)
        .map(|((a, b), name)| {
            if *b > 0.0 {
                Ok(a / b)
            } else {
                Err(EdmaError::ZeroDenominator(pair_label(name)))
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FormDifferenceResult {
    pub pair_names: Vec<PairName>,
    pub ratios: Vec<f64>,
    pub ci_low: Vec<f64>,
    pub ci_high: Vec<f64>,
    pub alpha: f64,
    pub n_boot: usize,
    pub seed: u64,
}

/// Form-difference ratios with percentile bootstrap intervals.
///
/// Replicate `k` uses RNG stream `k`: it draws `N_A` subjects with
/// replacement from group A, then `N_B` from group B, and recomputes every
/// ratio. The interval is the `[alpha/2, 1 - alpha/2]` type-7 quantile range
/// of the replicate ratios, widened if needed so it contains the observed
/// ratio.
pub fn bootstrap_fdm(
    group_a: &[FormMatrix],
    group_b: &[FormMatrix],
    n_boot: usize,
    alpha: f64,
    seed: u64,
) -> Result<FormDifferenceResult, EdmaError> {
    for g in [group_a, group_b] {
        if g.len() < 2 {
            return Err(EdmaError::GroupTooSmall(g.len()));
        }
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(EdmaError::InvalidAlpha(alpha));
    }
    if n_boot == 0 {
        return Err(EdmaError::InvalidArgument("n_boot must be positive".into()));
    }
    let ratios = form_difference_matrix(group_a, group_b)?;
    let pair_names = group_a[0].pair_names.clone();
    check_pairs(group_b, &pair_names)?;
    let p = ratios.len();

    let replicates: Vec<Vec<f64>> = (0..n_boot)
        .into_par_iter()
        .map(|k| {
            let mut stream = Stream::new(seed, k as u64);
            let na = group_a.len() as u64;
            let nb = group_b.len() as u64;
            let pick_a: Vec<usize> = (0..na).map(|_| stream.below(na) as usize).collect();
            let pick_b: Vec<usize> = (0..nb).map(|_| stream.below(nb) as usize).collect();
            let mut ma = vec![0.0; p];
            let mut mb = vec![0.0; p];
            mean_of(group_a, pick_a.into_iter(), &mut ma);
            mean_of(group_b, pick_b.into_iter(), &mut mb);
            ma.iter().zip(&mb).map(|(a, b)| a / b).collect()
        })
        .collect();

    let mut ci_low = Vec::with_capacity(p);
    let mut ci_high = Vec::with_capacity(p);
    let mut column = vec![0.0; n_boot];
    for k in 0..p {
        for (slot, rep) in column.iter_mut().zip(&replicates) {
            *slot = rep[k];
        }
        column.sort_by(f64::total_cmp);
        ci_low.push(quantile(&column, alpha / 2.0).min(ratios[k]));
        ci_high.push(quantile(&column, 1.0 - alpha / 2.0).max(ratios[k]));
    }
    Ok(FormDifferenceResult {
        pair_names,
        ratios,
        ci_low,
        ci_high,
        alpha,
        n_boot,
        seed,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignificantPair {
    pub pair: PairName,
    pub ratio: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

/// Pairs whose interval excludes 1. `longer` is sorted by descending ratio,
/// `shorter` by ascending ratio; ties fall back to the pair names.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SignificantDistanceSet {
    pub longer: Vec<SignificantPair>,
    pub shorter: Vec<SignificantPair>,
}

pub fn significant_distances(fdm: &FormDifferenceResult) -> SignificantDistanceSet {
    let mut set = SignificantDistanceSet::default();
    for k in 0..fdm.ratios.len() {
        let entry = SignificantPair {
            pair: fdm.pair_names[k].clone(),
            ratio: fdm.ratios[k],
            ci_low: fdm.ci_low[k],
            ci_high: fdm.ci_high[k],
        };
        if fdm.ci_low[k] > 1.0 {
            set.longer.push(entry);
        } else if fdm.ci_high[k] < 1.0 {
            set.shorter.push(entry);
        }
    }
    let by_name = |a: &SignificantPair, b: &SignificantPair| a.pair.cmp(&b.pair);
    set.longer
        .sort_by(|a, b| b.ratio.total_cmp(&a.ratio).then_with(|| by_name(a, b)));
    set.shorter
        .sort_by(|a, b| a.ratio.total_cmp(&b.ratio).then_with(|| by_name(a, b)));
    set
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopN {
    pub n: usize,
    pub longer: Vec<SignificantPair>,
    pub shorter: Vec<SignificantPair>,
}

/// First `min(n, available)` entries of each ordered list.
pub fn top_n(set: &SignificantDistanceSet, n: usize) -> Result<TopN, EdmaError> {
    if n == 0 {
        return Err(EdmaError::InvalidArgument("n must be at least 1".into()));
    }
    Ok(TopN {
        n,
        longer: set.longer.iter().take(n).cloned().collect(),
        shorter: set.shorter.iter().take(n).cloned().collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchingDistances {
    pub n: usize,
    pub longer: f64,
    pub shorter: f64,
    pub average: f64,
}

/// Percentage of the reference's top-n pairs that the method also lists.
///
/// The denominator is the number of reference pairs in each list, which is
/// `n` whenever the reference has at least `n` significant pairs. An empty
/// reference list scores 100 when the method's list is empty too, else 0.
pub fn matching_distances(reference: &TopN, method: &TopN) -> Result<MatchingDistances, EdmaError> {
    if reference.n != method.n {
        return Err(EdmaError::InvalidArgument(format!(
            "top-n sizes differ ({} vs {})",
            reference.n, method.n
        )));
    }
    fn pct(r: &[SignificantPair], m: &[SignificantPair]) -> f64 {
        if r.is_empty() {
            return if m.is_empty() { 100.0 } else { 0.0 };
        }
        let hits = r.iter().filter(|x| m.iter().any(|y| y.pair == x.pair)).count();
        100.0 * hits as f64 / r.len() as f64
    }
    let longer = pct(&reference.longer, &method.longer);
    let shorter = pct(&reference.shorter, &method.shorter);
    Ok(MatchingDistances {
        n: reference.n,
        longer,
        shorter,
        average: (longer + shorter) / 2.0,
    })
}

/// Direction label used in exported tables.
pub fn direction_of(ratio: f64, ci_low: f64, ci_high: f64) -> &'static str {
    if ci_low > 1.0 {
        "longer"
    } else if ci_high < 1.0 {
        "shorter"
    } else {
        match ratio.partial_cmp(&1.0) {
            Some(Ordering::Greater) => "longer_ns",
            Some(Ordering::Less) => "shorter_ns",
            _ => "equal",
        }
    }
}
