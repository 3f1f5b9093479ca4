use nalgebra::Vector3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::procrustes::preshape_distance;
use super::{gpa, Configuration, GpaOptions, GpaResult, MorphoError};
use crate::rng::Stream;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PermutationResult {
    /// Procrustes distance between the two group mean shapes.
    pub observed_statistic: f64,
    pub permuted: Vec<f64>,
    /// `(1 + #{permuted >= observed}) / (n_perm + 1)`.
    pub p_value: f64,
    pub seed: u64,
}

impl PermutationResult {
    pub fn n_perm(&self) -> usize {
        self.permuted.len()
    }
}

fn preshape_of(coords: &[Vector3<f64>]) -> Vec<Vector3<f64>> {
    let n = coords.len() as f64;
    let c = coords.iter().sum::<Vector3<f64>>() / n;
    let centered: Vec<Vector3<f64>> = coords.iter().map(|p| p - c).collect();
    let norm = centered.iter().map(|p| p.norm_squared()).sum::<f64>().sqrt();
    if norm > 0.0 {
        centered.iter().map(|p| p / norm).collect()
    } else {
        centered
    }
}

fn mean_shape<'a>(members: impl Iterator<Item = &'a Configuration>, l: usize) -> Vec<Vector3<f64>> {
    let mut acc = vec![Vector3::zeros(); l];
    let mut count = 0usize;
    for m in members {
        for (a, p) in acc.iter_mut().zip(&m.coords) {
            *a += p;
        }
        count += 1;
    }
    acc.iter_mut().for_each(|a| *a /= count as f64);
    acc
}

/// Procrustes distance between the mean shapes of two label groups drawn
/// from one jointly superimposed set. `in_a[i]` marks membership of
/// specimen `i` in the first group.
fn group_mean_distance(aligned: &[Configuration], in_a: &[bool]) -> f64 {
    let l = aligned[0].len();
    let a = mean_shape(aligned.iter().zip(in_a).filter(|(_, &m)| m).map(|(c, _)| c), l);
    let b = mean_shape(aligned.iter().zip(in_a).filter(|(_, &m)| !m).map(|(c, _)| c), l);
    preshape_distance(&preshape_of(&a), &preshape_of(&b))
}

/// Permutation test on the Procrustes distance between two group means.
///
/// Both groups are superimposed together once; each permutation reshuffles
/// the group labels (sizes preserved) over the same superimposed
/// coordinates. Permutation `k` draws from RNG stream `k` of `seed`.
pub fn permutation_test_pd(
    group_a: &[Configuration],
    group_b: &[Configuration],
    n_perm: usize,
    seed: u64,
) -> Result<PermutationResult, MorphoError> {
    permutation_test_pd_with(group_a, group_b, n_perm, seed, &GpaOptions::default()).map(|r| r.0)
}

/// As [`permutation_test_pd`], also returning the joint superimposition
/// (group A specimens first).
pub fn permutation_test_pd_with(
    group_a: &[Configuration],
    group_b: &[Configuration],
    n_perm: usize,
    seed: u64,
    opts: &GpaOptions,
) -> Result<(PermutationResult, GpaResult), MorphoError> {
    for g in [group_a, group_b] {
        if g.len() < 2 {
            return Err(MorphoError::GroupTooSmall(g.len()));
        }
    }
    let pooled: Vec<Configuration> = group_a.iter().chain(group_b).cloned().collect();
    let joint = gpa(&pooled, opts)?;
    let n = pooled.len();
    let n_a = group_a.len();
    let labels: Vec<bool> = (0..n).map(|i| i < n_a).collect();
    let observed = group_mean_distance(&joint.aligned, &labels);

    let permuted: Vec<f64> = (0..n_perm)
        .into_par_iter()
        .map(|k| {
            let mut stream = Stream::new(seed, k as u64);
            let mut shuffled = labels.clone();
            stream.shuffle(&mut shuffled);
            group_mean_distance(&joint.aligned, &shuffled)
        })
        .collect();
    let exceed = permuted.iter().filter(|&&s| s >= observed).count();
    let p_value = (1 + exceed) as f64 / (n_perm + 1) as f64;
    Ok((
        PermutationResult {
            observed_statistic: observed,
            permuted,
            p_value,
            seed,
        },
        joint,
    ))
}
