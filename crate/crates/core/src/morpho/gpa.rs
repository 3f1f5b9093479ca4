use nalgebra::{Matrix3, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::procrustes::{fit_rotation, preshape_distance};
use super::{centroid_size, check_same_names, Configuration, MorphoError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GpaOptions {
    /// Scale every specimen to unit centroid size.
    pub scale: bool,
    /// Convergence threshold on the root-mean-square landmark change of the
    /// consensus between iterations.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for GpaOptions {
    fn default() -> Self {
        GpaOptions {
            scale: true,
            tol: 1e-10,
            max_iter: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GpaResult {
    /// Superimposed specimens, in input order.
    pub aligned: Vec<Configuration>,
    pub consensus: Configuration,
    /// Centroid size of each input specimen before scaling (mm).
    pub centroid_sizes: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Generalized Procrustes Analysis.
///
/// Specimens are centered, optionally scaled to unit centroid size, then
/// repeatedly rotated onto the running consensus (the mean of the rotated
/// specimens, rescaled to unit size when `scale` is set) until the
/// consensus moves less than `tol`. The final set is rotated so the
/// consensus lies on its principal axes; without this the result would
/// inherit the orientation of whichever specimen seeded the iteration.
///
/// Non-convergence is not an error: the last iterate is returned with
/// `converged == false`.
pub fn gpa(samples: &[Configuration], opts: &GpaOptions) -> Result<GpaResult, MorphoError> {
    if samples.len() < 2 {
        return Err(MorphoError::TooFewSpecimens {
            required: 2,
            found: samples.len(),
        });
    }
    check_same_names(samples)?;
    let l = samples[0].len();

    let centroid_sizes = samples
        .iter()
        .map(centroid_size)
        .collect::<Result<Vec<_>, _>>()?;
    let start: Vec<Vec<Vector3<f64>>> = samples
        .iter()
        .zip(&centroid_sizes)
        .map(|(c, &cs)| {
            let centered = c.centered();
            if opts.scale {
                centered.coords.iter().map(|p| p / cs).collect()
            } else {
                centered.coords
            }
        })
        .collect();

    let normalize = |mut m: Vec<Vector3<f64>>| -> Vec<Vector3<f64>> {
        if opts.scale {
            let norm = m.iter().map(|p| p.norm_squared()).sum::<f64>().sqrt();
            if norm > 0.0 {
                m.iter_mut().for_each(|p| *p /= norm);
            }
        }
        m
    };

    let mut consensus = normalize(start[0].clone());
    let mut rotations = vec![Matrix3::identity(); samples.len()];
    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iter {
        iterations += 1;
        rotations = start
            .par_iter()
            .map(|x| fit_rotation(x, &consensus).rotation)
            .collect();
        let mut mean = vec![Vector3::zeros(); l];
        for (x, q) in start.iter().zip(&rotations) {
            for (m, p) in mean.iter_mut().zip(x) {
                *m += q * p;
            }
        }
        let n = samples.len() as f64;
        mean.iter_mut().for_each(|m| *m /= n);
        let next = normalize(mean);
        let change = (next
            .iter()
            .zip(&consensus)
            .map(|(a, b)| (a - b).norm_squared())
            .sum::<f64>()
            / l as f64)
            .sqrt();
        consensus = next;
        if change < opts.tol {
            converged = true;
            break;
        }
    }

    // Final fit against the converged consensus, then canonical orientation.
    rotations = start
        .par_iter()
        .map(|x| fit_rotation(x, &consensus).rotation)
        .collect();
    let frame = principal_frame(&consensus);
    let consensus_coords: Vec<Vector3<f64>> = consensus.iter().map(|p| frame * p).collect();
    let aligned = samples
        .iter()
        .zip(&start)
        .zip(&rotations)
        .map(|((orig, x), q)| {
            let r = frame * q;
            orig.with_coords(x.iter().map(|p| r * p).collect())
        })
        .collect();

    let consensus = Configuration {
        subject_id: "consensus".into(),
        method_tag: samples[0].method_tag.clone(),
        names: samples[0].names.clone(),
        coords: consensus_coords,
    };
    Ok(GpaResult {
        aligned,
        consensus,
        centroid_sizes,
        iterations,
        converged,
    })
}

/// Rotation taking a centered configuration onto its principal axes
/// (descending second moment). Axis signs are fixed by the sign of the third
/// moment along the axis, falling back to the first landmark with a non-zero
/// projection; the last axis completes a right-handed frame.
fn principal_frame(coords: &[Vector3<f64>]) -> Matrix3<f64> {
    let mut scatter = Matrix3::zeros();
    for p in coords {
        scatter += p * p.transpose();
    }
    let eig = scatter.symmetric_eigen();
    let mut order = [0usize, 1, 2];
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let mut axes = [Vector3::zeros(); 2];
    for (slot, &k) in axes.iter_mut().zip(order.iter()) {
        let mut e = eig.eigenvectors.column(k).into_owned();
        let skew: f64 = coords.iter().map(|p| e.dot(p).powi(3)).sum();
        let scale: f64 = coords.iter().map(|p| e.dot(p).abs().powi(3)).sum();
        let sign = if skew.abs() > 1e-9 * scale {
            skew.signum()
        } else {
            coords
                .iter()
                .map(|p| e.dot(p))
                .find(|v| v.abs() > 1e-9)
                .map(f64::signum)
                .unwrap_or(1.0)
        };
        e *= sign;
        *slot = e;
    }
    let third = axes[0].cross(&axes[1]);
    Matrix3::from_rows(&[
        axes[0].transpose(),
        axes[1].transpose(),
        third.transpose(),
    ])
}

/// Procrustes distances between every unordered pair of aligned specimens,
/// in order (0,1), (0,2), ..., (1,2), ...
pub fn pairwise_procrustes_distances(g: &GpaResult) -> Vec<f64> {
    let pre: Vec<Vec<Vector3<f64>>> = g
        .aligned
        .iter()
        .map(|c| {
            let centered = c.centered();
            let norm = centered.squared_norm().sqrt();
            if norm > 0.0 {
                centered.coords.iter().map(|p| p / norm).collect()
            } else {
                centered.coords
            }
        })
        .collect();
    let n = pre.len();
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .collect();
    pairs
        .par_iter()
        .map(|&(i, j)| preshape_distance(&pre[i], &pre[j]))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::morpho::procrustes_distance;
    use nalgebra::Rotation3;

    fn base() -> Configuration {
        Configuration::from_coords(vec![
            Vector3::new(0.0, 0.0, 0.0),
            Vector3::new(40.0, 5.0, 0.0),
            Vector3::new(10.0, 30.0, 2.0),
            Vector3::new(15.0, 10.0, 25.0),
            Vector3::new(-10.0, 20.0, 10.0),
            Vector3::new(5.0, -8.0, 4.0),
        ])
        .unwrap()
    }

    fn similar(c: &Configuration, angles: (f64, f64, f64), s: f64, t: Vector3<f64>) -> Configuration {
        let r = *Rotation3::from_euler_angles(angles.0, angles.1, angles.2).matrix();
        c.with_coords(c.coords.iter().map(|p| r * p * s + t).collect())
    }

    #[test]
    fn copies_of_one_shape_coincide() {
        let b = base();
        let samples = vec![
            similar(&b, (0.1, 0.2, 0.3), 1.0, Vector3::new(1.0, 2.0, 3.0)),
            similar(&b, (2.0, -1.0, 0.5), 3.0, Vector3::new(-5.0, 0.0, 9.0)),
            similar(&b, (-0.7, 0.9, 2.9), 0.4, Vector3::zeros()),
        ];
        let g = gpa(&samples, &GpaOptions::default()).unwrap();
        assert!(g.converged);
        for a in &g.aligned {
            for (p, q) in a.coords.iter().zip(&g.consensus.coords) {
                assert!((p - q).norm() < 1e-8);
            }
        }
        assert!(procrustes_distance(&g.consensus, &b).unwrap() < 1e-8);
        assert!((g.centroid_sizes[1] / g.centroid_sizes[0] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn consensus_is_centered_unit_size() {
        let b = base();
        let mut other = b.clone();
        other.coords[3].z += 6.0;
        other.coords[0].x -= 3.0;
        let g = gpa(&[b, other], &GpaOptions::default()).unwrap();
        assert!((centroid_size(&g.consensus).unwrap() - 1.0).abs() < 1e-12);
        assert!(g.consensus.centroid().norm() < 1e-12);
        for a in &g.aligned {
            assert!(a.centroid().norm() < 1e-9);
        }
    }

    #[test]
    fn needs_two_specimens() {
        assert!(matches!(
            gpa(&[base()], &GpaOptions::default()),
            Err(MorphoError::TooFewSpecimens { .. })
        ));
    }

    #[test]
    fn name_mismatch() {
        let b = base();
        let mut other = b.clone();
        other.names[0] = "zz".into();
        assert!(matches!(
            gpa(&[b, other], &GpaOptions::default()),
            Err(MorphoError::NameMismatch { .. })
        ));
    }

    #[test]
    fn pair_order_and_count() {
        let b = base();
        let mut samples = vec![];
        for k in 0..5 {
            let mut c = b.clone();
            c.coords[k].y += 2.0 + k as f64;
            samples.push(c);
        }
        let g = gpa(&samples, &GpaOptions::default()).unwrap();
        let d = pairwise_procrustes_distances(&g);
        assert_eq!(d.len(), 10);
        let expected_13 = procrustes_distance(&g.aligned[1], &g.aligned[3]).unwrap();
        // (0,1) (0,2) (0,3) (0,4) (1,2) (1,3)
        assert!((d[5] - expected_13).abs() < 1e-14);
    }

    #[test]
    fn identical_specimens_give_zero_distances() {
        let b = base();
        let g = gpa(&[b.clone(), b.clone(), b], &GpaOptions::default()).unwrap();
        assert!(pairwise_procrustes_distances(&g).iter().all(|&d| d == 0.0));
    }
}
