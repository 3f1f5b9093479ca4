use nalgebra::{Matrix3, Rotation3, Unit, Vector3};

use super::{preshape, Configuration, MorphoError};

/// Result of a rotation fit. `rank_deficient` is set when the optimum is not
/// unique (the cross-covariance has rank below 2); the rotation returned in
/// that case is the smallest-angle optimum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotationFit {
    pub rotation: Matrix3<f64>,
    pub rank_deficient: bool,
}

/// Proper rotation `Q` minimizing `sum |Q a_i - b_i|^2` over landmark pairs.
///
/// Both configurations are expected to be centered. Reflections are never
/// returned: when the unconstrained optimum is improper the smallest
/// singular direction is flipped.
pub fn orthogonal_procrustes(
    a: &Configuration,
    b: &Configuration,
) -> Result<RotationFit, MorphoError> {
    if a.len() != b.len() {
        return Err(MorphoError::LandmarkCountMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    Ok(fit_rotation(&a.coords, &b.coords))
}

pub(crate) fn fit_rotation(a: &[Vector3<f64>], b: &[Vector3<f64>]) -> RotationFit {
    let mut m = Matrix3::zeros();
    for (x, y) in a.iter().zip(b) {
        m += y * x.transpose();
    }
    let svd = m.svd(true, true);
    let u = svd.u.expect("u requested");
    let v_t = svd.v_t.expect("v_t requested");
    let mut sigma: Vec<(f64, usize)> = svd
        .singular_values
        .iter()
        .copied()
        .enumerate()
        .map(|(i, s)| (s, i))
        .collect();
    sigma.sort_by(|x, y| y.0.total_cmp(&x.0));
    let (s_max, i_max) = sigma[0];
    let s_mid = sigma[1].0;

    if s_max <= 0.0 || s_mid <= 1e-12 * s_max {
        // At most one informative direction: rotate the dominant source axis
        // onto the dominant target axis by the shortest arc.
        let rotation = if s_max <= 0.0 {
            Matrix3::identity()
        } else {
            let from = v_t.row(i_max).transpose();
            let to = u.column(i_max).into_owned();
            shortest_arc(&from, &to)
        };
        return RotationFit {
            rotation,
            rank_deficient: true,
        };
    }

    let d = if (u * v_t).determinant() < 0.0 { -1.0 } else { 1.0 };
    // Flip the column belonging to the smallest singular value.
    let i_min = sigma[2].1;
    let mut diag = Vector3::new(1.0, 1.0, 1.0);
    diag[i_min] = d;
    RotationFit {
        rotation: u * Matrix3::from_diagonal(&diag) * v_t,
        rank_deficient: false,
    }
}

fn shortest_arc(from: &Vector3<f64>, to: &Vector3<f64>) -> Matrix3<f64> {
    let from = Unit::new_normalize(*from);
    let to = Unit::new_normalize(*to);
    match Rotation3::rotation_between(&from, &to) {
        Some(r) => *r.matrix(),
        None => {
            // Antiparallel: half turn about any axis orthogonal to `from`.
            let helper = if from.x.abs() < 0.9 {
                Vector3::x()
            } else {
                Vector3::y()
            };
            let axis = Unit::new_normalize(from.cross(&helper));
            *Rotation3::from_axis_angle(&axis, std::f64::consts::PI).matrix()
        }
    }
}

/// Partial Procrustes distance: both configurations are reduced to centered,
/// unit-centroid-size pre-shapes, `b` is optimally rotated onto `a`, and the
/// root of the summed squared landmark differences is returned.
pub fn procrustes_distance(a: &Configuration, b: &Configuration) -> Result<f64, MorphoError> {
    if a.len() != b.len() {
        return Err(MorphoError::LandmarkCountMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    let pa = preshape(a)?;
    let pb = preshape(b)?;
    Ok(preshape_distance(&pa.coords, &pb.coords))
}

/// Distance between two pre-shapes (already centered and scaled).
pub(crate) fn preshape_distance(a: &[Vector3<f64>], b: &[Vector3<f64>]) -> f64 {
    if a == b {
        return 0.0;
    }
    let q = fit_rotation(b, a).rotation;
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - q * y).norm_squared())
        .sum::<f64>()
        .sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn shape() -> Configuration {
        Configuration::from_coords(vec![
            Vector3::new(0.0, 0.0, 0.0),
            Vector3::new(4.0, 0.5, 0.0),
            Vector3::new(1.0, 3.0, 0.2),
            Vector3::new(1.5, 1.0, 2.5),
            Vector3::new(-1.0, 2.0, 1.0),
        ])
        .unwrap()
        .centered()
    }

    #[test]
    fn identity_for_equal() {
        let a = shape();
        let fit = orthogonal_procrustes(&a, &a).unwrap();
        assert!((fit.rotation - Matrix3::identity()).norm() < 1e-14);
        assert!(!fit.rank_deficient);
    }

    #[test]
    fn recovers_rotation() {
        let a = shape();
        let r0 = *Rotation3::from_euler_angles(1.0, -0.4, 2.2).matrix();
        let fit = orthogonal_procrustes(&a, &a.rotated(&r0)).unwrap();
        assert!((fit.rotation - r0).norm() < 1e-12);
    }

    #[test]
    fn reflection_gives_proper_rotation_with_residual() {
        let a = shape();
        let mirror = Matrix3::from_diagonal(&Vector3::new(-1.0, 1.0, 1.0));
        let b = a.with_coords(a.coords.iter().map(|c| mirror * c).collect());
        let fit = orthogonal_procrustes(&a, &b).unwrap();
        assert!((fit.rotation.determinant() - 1.0).abs() < 1e-12);
        let resid: f64 = a
            .coords
            .iter()
            .zip(&b.coords)
            .map(|(x, y)| (fit.rotation * x - y).norm_squared())
            .sum();
        assert!(resid > 1e-3);
    }

    #[test]
    fn collinear_is_flagged_with_shortest_arc() {
        let line = Configuration::from_coords(vec![
            Vector3::new(-1.0, 0.0, 0.0),
            Vector3::new(0.0, 0.0, 0.0),
            Vector3::new(1.0, 0.0, 0.0),
        ])
        .unwrap();
        let target = line.with_coords(
            line.coords
                .iter()
                .map(|c| Vector3::new(0.0, c.x, 0.0))
                .collect(),
        );
        let fit = orthogonal_procrustes(&line, &target).unwrap();
        assert!(fit.rank_deficient);
        // Quarter turn about z is the shortest arc from +x to +y.
        let angle = ((fit.rotation.trace() - 1.0) / 2.0).acos();
        assert!((angle - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
        assert!((fit.rotation * Vector3::x() - Vector3::y()).norm() < 1e-12);
    }

    #[test]
    fn distance_basics() {
        let a = shape();
        assert_eq!(procrustes_distance(&a, &a).unwrap(), 0.0);
        let mut b = a.clone();
        b.coords[2].z += 0.7;
        let d1 = procrustes_distance(&a, &b).unwrap();
        let d2 = procrustes_distance(&b, &a).unwrap();
        assert!(d1 > 0.0);
        assert!((d1 - d2).abs() < 1e-12);
    }
}
