use nalgebra::{DMatrix, DVector};

use super::{check_same_names, Configuration, MorphoError};

/// Principal components of flattened (3L) Procrustes coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaResult {
    /// N x K specimen scores.
    pub scores: DMatrix<f64>,
    /// K x 3L orthonormal loadings, one component per row.
    pub components: DMatrix<f64>,
    /// Variance along each component (n - 1 denominator), descending.
    pub variance_explained: Vec<f64>,
    /// Trace of the full covariance matrix.
    pub total_variance: f64,
    /// Mean flattened configuration (length 3L).
    pub mean: DVector<f64>,
}

impl PcaResult {
    pub fn proportion_explained(&self) -> Vec<f64> {
        self.variance_explained
            .iter()
            .map(|v| if self.total_variance > 0.0 { v / self.total_variance } else { 0.0 })
            .collect()
    }

    /// (PC1, PC2) score of every specimen. Missing components read as 0.
    pub fn pc12(&self) -> Vec<[f64; 2]> {
        (0..self.scores.nrows())
            .map(|i| {
                let s = |k: usize| if k < self.scores.ncols() { self.scores[(i, k)] } else { 0.0 };
                [s(0), s(1)]
            })
            .collect()
    }

    /// Flattened coordinates rebuilt from the first `k` components.
    pub fn reconstruct(&self, specimen: usize, k: usize) -> DVector<f64> {
        let k = k.min(self.components.nrows());
        let mut out = self.mean.clone();
        for c in 0..k {
            out += self.components.row(c).transpose() * self.scores[(specimen, c)];
        }
        out
    }
}

/// PCA of a set of (already superimposed) configurations.
///
/// Keeps K = min(N - 1, 3L) components. Each component's sign is chosen so
/// its largest-magnitude loading is positive.
pub fn pca(configs: &[Configuration]) -> Result<PcaResult, MorphoError> {
    if configs.len() < 3 {
        return Err(MorphoError::TooFewSpecimens {
            required: 3,
            found: configs.len(),
        });
    }
    check_same_names(configs)?;
    let n = configs.len();
    let p = configs[0].len() * 3;
    let rows: Vec<Vec<f64>> = configs.iter().map(|c| c.flatten()).collect();
    let mut data = DMatrix::from_fn(n, p, |i, j| rows[i][j]);
    let mean = DVector::from_fn(p, |j, _| data.column(j).sum() / n as f64);
    for j in 0..p {
        let m = mean[j];
        data.column_mut(j).iter_mut().for_each(|v| *v -= m);
    }
    let total_variance = data.iter().map(|v| v * v).sum::<f64>() / (n - 1) as f64;

    let svd = data.clone().svd(false, true);
    let v_t = svd.v_t.expect("v_t requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]).then(a.cmp(&b)));
    let k = (n - 1).min(p).min(order.len());

    let mut components = DMatrix::zeros(k, p);
    let mut variance_explained = Vec::with_capacity(k);
    for (row, &src) in order.iter().take(k).enumerate() {
        let mut v = v_t.row(src).into_owned();
        let (imax, _) = v
            .iter()
            .enumerate()
            .fold((0, 0.0f64), |acc, (i, x)| if x.abs() > acc.1 { (i, x.abs()) } else { acc });
        if v[imax] < 0.0 {
            v = -v;
        }
        components.set_row(row, &v);
        let s = svd.singular_values[src];
        variance_explained.push(s * s / (n - 1) as f64);
    }
    let scores = &data * components.transpose();
    Ok(PcaResult {
        scores,
        components,
        variance_explained,
        total_variance,
        mean,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Vector3;

    fn configs_on_line(n: usize) -> Vec<Configuration> {
        (0..n)
            .map(|i| {
                let t = i as f64 - 2.0;
                Configuration::from_coords(vec![
                    Vector3::new(0.0, 0.0, 0.0),
                    Vector3::new(1.0 + 0.1 * t, 0.0, 0.0),
                    Vector3::new(0.0, 1.0, 0.2 * t),
                    Vector3::new(0.0, 0.0, 1.0),
                ])
                .unwrap()
            })
            .collect()
    }

    #[test]
    fn line_data_has_one_component() {
        let r = pca(&configs_on_line(5)).unwrap();
        let prop = r.proportion_explained();
        assert!((prop[0] - 1.0).abs() < 1e-12);
        assert!(r.variance_explained[1] < 1e-20);
    }

    #[test]
    fn full_reconstruction_and_orthonormality() {
        let mut cs = configs_on_line(6);
        cs[3].coords[0].y += 0.3;
        cs[1].coords[2].x -= 0.2;
        let r = pca(&cs).unwrap();
        for (i, c) in cs.iter().enumerate() {
            let back = r.reconstruct(i, r.components.nrows());
            for (a, b) in back.iter().zip(c.flatten()) {
                assert!((a - b).abs() < 1e-9);
            }
        }
        let gram = &r.components * r.components.transpose();
        for i in 0..gram.nrows() {
            for j in 0..gram.ncols() {
                let target = if i == j { 1.0 } else { 0.0 };
                // Components with zero variance are arbitrary but still unit.
                assert!((gram[(i, j)] - target).abs() < 1e-9);
            }
        }
        assert!(r.variance_explained.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn needs_three() {
        assert!(pca(&configs_on_line(2)).is_err());
    }
}
