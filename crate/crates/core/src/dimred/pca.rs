use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::DimRedError;

/// Principal axes of a data matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel {
    pub mean: DVector<f64>,
    /// `k x d`, orthonormal rows, largest-magnitude entry of each row positive.
    pub components: DMatrix<f64>,
    /// Sample variances (divisor `n - 1`) along each component, descending.
    pub explained_variances: Vec<f64>,
    /// Trace of the sample covariance.
    pub total_variance: f64,
}

/// Fits the top-`k` principal components of the rows of `x`.
///
/// Eigendecomposes the `d x d` covariance when `n >= d` and the `n x n` Gram
/// matrix otherwise, mapping Gram eigenvectors back through the data.
pub fn pca_fit(x: &DMatrix<f64>, k: usize) -> Result<PcaModel, DimRedError> {
    let (n, d) = x.shape();
    if n < 2 {
        return Err(DimRedError::TooFewRows { needed: 2, got: n });
    }
    if k == 0 || k > (n - 1).min(d) {
        return Err(DimRedError::DimensionOutOfRange { k, n, d });
    }
    let mean = x.row_mean().transpose();
    let mut centered = x.clone();
    for mut row in centered.row_iter_mut() {
        row -= mean.transpose();
    }
    let scale = 1.0 / (n - 1) as f64;
    let total_variance = centered.iter().map(|v| v * v).sum::<f64>() * scale;
    if total_variance == 0.0 {
        return Err(DimRedError::Degenerate);
    }

    let (values, vectors) = if n >= d {
        let cov = centered.transpose() * &centered * scale;
        let eig = SymmetricEigen::new(cov);
        let order = descending(&eig.eigenvalues);
        let values: Vec<f64> = order.iter().take(k).map(|&i| eig.eigenvalues[i].max(0.0)).collect();
        let vectors: Vec<DVector<f64>> = order.iter().take(k).map(|&i| eig.eigenvectors.column(i).into_owned()).collect();
        (values, vectors)
    } else {
        let gram = &centered * centered.transpose() * scale;
        let eig = SymmetricEigen::new(gram);
        let order = descending(&eig.eigenvalues);
        let largest = eig.eigenvalues[order[0]];
        let mut values = Vec::with_capacity(k);
        let mut vectors = Vec::with_capacity(k);
        for &i in order.iter().take(k) {
            let lambda = eig.eigenvalues[i];
            if lambda <= largest * 1e-12 {
                return Err(DimRedError::RankDeficient(k));
            }
            let v = centered.transpose() * eig.eigenvectors.column(i) / ((n - 1) as f64 * lambda).sqrt();
            values.push(lambda);
            vectors.push(v);
        }
        (values, vectors)
    };

    let mut components = DMatrix::zeros(k, d);
    for (r, mut v) in vectors.into_iter().enumerate() {
        let pivot = v.iter().enumerate().fold(0, |best, (i, x)| if x.abs() > v[best].abs() { i } else { best });
        if v[pivot] < 0.0 {
            v.neg_mut();
        }
        components.set_row(r, &v.transpose());
    }
    Ok(PcaModel { mean, components, explained_variances: values, total_variance })
}

fn descending(values: &DVector<f64>) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    order
}

impl PcaModel {
    pub fn n_components(&self) -> usize {
        self.components.nrows()
    }

    pub fn explained_variance_ratio(&self) -> Vec<f64> {
        self.explained_variances.iter().map(|v| v / self.total_variance).collect()
    }

    fn check(&self, cols: usize, expected: usize) -> Result<(), DimRedError> {
        if cols != expected {
            return Err(DimRedError::DimensionMismatch { expected, got: cols });
        }
        Ok(())
    }

    /// `(X - mean) * components^T`.
    pub fn transform(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>, DimRedError> {
        self.check(x.ncols(), self.mean.len())?;
        let mut centered = x.clone();
        for mut row in centered.row_iter_mut() {
            row -= self.mean.transpose();
        }
        Ok(centered * self.components.transpose())
    }

    /// `Y * components + mean`.
    pub fn inverse_transform(&self, y: &DMatrix<f64>) -> Result<DMatrix<f64>, DimRedError> {
        self.check(y.ncols(), self.n_components())?;
        let mut out = y * &self.components;
        for mut row in out.row_iter_mut() {
            row += self.mean.transpose();
        }
        Ok(out)
    }
}

/// Z-scores each column in place; constant columns are only centered.
pub fn standardize_columns(x: &mut DMatrix<f64>) {
    let n = x.nrows() as f64;
    for mut col in x.column_iter_mut() {
        let mean = col.sum() / n;
        let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let std = if var > 0.0 { var.sqrt() } else { 1.0 };
        col.apply(|v| *v = (*v - mean) / std);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use rand::Rng;

    fn random(n: usize, d: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = rng_from_seed(seed);
        DMatrix::from_fn(n, d, |_, j| rng.random::<f64>() * (j + 1) as f64)
    }

    #[test]
    fn collinear_points() {
        let x = DMatrix::from_row_slice(3, 2, &[-1.0, -1.0, 0.0, 0.0, 1.0, 1.0]);
        let m = pca_fit(&x, 1).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((m.components[(0, 0)] - h).abs() < 1e-12 && (m.components[(0, 1)] - h).abs() < 1e-12);
        assert!((m.explained_variance_ratio()[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn full_rank_round_trip_both_routes() {
        for (n, d) in [(20, 6), (5, 9)] {
            let x = random(n, d, 3);
            let m = pca_fit(&x, (n - 1).min(d)).unwrap();
            let back = m.inverse_transform(&m.transform(&x).unwrap()).unwrap();
            assert!((back - &x).amax() < 1e-8, "n={n} d={d}");
            let gram = &m.components * m.components.transpose();
            assert!((gram - DMatrix::identity(m.n_components(), m.n_components())).amax() < 1e-8);
        }
    }

    #[test]
    fn transform_of_mean_is_zero_and_projection_idempotent() {
        let x = random(15, 5, 4);
        let m = pca_fit(&x, 2).unwrap();
        let mean_row = DMatrix::from_row_slice(1, 5, m.mean.as_slice());
        assert!(m.transform(&mean_row).unwrap().amax() < 1e-12);
        let project = |a: &DMatrix<f64>| m.inverse_transform(&m.transform(a).unwrap()).unwrap();
        let once = project(&x);
        assert!((project(&once) - &once).amax() < 1e-10);
    }

    #[test]
    fn column_variances_equal_explained() {
        let x = random(30, 4, 5);
        let m = pca_fit(&x, 3).unwrap();
        let y = m.transform(&x).unwrap();
        for (j, &ev) in m.explained_variances.iter().enumerate() {
            let col = y.column(j);
            let mu = col.mean();
            let var = col.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / 29.0;
            assert!((var - ev).abs() < 1e-9);
        }
        assert!(m.explained_variances.windows(2).all(|w| w[0] >= w[1]));
        assert!(m.explained_variances.iter().sum::<f64>() <= m.total_variance + 1e-12);
    }

    #[test]
    fn sign_convention() {
        let m = pca_fit(&random(12, 4, 6), 3).unwrap();
        for row in m.components.row_iter() {
            let pivot = row.iter().copied().fold(0.0f64, |a, b| if b.abs() > a.abs() { b } else { a });
            assert!(pivot > 0.0);
        }
    }

    #[test]
    fn errors() {
        let x = random(4, 3, 1);
        assert!(matches!(pca_fit(&x, 4), Err(DimRedError::DimensionOutOfRange { .. })));
        assert!(matches!(pca_fit(&x, 0), Err(DimRedError::DimensionOutOfRange { .. })));
        let same = DMatrix::from_element(5, 3, 0.7);
        assert!(matches!(pca_fit(&same, 1), Err(DimRedError::Degenerate)));
        let m = pca_fit(&x, 2).unwrap();
        assert!(m.transform(&random(2, 4, 1)).is_err());
    }

    #[test]
    fn translation_invariance() {
        let x = random(10, 3, 8);
        let shifted = x.map(|v| v + 5.0);
        let (a, b) = (pca_fit(&x, 2).unwrap(), pca_fit(&shifted, 2).unwrap());
        let (ya, yb) = (a.transform(&x).unwrap(), b.transform(&shifted).unwrap());
        assert!((ya - yb).amax() < 1e-9);
    }
}
