//! Gaussian feature statistics and the Frechet distance between them.
//!
//! For `N(mu1, S1)` and `N(mu2, S2)` the squared 2-Wasserstein distance is
//!
//! ```text
//! |mu1 - mu2|^2 + tr(S1 + S2 - 2 (S1^1/2 S2 S1^1/2)^1/2)
//! ```
//!
//! The product square root is taken in the symmetric form above so only
//! symmetric eigendecompositions are needed.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureTable;

/// Regularizer added to both covariance diagonals by default.
pub const DEFAULT_FID_EPS: f64 = 1e-6;
const SYMMETRY_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeatureSource {
    BuiltinDescriptor,
    ExternalFile,
}

/// `n x d` matrix of per-image features, all finite.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    values: DMatrix<f64>,
    pub source: FeatureSource,
}

impl FeatureMatrix {
    pub fn from_rows(rows: &[Vec<f64>], source: FeatureSource) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::InsufficientSamples {
                required: 1,
                actual: 0,
            });
        }
        let d = rows[0].len();
        if d == 0 {
            return Err(Error::argument("feature dimension must be at least 1"));
        }
        if let Some(i) = rows.iter().position(|r| r.len() != d) {
            return Err(Error::argument(format!(
                "feature row {i} has {} values, expected {d}",
                rows[i].len()
            )));
        }
        if let Some(i) = rows.iter().position(|r| r.iter().any(|v| !v.is_finite())) {
            return Err(Error::argument(format!(
                "feature row {i} has a non-finite value"
            )));
        }
        Ok(FeatureMatrix {
            values: DMatrix::from_fn(n, d, |i, j| rows[i][j]),
            source,
        })
    }

    /// Rows of `table` in file order.
    pub fn from_table(table: &FeatureTable) -> Result<Self> {
        let rows: Vec<Vec<f64>> = table.iter().map(|(_, r)| r.to_vec()).collect();
        FeatureMatrix::from_rows(&rows, FeatureSource::ExternalFile)
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn d(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.values.row(i).iter().copied().collect()
    }
}

/// Mean and covariance of a feature set.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianStats {
    pub mu: DVector<f64>,
    pub sigma: DMatrix<f64>,
    /// Number of samples the statistics were estimated from.
    pub n: usize,
}

impl GaussianStats {
    pub fn new(mu: DVector<f64>, sigma: DMatrix<f64>, n: usize) -> Result<Self> {
        if sigma.nrows() != mu.len() || sigma.ncols() != mu.len() {
            return Err(Error::argument(format!(
                "covariance is {}x{}, mean has length {}",
                sigma.nrows(),
                sigma.ncols(),
                mu.len()
            )));
        }
        check_symmetric(&sigma)?;
        Ok(GaussianStats { mu, sigma, n })
    }

    pub fn d(&self) -> usize {
        self.mu.len()
    }
}

/// Column means and unbiased sample covariance (divisor `n - 1`),
/// symmetrized as `(S + S^T) / 2`.
///
/// Rows are accumulated in lexicographic order of their values, so the
/// result is bitwise independent of the input row order.
pub fn gaussian_stats(f: &FeatureMatrix) -> Result<GaussianStats> {
    let (n, d) = (f.n(), f.d());
    if n < 2 {
        return Err(Error::InsufficientSamples {
            required: 2,
            actual: n,
        });
    }
    let x = f.values();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        (0..d)
            .map(|j| x[(a, j)].total_cmp(&x[(b, j)]))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });

    let mut mu = DVector::zeros(d);
    for &i in &order {
        for j in 0..d {
            mu[j] += x[(i, j)];
        }
    }
    mu /= n as f64;

    let mut sigma = DMatrix::zeros(d, d);
    let mut dev = vec![0.0; d];
    for &i in &order {
        for j in 0..d {
            dev[j] = x[(i, j)] - mu[j];
        }
        for r in 0..d {
            for c in 0..d {
                sigma[(r, c)] += dev[r] * dev[c];
            }
        }
    }
    sigma /= (n - 1) as f64;
    let sigma = (&sigma + sigma.transpose()) * 0.5;
    Ok(GaussianStats { mu, sigma, n })
}

fn check_symmetric(m: &DMatrix<f64>) -> Result<()> {
    if !m.is_square() {
        return Err(Error::argument(format!(
            "expected a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("matrix has non-finite entries".into()));
    }
    let scale = m.amax().max(1.0);
    let asym = (m - m.transpose()).amax();
    if asym > SYMMETRY_TOLERANCE * scale {
        return Err(Error::argument(format!(
            "matrix is not symmetric: max |m_ij - m_ji| = {asym:e}"
        )));
    }
    Ok(())
}

fn symmetric_eigen(m: &DMatrix<f64>) -> Result<SymmetricEigen<f64, nalgebra::Dyn>> {
    check_symmetric(m)?;
    let sym = (m + m.transpose()) * 0.5;
    let max_iter = 1000 * sym.nrows().max(1);
    SymmetricEigen::try_new(sym, f64::EPSILON, max_iter)
        .ok_or_else(|| Error::Numerical("symmetric eigendecomposition did not converge".into()))
}

/// Principal square root of a symmetric positive semidefinite matrix.
/// Negative eigenvalues (round-off) are clamped to zero.
pub fn sqrtm_psd(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let eig = symmetric_eigen(m)?;
    let q = &eig.eigenvectors;
    let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    let s = q * DMatrix::from_diagonal(&roots) * q.transpose();
    Ok((&s + s.transpose()) * 0.5)
}

/// Trace of `sqrtm_psd(m)`: the sum of the square roots of the clamped
/// eigenvalues.
fn trace_sqrtm_psd(m: &DMatrix<f64>) -> Result<f64> {
    let eig = symmetric_eigen(m)?;
    Ok(eig.eigenvalues.iter().map(|l| l.max(0.0).sqrt()).sum())
}

/// Squared 2-Wasserstein distance between two Gaussians, with `eps` added
/// to both covariance diagonals. Negative round-off results clamp to 0.
pub fn frechet_distance(g1: &GaussianStats, g2: &GaussianStats, eps: f64) -> Result<f64> {
    if g1.d() != g2.d() {
        return Err(Error::argument(format!(
            "feature dimensions differ: {} vs {}",
            g1.d(),
            g2.d()
        )));
    }
    if !(eps >= 0.0) || !eps.is_finite() {
        return Err(Error::argument(format!("fid eps must be >= 0, got {eps}")));
    }
    let d = g1.d();
    let reg = DMatrix::<f64>::identity(d, d) * eps;
    let s1 = &g1.sigma + &reg;
    let s2 = &g2.sigma + &reg;

    let root1 = sqrtm_psd(&s1)?;
    let inner = &root1 * &s2 * &root1;
    let inner = (&inner + inner.transpose()) * 0.5;
    let cross = trace_sqrtm_psd(&inner)?;

    let mean_term = (&g1.mu - &g2.mu).norm_squared();
    let value = mean_term + s1.trace() + s2.trace() - 2.0 * cross;
    if !value.is_finite() {
        return Err(Error::Numerical("frechet distance is not finite".into()));
    }
    if value < 0.0 {
        log::debug!("frechet distance {value:e} clamped to 0");
        return Ok(0.0);
    }
    Ok(value)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidResult {
    pub distance: f64,
    pub warnings: Vec<String>,
}

/// Frechet distance between the Gaussian fits of two feature sets.
pub fn fid(real: &FeatureMatrix, generated: &FeatureMatrix, eps: f64) -> Result<FidResult> {
    if real.d() != generated.d() {
        return Err(Error::argument(format!(
            "feature dimensions differ: real {} vs generated {}",
            real.d(),
            generated.d()
        )));
    }
    let mut warnings = Vec::new();
    for (label, m) in [("real", real), ("generated", generated)] {
        if m.n() < m.d() {
            let msg = format!(
                "{label} set has {} samples for {} feature dimensions; covariance is rank deficient",
                m.n(),
                m.d()
            );
            log::warn!("{msg}");
            warnings.push(msg);
        }
    }
    let g1 = gaussian_stats(real).map_err(|e| e.context("real features"))?;
    let g2 = gaussian_stats(generated).map_err(|e| e.context("generated features"))?;
    Ok(FidResult {
        distance: frechet_distance(&g1, &g2, eps)?,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag_stats(mu: &[f64], var: &[f64]) -> GaussianStats {
        GaussianStats::new(
            DVector::from_column_slice(mu),
            DMatrix::from_diagonal(&DVector::from_column_slice(var)),
            10,
        )
        .unwrap()
    }

    #[test]
    fn stats_of_two_points() {
        let f = FeatureMatrix::from_rows(
            &[vec![0.0, 0.0], vec![2.0, 2.0]],
            FeatureSource::ExternalFile,
        )
        .unwrap();
        let g = gaussian_stats(&f).unwrap();
        assert_eq!(g.mu.as_slice(), &[1.0, 1.0]);
        assert_eq!(
            g.sigma,
            DMatrix::from_row_slice(2, 2, &[2.0, 2.0, 2.0, 2.0])
        );
    }

    #[test]
    fn stats_of_repeated_row() {
        let rows = vec![vec![0.3, -1.0, 4.0]; 5];
        let g =
            gaussian_stats(&FeatureMatrix::from_rows(&rows, FeatureSource::ExternalFile).unwrap())
                .unwrap();
        assert_eq!(g.mu.as_slice(), &[0.3, -1.0, 4.0]);
        assert!(g.sigma.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn stats_need_two_rows() {
        let f = FeatureMatrix::from_rows(&[vec![1.0]], FeatureSource::ExternalFile).unwrap();
        assert!(matches!(
            gaussian_stats(&f),
            Err(Error::InsufficientSamples {
                required: 2,
                actual: 1
            })
        ));
    }

    #[test]
    fn rejects_ragged_and_non_finite_rows() {
        assert!(FeatureMatrix::from_rows(
            &[vec![1.0], vec![1.0, 2.0]],
            FeatureSource::ExternalFile
        )
        .is_err());
        assert!(FeatureMatrix::from_rows(&[vec![f64::NAN]], FeatureSource::ExternalFile).is_err());
    }

    #[test]
    fn sqrtm_of_simple_matrices() {
        let i = DMatrix::<f64>::identity(3, 3);
        assert!((sqrtm_psd(&i).unwrap() - &i).amax() < 1e-14);
        let d = DMatrix::from_diagonal(&DVector::from_column_slice(&[4.0, 9.0]));
        let s = sqrtm_psd(&d).unwrap();
        assert!(
            (s - DMatrix::from_diagonal(&DVector::from_column_slice(&[2.0, 3.0]))).amax() < 1e-14
        );
    }

    #[test]
    fn sqrtm_rejects_asymmetric() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(matches!(sqrtm_psd(&m), Err(Error::Argument(_))));
    }

    #[test]
    fn scalar_closed_form() {
        let d = frechet_distance(
            &diag_stats(&[0.0], &[1.0]),
            &diag_stats(&[3.0], &[4.0]),
            0.0,
        )
        .unwrap();
        assert!((d - 10.0).abs() < 1e-12);
    }

    #[test]
    fn commuting_diagonal_closed_form() {
        let d = frechet_distance(
            &diag_stats(&[0.0, 0.0], &[1.0, 4.0]),
            &diag_stats(&[1.0, 1.0], &[4.0, 1.0]),
            0.0,
        )
        .unwrap();
        assert!((d - 4.0).abs() < 1e-12);
    }

    #[test]
    fn identical_stats_are_zero() {
        let g = diag_stats(&[1.0, 2.0, 3.0], &[0.5, 1e-9, 7.0]);
        assert!(frechet_distance(&g, &g, DEFAULT_FID_EPS).unwrap() <= 1e-8);
    }

    #[test]
    fn dimension_mismatch() {
        let err = frechet_distance(
            &diag_stats(&[0.0], &[1.0]),
            &diag_stats(&[0.0, 0.0], &[1.0, 1.0]),
            0.0,
        );
        assert!(matches!(err, Err(Error::Argument(_))));
    }

    #[test]
    fn fid_warns_when_undersampled() {
        let rows: Vec<Vec<f64>> = (0..3)
            .map(|i| vec![i as f64, (i * i) as f64, 1.0, 0.5])
            .collect();
        let f = FeatureMatrix::from_rows(&rows, FeatureSource::ExternalFile).unwrap();
        let r = fid(&f, &f, DEFAULT_FID_EPS).unwrap();
        assert_eq!(r.warnings.len(), 2);
        assert!(r.distance <= 1e-8);
    }
}
