//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};

use crate::error::{GcprError, Result};

/// A column is treated as dependent when its triangular pivot falls below
/// this fraction of the largest pivot.
pub const RANK_TOL: f64 = 1e-10;

/// Householder factorization `Z = QR` with a rank check on the pivots.
pub struct OrthoFactor {
    qr: nalgebra::linalg::QR<f64, nalgebra::Dyn, nalgebra::Dyn>,
    r: DMatrix<f64>,
}

impl OrthoFactor {
    pub fn new(z: &DMatrix<f64>) -> Result<Self> {
        let (n, k) = z.shape();
        if n < k {
            return Err(GcprError::DimensionMismatch(format!(
                "{n} observations for {k} regressors"
            )));
        }
        if z.iter().any(|v| !v.is_finite()) {
            return Err(GcprError::NonFinite("design matrix".into()));
        }
        let qr = z.clone().qr();
        let r = qr.r();
        let pivots: Vec<f64> = (0..k).map(|i| r[(i, i)].abs()).collect();
        let largest = pivots.iter().copied().fold(0.0, f64::max);
        if let Some(column) = pivots.iter().position(|&p| !(p > RANK_TOL * largest)) {
            return Err(GcprError::RankDeficient { column });
        }
        Ok(Self { qr, r })
    }

    pub fn ncols(&self) -> usize {
        self.r.ncols()
    }

    pub fn r(&self) -> &DMatrix<f64> {
        &self.r
    }

    /// First `k` entries of `Q'y`.
    pub fn q_tr_mul(&self, y: &DVector<f64>) -> DVector<f64> {
        let mut b = y.clone();
        self.qr.q_tr_mul(&mut b);
        b.rows(0, self.ncols()).into_owned()
    }

    /// Solve `R c = b`.
    pub fn solve_r(&self, b: &DVector<f64>) -> Result<DVector<f64>> {
        self.r
            .solve_upper_triangular(b)
            .ok_or(GcprError::RankDeficient { column: 0 })
    }

    /// Solve `R' c = b`.
    pub fn solve_r_tr(&self, b: &DVector<f64>) -> Result<DVector<f64>> {
        self.r
            .tr_solve_upper_triangular(b)
            .ok_or(GcprError::RankDeficient { column: 0 })
    }

    /// Diagonal of `(Z'Z)^{-1} = R^{-1} R^{-T}`.
    pub fn inverse_gram_diagonal(&self) -> Result<DVector<f64>> {
        let k = self.ncols();
        let r_inv = self
            .r
            .solve_upper_triangular(&DMatrix::identity(k, k))
            .ok_or(GcprError::RankDeficient { column: 0 })?;
        Ok(DVector::from_iterator(k, (0..k).map(|i| r_inv.row(i).norm_squared())))
    }
}

#[derive(Debug, Clone)]
pub struct LeastSquares {
    pub coef: DVector<f64>,
    pub residuals: DVector<f64>,
    pub rss: f64,
}

/// Least squares by orthogonal factorization (never normal equations).
pub fn least_squares(z: &DMatrix<f64>, y: &DVector<f64>) -> Result<LeastSquares> {
    if z.nrows() != y.len() {
        return Err(GcprError::DimensionMismatch(format!(
            "design has {} rows, response has {}",
            z.nrows(),
            y.len()
        )));
    }
    let f = OrthoFactor::new(z)?;
    let coef = f.solve_r(&f.q_tr_mul(y))?;
    let residuals = y - z * &coef;
    let rss = residuals.norm_squared();
    if !rss.is_finite() {
        return Err(GcprError::NonFinite("residual sum of squares".into()));
    }
    Ok(LeastSquares { coef, residuals, rss })
}

/// A square root `F` with `F F' = m` for a symmetric positive semidefinite
/// matrix: the lower Cholesky factor when it exists, otherwise the symmetric
/// root with negative eigenvalues clipped at zero.
pub fn psd_root(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(GcprError::NonFinite("covariance matrix".into()));
    }
    if let Some(ch) = m.clone().cholesky() {
        return Ok(ch.l());
    }
    let sym = (m + m.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let scale = eig
        .eigenvalues
        .iter()
        .map(|v| v.abs())
        .sum::<f64>()
        .max(f64::MIN_POSITIVE);
    if eig.eigenvalues.iter().any(|&v| v < -1e-8 * scale) {
        return Err(GcprError::NotPositiveDefinite(format!(
            "eigenvalues {:?}",
            eig.eigenvalues.as_slice()
        )));
    }
    let roots = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    Ok(&eig.eigenvectors * DMatrix::from_diagonal(&roots) * eig.eigenvectors.transpose())
}

/// Rows of a `DMatrix` as nested vectors (for JSON reports).
pub fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_deficiency_is_detected() {
        let z = DMatrix::from_row_slice(4, 2, &[1.0, 2.0, 1.0, 2.0, 1.0, 2.0, 1.0, 2.0]);
        assert!(matches!(
            OrthoFactor::new(&z),
            Err(GcprError::RankDeficient { column: 1 })
        ));
    }

    #[test]
    fn clipped_root_reproduces_semidefinite_matrix() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let f = psd_root(&m).unwrap();
        assert!((&f * f.transpose() - &m).abs().max() < 1e-12);
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(psd_root(&bad).is_err());
    }

    #[test]
    fn inverse_gram_matches_direct_inverse() {
        let z = DMatrix::from_row_slice(4, 2, &[1.0, 0.5, 1.0, 1.5, 1.0, 2.0, 1.0, 4.0]);
        let f = OrthoFactor::new(&z).unwrap();
        let direct = (z.transpose() * &z).try_inverse().unwrap();
        let diag = f.inverse_gram_diagonal().unwrap();
        for i in 0..2 {
            assert!((diag[i] - direct[(i, i)]).abs() < 1e-12);
        }
    }
}
