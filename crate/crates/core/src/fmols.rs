//! Fully modified OLS at given trend powers, used as a comparator for the
//! simulation-based tests.
//!
//! `[tau+; phi+] = (sum z z')^{-1} (sum z y+ - A*)` over `t = 2..T`, with
//! `y+ = y - Omega_uv Omega_vv^{-1} dx` and `A*` built from
//! `Delta+_vu = Delta_vu - Delta_vv Omega_vv^{-1} Omega_vu`. The computation
//! runs on the rescaled design, where `A*` becomes `F^{-1} A*` with entries
//! `Delta+_i j sum_t (x_t / sqrt T)^{j-1} / sqrt T`.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{GcprError, Result};
use crate::linalg::OrthoFactor;
use crate::lrv::LrvSet;
use crate::model::{Coordinate, DesignBuilder, ModelSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThetaSource {
    Estimated,
    Supplied,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FmolsFit {
    /// Specification with every trend power fixed at `theta_used`.
    pub spec: ModelSpec,
    pub theta_used: Vec<f64>,
    pub theta_source: ThetaSource,
    pub tau_plus: Vec<f64>,
    pub phi_plus: Vec<f64>,
    /// `A*` on the raw regressor scale.
    pub bias_correction: Vec<f64>,
    pub residuals_plus: Vec<f64>,
    scaled_coef: Vec<f64>,
    scaled_inverse_gram_diag: Vec<f64>,
}

/// FM-OLS with all trend powers set to `theta` (all `d` powers).
pub fn fmols_fit(
    spec: &ModelSpec,
    data: &Dataset,
    theta: &[f64],
    source: ThetaSource,
    lrv: &LrvSet,
) -> Result<FmolsFit> {
    let fixed = spec.with_fixed_powers(theta)?;
    if lrv.m() != data.n_regressors() {
        return Err(GcprError::DimensionMismatch(format!(
            "long-run covariance is for {} regressors, data has {}",
            lrv.m(),
            data.n_regressors()
        )));
    }
    let design = DesignBuilder::new(&fixed, data)?.build(theta)?;
    let t_len = data.len();
    let n = t_len - 1;
    let z = design.matrix.rows(1, n).into_owned();
    let coef = lrv.endogeneity_coefficients()?;
    let delta_plus = lrv.delta_plus_vu()?;
    let dx = data.differences();

    let y_plus = DVector::from_fn(n, |r, _| {
        data.y[r + 1] - dx.iter().zip(coef.iter()).map(|(d, c)| c * d[r]).sum::<f64>()
    });

    let d = fixed.n_trends();
    let k = z.ncols();
    let root = (t_len as f64).sqrt();
    let mut a_scaled = DVector::zeros(k);
    let mut col = d;
    for (i, &order) in fixed.regressor_orders.iter().enumerate() {
        for j in 1..=order {
            let sum: f64 = data.x[i][1..].iter().map(|x| (x / root).powi(j as i32 - 1)).sum();
            a_scaled[col] = delta_plus[i] * j as f64 * sum / root;
            col += 1;
        }
    }

    let f = OrthoFactor::new(&z)?;
    let rhs = f.q_tr_mul(&y_plus) - f.solve_r_tr(&a_scaled)?;
    let c_scaled = f.solve_r(&rhs)?;
    let raw = design.unscale_coefficients(&c_scaled);
    let residuals_plus = &y_plus - &z * &c_scaled;
    Ok(FmolsFit {
        theta_used: theta.to_vec(),
        theta_source: source,
        tau_plus: raw.rows(0, d).iter().copied().collect(),
        phi_plus: raw.rows(d, k - d).iter().copied().collect(),
        bias_correction: a_scaled.iter().zip(&design.unscale).map(|(a, u)| a * u).collect(),
        residuals_plus: residuals_plus.iter().copied().collect(),
        scaled_coef: c_scaled.iter().copied().collect(),
        scaled_inverse_gram_diag: f.inverse_gram_diagonal()?.iter().copied().collect(),
        spec: fixed,
    })
}

/// `t = c_k / sqrt(Omega_{u.v} [(sum z z')^{-1}]_kk)` for a trend or
/// polynomial coefficient.
pub fn fmols_t_stat(fit: &FmolsFit, lrv: &LrvSet, coordinate: Coordinate) -> Result<f64> {
    let k = fit.spec.coordinate_index(coordinate)?;
    let var = lrv.omega_u_dot_v * fit.scaled_inverse_gram_diag[k];
    if !(var > 0.0) {
        return Err(GcprError::Degenerate(format!(
            "non-positive variance {var} for the FM-OLS t statistic"
        )));
    }
    Ok(fit.scaled_coef[k] / var.sqrt())
}

/// t statistic for `phi_{i,j}` (zero-based regressor, 1-based power).
pub fn fmols_t_stat_phi(fit: &FmolsFit, lrv: &LrvSet, regressor: usize, power: usize) -> Result<f64> {
    fmols_t_stat(fit, lrv, Coordinate::Phi { regressor, power })
}
