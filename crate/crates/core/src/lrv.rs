//! Kernel estimators of the long-run covariance matrices of
//! `V_t = [u_t, dx_t']'`.
//!
//! Lag autocovariances are `Gamma_h = n^-1 sum_t V_t V_{t+h}'`, matching the
//! population one-sided matrix `Delta = sum_{h>=0} E[V_t V_{t+h}']`, so that
//! `Delta_vu` collects `E[v_t u_{t+h}]` (current regressor shocks, future
//! errors).

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{GcprError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Kernel {
    Bartlett,
    Parzen,
    QuadraticSpectral,
}

impl fmt::Display for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Kernel::Bartlett => "bartlett",
            Kernel::Parzen => "parzen",
            Kernel::QuadraticSpectral => "qs",
        })
    }
}

impl FromStr for Kernel {
    type Err = GcprError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bartlett" => Ok(Kernel::Bartlett),
            "parzen" => Ok(Kernel::Parzen),
            "qs" | "quadratic-spectral" | "quadraticspectral" => Ok(Kernel::QuadraticSpectral),
            other => Err(GcprError::InvalidInput(format!("unknown kernel `{other}`"))),
        }
    }
}

impl Kernel {
    /// Whether `k(x) = 0` for `x >= 1`.
    fn truncated(self) -> bool {
        !matches!(self, Kernel::QuadraticSpectral)
    }
}

/// Kernel weight `k(x)` for `x >= 0` (negative arguments are reflected).
pub fn kernel_weight(kernel: Kernel, x: f64) -> f64 {
    let x = x.abs();
    match kernel {
        Kernel::Bartlett => (1.0 - x).max(0.0),
        Kernel::Parzen => {
            if x <= 0.5 {
                1.0 - 6.0 * x * x + 6.0 * x * x * x
            } else if x <= 1.0 {
                2.0 * (1.0 - x).powi(3)
            } else {
                0.0
            }
        }
        Kernel::QuadraticSpectral => {
            let z = 6.0 * std::f64::consts::PI * x / 5.0;
            if x < 1e-4 {
                let z2 = z * z;
                1.0 - z2 / 10.0 + z2 * z2 / 280.0
            } else {
                25.0 / (12.0 * std::f64::consts::PI.powi(2) * x * x) * (z.sin() / z - z.cos())
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Bandwidth {
    /// AR(1) plug-in rule.
    Auto,
    Fixed(f64),
}

/// Where the `V_t` series starts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum SeriesStart {
    /// `t = 2..T`; `x_0` is unobserved.
    #[default]
    Second,
    /// `t = 1..T` with `dx_1 = x_1` (known zero initial value).
    First,
}

/// Estimated (or injected) long-run covariance matrices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LrvSet {
    pub sigma: DMatrix<f64>,
    pub delta: DMatrix<f64>,
    pub omega: DMatrix<f64>,
    pub delta_minus: DMatrix<f64>,
    pub omega_u_dot_v: f64,
    pub kernel: Option<Kernel>,
    pub bandwidth: Option<f64>,
    /// Set when a requested fixed bandwidth exceeded the sample and was cut.
    pub bandwidth_truncated: bool,
    pub source: SeriesStart,
}

impl LrvSet {
    /// Assemble from `Sigma` and `Delta`; `Omega` and `Delta^-` follow.
    pub fn from_parts(sigma: DMatrix<f64>, delta: DMatrix<f64>) -> Result<Self> {
        if sigma.shape() != delta.shape() || !sigma.is_square() || sigma.nrows() == 0 {
            return Err(GcprError::DimensionMismatch(format!(
                "sigma {:?} and delta {:?} must be equal square matrices",
                sigma.shape(),
                delta.shape()
            )));
        }
        if sigma.iter().chain(delta.iter()).any(|v| !v.is_finite()) {
            return Err(GcprError::NonFinite("long-run covariance".into()));
        }
        let omega = &delta + delta.transpose() - &sigma;
        let delta_minus = &sigma - delta.transpose();
        let omega_u_dot_v = conditional_variance(&omega)?;
        Ok(Self {
            sigma,
            delta,
            omega,
            delta_minus,
            omega_u_dot_v,
            kernel: None,
            bandwidth: None,
            bandwidth_truncated: false,
            source: SeriesStart::Second,
        })
    }

    /// Number of integrated regressors.
    pub fn m(&self) -> usize {
        self.sigma.nrows() - 1
    }

    pub fn omega_uu(&self) -> f64 {
        self.omega[(0, 0)]
    }

    /// `Omega_vu` (m-vector).
    pub fn omega_vu(&self) -> DVector<f64> {
        self.omega.view((1, 0), (self.m(), 1)).column(0).into_owned()
    }

    pub fn omega_vv(&self) -> DMatrix<f64> {
        let m = self.m();
        self.omega.view((1, 1), (m, m)).into_owned()
    }

    pub fn delta_vu(&self) -> DVector<f64> {
        self.delta.view((1, 0), (self.m(), 1)).column(0).into_owned()
    }

    pub fn delta_vv(&self) -> DMatrix<f64> {
        let m = self.m();
        self.delta.view((1, 1), (m, m)).into_owned()
    }

    pub fn delta_minus_vu(&self) -> DVector<f64> {
        self.delta_minus.view((1, 0), (self.m(), 1)).column(0).into_owned()
    }

    /// `Omega_vv^{-1} Omega_vu`, the coefficient of the endogeneity correction.
    pub fn endogeneity_coefficients(&self) -> Result<DVector<f64>> {
        if self.m() == 0 {
            return Ok(DVector::zeros(0));
        }
        let chol = self
            .omega_vv()
            .cholesky()
            .ok_or_else(|| GcprError::NotPositiveDefinite("long-run covariance of the regressor shocks".into()))?;
        Ok(chol.solve(&self.omega_vu()))
    }

    /// `Delta^+_vu = Delta_vu - Delta_vv Omega_vv^{-1} Omega_vu`.
    pub fn delta_plus_vu(&self) -> Result<DVector<f64>> {
        Ok(self.delta_vu() - self.delta_vv() * self.endogeneity_coefficients()?)
    }
}

fn conditional_variance(omega: &DMatrix<f64>) -> Result<f64> {
    let m = omega.nrows() - 1;
    if m == 0 {
        return Ok(omega[(0, 0)]);
    }
    let vv = omega.view((1, 1), (m, m)).into_owned();
    let vu = omega.view((1, 0), (m, 1)).column(0).into_owned();
    let chol = vv
        .cholesky()
        .ok_or_else(|| GcprError::NotPositiveDefinite("long-run covariance of the regressor shocks".into()))?;
    Ok(omega[(0, 0)] - vu.dot(&chol.solve(&vu)))
}

/// `V_t = [u_t, dx_t']'` as an `n x (m+1)` matrix.
pub fn vector_series(residuals: &[f64], data: &Dataset, start: SeriesStart) -> Result<DMatrix<f64>> {
    let t_len = data.len();
    if residuals.len() != t_len {
        return Err(GcprError::DimensionMismatch(format!(
            "{} residuals for {} observations",
            residuals.len(),
            t_len
        )));
    }
    let first = match start {
        SeriesStart::Second => 1,
        SeriesStart::First => 0,
    };
    let n = t_len - first;
    let m = data.n_regressors();
    Ok(DMatrix::from_fn(n, m + 1, |r, c| {
        let t = r + first;
        if c == 0 {
            residuals[t]
        } else {
            let x = &data.x[c - 1];
            x[t] - if t == 0 { 0.0 } else { x[t - 1] }
        }
    }))
}

/// `V_t` from fitted residuals, `t = 2..T`.
pub fn residual_vector_series(fit: &crate::nls::GcprFit, data: &Dataset) -> Result<DMatrix<f64>> {
    vector_series(&fit.residuals, data, SeriesStart::Second)
}

/// `n^-1 sum_t V_t V_{t+h}'`.
pub fn autocovariance(v: &DMatrix<f64>, h: usize) -> DMatrix<f64> {
    let (n, k) = v.shape();
    let mut g = DMatrix::zeros(k, k);
    if h >= n {
        return g;
    }
    let lead = v.rows(h, n - h);
    let lag = v.rows(0, n - h);
    g.gemm_tr(1.0 / n as f64, &lag, &lead, 0.0);
    g
}

/// Largest autoregressive coefficient magnitude admitted by the plug-in rule.
pub const RHO_CLIP: f64 = 0.97;

/// Andrews (1991) AR(1) plug-in bandwidth with unit weights, floored at 1
/// and capped at `n/2`.
pub fn andrews_bandwidth(v: &DMatrix<f64>, kernel: Kernel) -> Result<f64> {
    let (n, k) = v.shape();
    if n < 8 {
        return Err(GcprError::InvalidInput(format!(
            "bandwidth selection needs at least 8 observations, got {n}"
        )));
    }
    let (mut num1, mut num2, mut den) = (0.0, 0.0, 0.0);
    for c in 0..k {
        let col = v.column(c);
        let (mut sxy, mut sxx) = (0.0, 0.0);
        for t in 1..n {
            sxy += col[t] * col[t - 1];
            sxx += col[t - 1] * col[t - 1];
        }
        if sxx == 0.0 {
            continue;
        }
        let rho = (sxy / sxx).clamp(-RHO_CLIP, RHO_CLIP);
        let s2 = (1..n).map(|t| (col[t] - rho * col[t - 1]).powi(2)).sum::<f64>() / (n - 1) as f64;
        let s4 = s2 * s2;
        num1 += 4.0 * rho * rho * s4 / ((1.0 - rho).powi(6) * (1.0 + rho).powi(2));
        num2 += 4.0 * rho * rho * s4 / (1.0 - rho).powi(8);
        den += s4 / (1.0 - rho).powi(4);
    }
    let nf = n as f64;
    let b = if den > 0.0 {
        match kernel {
            Kernel::Bartlett => 1.1447 * (num1 / den * nf).powf(1.0 / 3.0),
            Kernel::Parzen => 2.6614 * (num2 / den * nf).powf(0.2),
            Kernel::QuadraticSpectral => 1.3221 * (num2 / den * nf).powf(0.2),
        }
    } else {
        1.0
    };
    Ok(b.max(1.0).min(0.5 * nf))
}

/// Kernel estimates of `Sigma`, `Delta`, `Omega`, `Delta^-` and
/// `Omega_{u.v}` from an `n x (m+1)` series.
pub fn estimate_lrv(v: &DMatrix<f64>, kernel: Kernel, bandwidth: Bandwidth) -> Result<LrvSet> {
    let n = v.nrows();
    if n < 8 {
        return Err(GcprError::InvalidInput(format!(
            "long-run variance estimation needs at least 8 observations, got {n}"
        )));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(GcprError::NonFinite("long-run variance input series".into()));
    }
    let (b, truncated) = match bandwidth {
        Bandwidth::Auto => (andrews_bandwidth(v, kernel)?, false),
        Bandwidth::Fixed(b) => {
            if !(b > 0.0) || !b.is_finite() {
                return Err(GcprError::InvalidInput(format!("bandwidth must be positive, got {b}")));
            }
            let cap = (n - 1) as f64;
            if b > cap {
                (cap, true)
            } else {
                (b, false)
            }
        }
    };
    let max_lag = if kernel.truncated() {
        // k(i/b) = 0 once i >= b.
        ((b.ceil() as usize).saturating_sub(1)).min(n - 1)
    } else {
        n - 1
    };
    let sigma = autocovariance(v, 0);
    let lags: Vec<DMatrix<f64>> = (1..=max_lag)
        .into_par_iter()
        .map(|h| autocovariance(v, h) * kernel_weight(kernel, h as f64 / b))
        .collect();
    let mut delta = sigma.clone();
    for g in &lags {
        delta += g;
    }
    let mut set = LrvSet::from_parts(sigma, delta)?;
    set.kernel = Some(kernel);
    set.bandwidth = Some(b);
    set.bandwidth_truncated = truncated;
    Ok(set)
}
