//! Simulation-based inference.
//!
//! Each draw approximates the limiting distribution of the scaled estimator:
//! Gaussian innovations with covariance `Omega` drive a simulated regressor
//! path, and
//!
//! `J = {G'^{-1} [sum f f'] G^{-1}}^{-1} {G'^{-1} [sum f mu_n] + B}`
//!
//! with `G = G(gamma_hat, N)`. Draws are computed in the normalized form
//! `h_n = G'^{-1} f_n`, whose entries are `tau (n/N)^theta ln(n/N) / sqrt(N)`,
//! `(n/N)^theta / sqrt(N)` and `(chi_n / sqrt(N))^j / sqrt(N)`, which keeps the
//! moment matrix well conditioned. Deviations `G(gamma_hat, T)^{-1} J` are
//! then on the scale of the estimates.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{GcprError, Result};
use crate::linalg::psd_root;
use crate::lrv::LrvSet;
use crate::model::{scaling_matrices, ModelSpec, ParamVector};
use crate::nls::GcprFit;
use crate::rng::{retry_stream, stream_rng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    /// Number of draws `J`.
    pub draws: usize,
    /// Simulated path length `N`; `None` means `N = T`.
    pub path_len: Option<usize>,
    pub alpha: f64,
    pub seed: u64,
    /// `N = floor(kappa * T^rate)` when both are set (overrides `path_len`).
    pub kappa: Option<f64>,
    pub rate: Option<f64>,
    /// Lower bound on the trend powers used to validate `rate`
    /// (`rate <= min(1, 1 + 2 theta_tilde)`).
    pub theta_tilde: Option<f64>,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            draws: 999,
            path_len: None,
            alpha: 0.05,
            seed: 0,
            kappa: None,
            rate: None,
            theta_tilde: None,
        }
    }
}

pub const MAX_RETRIES: u64 = 3;
/// Share of failed draws above which a run is aborted.
pub const MAX_FAILURE_SHARE: f64 = 0.01;

impl SimConfig {
    pub fn with_draws(draws: usize, seed: u64) -> Self {
        Self {
            draws,
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.draws < 2 {
            return Err(GcprError::InvalidInput(format!(
                "at least two draws are required, got {}",
                self.draws
            )));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(GcprError::InvalidInput(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        if let Some(rate) = self.rate {
            if !(rate > 0.0 && rate <= 1.0) {
                return Err(GcprError::InvalidInput(format!(
                    "path-length rate must lie in (0, 1], got {rate}"
                )));
            }
            if let Some(tt) = self.theta_tilde {
                if !(tt > -0.5) || rate > 1.0 + 2.0 * tt {
                    return Err(GcprError::InvalidInput(format!(
                        "path-length rate {rate} exceeds 1 + 2 * {tt}"
                    )));
                }
            }
        }
        if let Some(k) = self.kappa {
            if !(k > 0.0) {
                return Err(GcprError::InvalidInput(format!("kappa must be positive, got {k}")));
            }
        }
        Ok(())
    }

    /// Path length for a sample of `t_len` observations.
    pub fn resolve_path_len(&self, t_len: usize) -> usize {
        match (self.kappa, self.rate) {
            (Some(k), Some(r)) => (k * (t_len as f64).powf(r)).floor() as usize,
            _ => self.path_len.unwrap_or(t_len),
        }
    }
}

/// Precomputed pieces shared by all draws of one run.
pub struct DrawContext {
    spec: ModelSpec,
    n: usize,
    /// `N x (d_free + d)` normalized trend rows.
    trend_rows: DMatrix<f64>,
    /// Sum of outer products of the trend rows.
    trend_gram: DMatrix<f64>,
    omega_root: DMatrix<f64>,
    delta_minus_vu: DVector<f64>,
}

impl DrawContext {
    pub fn new(spec: &ModelSpec, params: &ParamVector, lrv: &LrvSet, n: usize) -> Result<Self> {
        if lrv.m() != spec.n_regressors() {
            return Err(GcprError::DimensionMismatch(format!(
                "long-run covariance is for {} regressors, model has {}",
                lrv.m(),
                spec.n_regressors()
            )));
        }
        if n < 2 {
            return Err(GcprError::InvalidInput(format!("path length {n} is too short")));
        }
        let free = spec.free_indices();
        let nf = free.len();
        let d = spec.n_trends();
        let nn = n as f64;
        let root = nn.sqrt();
        let mut trend_rows = DMatrix::zeros(n, nf + d);
        for step in 1..=n {
            let r = step as f64 / nn;
            let ln_r = r.ln();
            for (c, &th) in params.theta.iter().enumerate() {
                let pw = if th == 0.0 { 1.0 } else { r.powf(th) };
                trend_rows[(step - 1, nf + c)] = pw / root;
            }
            for (c, &i) in free.iter().enumerate() {
                let pw = r.powf(params.theta[i]);
                trend_rows[(step - 1, c)] = params.tau[i] * pw * ln_r / root;
            }
        }
        let trend_gram = trend_rows.transpose() * &trend_rows;
        Ok(Self {
            spec: spec.clone(),
            n,
            trend_rows,
            trend_gram,
            omega_root: psd_root(&lrv.omega)?,
            delta_minus_vu: lrv.delta_minus_vu(),
        })
    }

    pub fn path_len(&self) -> usize {
        self.n
    }

    fn dim(&self) -> usize {
        self.trend_rows.ncols() + self.spec.n_poly()
    }

    /// One draw of `J` from the given generator.
    pub fn draw(&self, rng: &mut ChaCha8Rng) -> Result<DVector<f64>> {
        let m = self.spec.n_regressors();
        let kt = self.trend_rows.ncols();
        let k = self.dim();
        let p = self.spec.n_poly();
        let nn = self.n as f64;
        let root = nn.sqrt();

        let mut a = DMatrix::zeros(k, k);
        a.view_mut((0, 0), (kt, kt)).copy_from(&self.trend_gram);
        let mut b = DVector::zeros(k);
        let mut chi = vec![0.0; m];
        let mut e = DVector::zeros(m + 1);
        let mut h = DVector::zeros(k);
        // Running sums of (chi/sqrt N)^{j-1} for the bias vectors.
        let max_order = self.spec.regressor_orders.iter().copied().max().unwrap_or(0);
        let mut power_sums = vec![vec![0.0; max_order]; m];

        for step in 0..self.n {
            for v in e.iter_mut() {
                *v = rng.sample(StandardNormal);
            }
            let w = &self.omega_root * &e;
            let mu = w[0];
            for i in 0..m {
                chi[i] += w[i + 1];
            }
            for c in 0..kt {
                h[c] = self.trend_rows[(step, c)];
            }
            let mut col = kt;
            for (i, &order) in self.spec.regressor_orders.iter().enumerate() {
                let s = chi[i] / root;
                let mut pw = 1.0;
                for j in 0..order {
                    power_sums[i][j] += pw;
                    pw *= s;
                    h[col] = pw / root;
                    col += 1;
                }
            }
            b.axpy(mu, &h, 1.0);
            if p > 0 {
                // Trend block of the Gram matrix is precomputed.
                for r in 0..k {
                    for c in kt.max(r)..k {
                        a[(r, c)] += h[r] * h[c];
                    }
                }
            }
        }
        for r in 0..k {
            for c in kt.max(r)..k {
                a[(c, r)] = a[(r, c)];
            }
        }
        let mut col = kt;
        for (i, &order) in self.spec.regressor_orders.iter().enumerate() {
            for j in 0..order {
                b[col] += (j + 1) as f64 * power_sums[i][j] / nn * self.delta_minus_vu[i];
                col += 1;
            }
        }
        let chol = a
            .cholesky()
            .ok_or_else(|| GcprError::Degenerate("simulated moment matrix is singular".into()))?;
        let j = chol.solve(&b);
        if j.iter().any(|v| !v.is_finite()) {
            return Err(GcprError::NonFinite("simulated draw".into()));
        }
        Ok(j)
    }
}

/// One simulated draw on stream `stream` of `seed`.
pub fn simulate_draw(fit: &GcprFit, lrv: &LrvSet, n: usize, seed: u64, stream: u64) -> Result<DVector<f64>> {
    let ctx = DrawContext::new(&fit.spec, &fit.params, lrv, n)?;
    ctx.draw(&mut stream_rng(seed, stream))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimDraws {
    pub labels: Vec<String>,
    /// `J x k` draws of the scaled limit.
    pub draws: DMatrix<f64>,
    /// `J x k` deviations `G(gamma_hat, T)^{-1} J` on the estimate scale.
    pub deviations: DMatrix<f64>,
    /// `Delta^-_vu` entering the bias terms.
    pub delta_minus_vu: Vec<f64>,
    pub path_len: usize,
    pub horizon: usize,
    /// Draws that needed a fresh stream.
    pub retried: usize,
    pub config: SimConfig,
}

/// `J` draws with per-draw streams, mapped to deviations at horizon `T`.
pub fn run_sim_inference(fit: &GcprFit, lrv: &LrvSet, config: &SimConfig) -> Result<SimDraws> {
    config.validate()?;
    let t_len = fit.residuals.len();
    let n = config.resolve_path_len(t_len);
    let ctx = DrawContext::new(&fit.spec, &fit.params, lrv, n)?;
    let scaling = scaling_matrices(&fit.spec, &fit.params.theta, &fit.params.tau, t_len as f64)?;

    let results: Vec<Option<(DVector<f64>, bool)>> = (0..config.draws as u64)
        .into_par_iter()
        .map(|j| {
            for attempt in 0..=MAX_RETRIES {
                let mut rng = stream_rng(config.seed, retry_stream(j, attempt));
                if let Ok(v) = ctx.draw(&mut rng) {
                    return Some((v, attempt > 0));
                }
            }
            None
        })
        .collect();
    let failed = results.iter().filter(|r| r.is_none()).count();
    if failed as f64 > MAX_FAILURE_SHARE * config.draws as f64 {
        return Err(GcprError::Degenerate(format!(
            "{failed} of {} simulated draws failed",
            config.draws
        )));
    }
    let ok: Vec<(DVector<f64>, bool)> = results.into_iter().flatten().collect();
    let k = ctx.dim();
    let rows = ok.len();
    let mut draws = DMatrix::zeros(rows, k);
    let mut deviations = DMatrix::zeros(rows, k);
    for (r, (v, _)) in ok.iter().enumerate() {
        draws.row_mut(r).copy_from(&v.transpose());
        deviations.row_mut(r).copy_from(&scaling.apply_inverse(v).transpose());
    }
    Ok(SimDraws {
        labels: fit.spec.param_labels(),
        draws,
        deviations,
        delta_minus_vu: lrv.delta_minus_vu().iter().copied().collect(),
        path_len: n,
        horizon: t_len,
        retried: ok.iter().filter(|(_, r)| *r).count(),
        config: config.clone(),
    })
}

/// Type-7 sample quantile (linear interpolation of order statistics).
pub fn quantile_type7(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Inverse of the type-7 quantile function: the piecewise-linear empirical
/// distribution function.
pub fn ecdf_type7(sorted: &[f64], s: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return if s < sorted[0] { 0.0 } else { 1.0 };
    }
    if s <= sorted[0] {
        return 0.0;
    }
    if s >= sorted[n - 1] {
        return 1.0;
    }
    let i = sorted.partition_point(|&x| x <= s) - 1;
    let frac = if sorted[i + 1] > sorted[i] {
        (s - sorted[i]) / (sorted[i + 1] - sorted[i])
    } else {
        0.0
    };
    (i as f64 + frac) / (n - 1) as f64
}

fn sorted_column(draws: &SimDraws, k: usize) -> Result<Vec<f64>> {
    if k >= draws.deviations.ncols() {
        return Err(GcprError::InvalidInput(format!(
            "coordinate {k} out of range ({} parameters)",
            draws.deviations.ncols()
        )));
    }
    let mut col: Vec<f64> = draws.deviations.column(k).iter().copied().collect();
    col.sort_by(|a, b| a.total_cmp(b));
    Ok(col)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceInterval {
    pub label: String,
    pub estimate: f64,
    pub lower: f64,
    pub upper: f64,
    /// Lower endpoint was raised to the parameter-space bound.
    pub truncated: bool,
}

/// Equal-tailed interval `[g - q_{1-a/2}(delta), g - q_{a/2}(delta)]` for
/// coordinate `k` of `(theta_free, tau, phi)`. `floor`, when given, truncates
/// the lower endpoint.
pub fn confidence_interval(
    draws: &SimDraws,
    fit: &GcprFit,
    k: usize,
    alpha: f64,
    floor: Option<f64>,
) -> Result<ConfidenceInterval> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(GcprError::InvalidInput(format!(
            "alpha must lie in (0, 1), got {alpha}"
        )));
    }
    let col = sorted_column(draws, k)?;
    let estimate = fit.params.stacked(&fit.spec)[k];
    let mut lower = estimate - quantile_type7(&col, 1.0 - alpha / 2.0);
    let upper = estimate - quantile_type7(&col, alpha / 2.0);
    let mut truncated = false;
    if let Some(f) = floor {
        if lower < f {
            lower = f;
            truncated = true;
        }
    }
    Ok(ConfidenceInterval {
        label: draws.labels.get(k).cloned().unwrap_or_default(),
        estimate,
        lower,
        upper,
        truncated,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sides {
    TwoSided,
    /// Alternative: parameter below the null value.
    Less,
    /// Alternative: parameter above the null value.
    Greater,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientTest {
    pub label: String,
    pub null_value: f64,
    /// `gamma_hat - null_value`.
    pub statistic: f64,
    pub p_value: f64,
    pub alpha: f64,
    pub reject: bool,
    pub sides: Sides,
}

/// Test `H0: gamma_k = null_value` against the simulated distribution of
/// `gamma_hat - gamma_0`.
pub fn test_coefficient(
    draws: &SimDraws,
    fit: &GcprFit,
    k: usize,
    null_value: f64,
    sides: Sides,
    alpha: f64,
) -> Result<CoefficientTest> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(GcprError::InvalidInput(format!(
            "alpha must lie in (0, 1), got {alpha}"
        )));
    }
    let col = sorted_column(draws, k)?;
    let s = fit.params.stacked(&fit.spec)[k] - null_value;
    let f = ecdf_type7(&col, s);
    let (p_value, reject) = match sides {
        Sides::TwoSided => (
            (2.0 * f.min(1.0 - f)).min(1.0),
            s > quantile_type7(&col, 1.0 - alpha / 2.0) || s < quantile_type7(&col, alpha / 2.0),
        ),
        Sides::Greater => (1.0 - f, s > quantile_type7(&col, 1.0 - alpha)),
        Sides::Less => (f, s < quantile_type7(&col, alpha)),
    };
    Ok(CoefficientTest {
        label: draws.labels.get(k).cloned().unwrap_or_default(),
        null_value,
        statistic: s,
        p_value,
        alpha,
        reject,
        sides,
    })
}

/// Significance stars in the usual 10/5/1 percent convention.
pub fn stars(p_value: f64) -> &'static str {
    if p_value < 0.01 {
        "***"
    } else if p_value < 0.05 {
        "**"
    } else if p_value < 0.10 {
        "*"
    } else {
        ""
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn type7_quantiles() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(quantile_type7(&x, 0.5), 3.0);
        assert!((quantile_type7(&x, 0.1) - 1.4).abs() < 1e-15);
        assert!((ecdf_type7(&x, 1.4) - 0.1).abs() < 1e-15);
        assert_eq!(ecdf_type7(&x, 0.0), 0.0);
        assert_eq!(ecdf_type7(&x, 9.0), 1.0);
        for p in [0.025, 0.3, 0.77, 0.975] {
            assert!((ecdf_type7(&x, quantile_type7(&x, p)) - p).abs() < 1e-12);
        }
    }

    #[test]
    fn stars_convention() {
        assert_eq!(stars(0.001), "***");
        assert_eq!(stars(0.03), "**");
        assert_eq!(stars(0.07), "*");
        assert_eq!(stars(0.5), "");
    }

    #[test]
    fn config_path_length_rule() {
        let mut c = SimConfig::default();
        assert_eq!(c.resolve_path_len(150), 150);
        c.kappa = Some(2.0);
        c.rate = Some(0.5);
        assert_eq!(c.resolve_path_len(100), 20);
        c.theta_tilde = Some(-0.4);
        assert!(c.validate().is_err());
    }
}
