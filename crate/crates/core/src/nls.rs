//! Concentrated nonlinear least squares.
//!
//! For fixed trend powers the model is linear, so `(tau, phi)` are profiled out
//! by OLS and only the residual sum of squares `RSS(theta)` is minimized over
//! the free powers: a grid scan followed by golden-section refinement inside
//! the winning grid cell (one free power), or a multistart Nelder-Mead (several
//! free powers).

use nalgebra::DVector;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{GcprError, Result};
use crate::linalg::least_squares;
use crate::model::{validate_theta, DesignBuilder, ModelSpec, ParamVector, TrendTerm};
use crate::optimize::{golden_section, nelder_mead};

/// Linear coefficients and residuals at fixed trend powers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OlsFit {
    pub tau: Vec<f64>,
    pub phi: Vec<f64>,
    pub residuals: Vec<f64>,
    pub rss: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfilePoint {
    pub theta: f64,
    pub rss: f64,
}

/// Render a profile as `theta,rss` CSV.
pub fn profile_csv(points: &[ProfilePoint]) -> String {
    let mut out = String::from("theta,rss\n");
    for p in points {
        out.push_str(&format!("{},{}\n", p.theta, p.rss));
    }
    out
}

/// Number of strict interior local minima of a sampled curve.
pub fn interior_minima(points: &[ProfilePoint]) -> usize {
    points
        .windows(3)
        .filter(|w| w[1].rss < w[0].rss && w[1].rss < w[2].rss)
        .count()
}

/// The concentrated problem for one dataset: builds designs and solves the
/// inner OLS for any trend-power vector.
pub struct Concentrated<'a> {
    spec: &'a ModelSpec,
    builder: DesignBuilder<'a>,
    y: DVector<f64>,
}

impl<'a> Concentrated<'a> {
    pub fn new(spec: &'a ModelSpec, data: &Dataset) -> Result<Self> {
        Ok(Self {
            spec,
            builder: DesignBuilder::new(spec, data)?,
            y: DVector::from_column_slice(&data.y),
        })
    }

    /// OLS at the given (full) trend powers.
    pub fn solve(&self, theta: &[f64]) -> Result<OlsFit> {
        let design = self.builder.build(theta)?;
        let ls = least_squares(&design.matrix, &self.y)?;
        let coef = design.unscale_coefficients(&ls.coef);
        let d = self.spec.n_trends();
        Ok(OlsFit {
            tau: coef.rows(0, d).iter().copied().collect(),
            phi: coef.rows(d, coef.len() - d).iter().copied().collect(),
            residuals: ls.residuals.iter().copied().collect(),
            rss: ls.rss,
        })
    }

    /// Concentrated RSS; rank-deficient points map to `+inf`.
    pub fn rss(&self, theta: &[f64]) -> Result<f64> {
        match self.solve(theta) {
            Ok(f) => Ok(f.rss),
            Err(GcprError::RankDeficient { .. }) => Ok(f64::INFINITY),
            Err(e) => Err(e),
        }
    }

    fn rss_free(&self, free: &[f64]) -> Result<f64> {
        self.rss(&self.spec.full_powers(free)?)
    }
}

/// OLS of `y` on `z(theta)`; the exact minimizer of the criterion for fixed
/// powers.
pub fn ols_given_theta(spec: &ModelSpec, data: &Dataset, theta: &[f64]) -> Result<OlsFit> {
    Concentrated::new(spec, data)?.solve(theta)
}

/// Grid used to profile a single free trend power.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub step: f64,
    /// Overrides the parameter-space bounds (clipped to them).
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    /// Explicit grid points; replaces the regular grid when set.
    pub points: Option<Vec<f64>>,
    /// Golden-section stopping width.
    pub refine_tol: f64,
    pub keep_profile: bool,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            step: 0.01,
            lower: None,
            upper: None,
            points: None,
            refine_tol: 1e-6,
            keep_profile: false,
        }
    }
}

impl GridSpec {
    pub fn with_profile(mut self) -> Self {
        self.keep_profile = true;
        self
    }

    pub fn on(points: Vec<f64>) -> Self {
        Self {
            points: Some(points),
            ..Self::default()
        }
    }

    pub fn between(lower: f64, upper: f64, step: f64) -> Self {
        Self {
            step,
            lower: Some(lower),
            upper: Some(upper),
            ..Self::default()
        }
    }

    /// Candidate values for the free power, before feasibility filtering.
    fn candidates(&self, spec: &ModelSpec) -> Result<Vec<f64>> {
        let lo = self.lower.unwrap_or(spec.space.lower).max(spec.space.lower);
        let hi = self.upper.unwrap_or(spec.space.upper).min(spec.space.upper);
        let mut pts = match &self.points {
            Some(p) => p.clone(),
            None => {
                if !(self.step > 0.0) {
                    return Err(GcprError::InvalidInput(format!(
                        "grid step must be positive, got {}",
                        self.step
                    )));
                }
                let n = ((hi - lo) / self.step + 1e-9).floor();
                if !(n >= 0.0) {
                    return Ok(Vec::new());
                }
                (0..=n as usize)
                    .map(|i| ((lo + i as f64 * self.step) * 1e10).round() / 1e10)
                    .collect()
            }
        };
        if pts.iter().any(|p| !p.is_finite()) {
            return Err(GcprError::InvalidInput("grid contains non-finite values".into()));
        }
        pts.sort_by(|a, b| a.total_cmp(b));
        pts.dedup();
        Ok(pts)
    }
}

/// Result of the concentrated NLS fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GcprFit {
    pub spec: ModelSpec,
    pub params: ParamVector,
    pub residuals: Vec<f64>,
    pub rss: f64,
    pub theta_profile: Option<Vec<ProfilePoint>>,
    pub converged: bool,
    /// Interval searched by the refinement step.
    pub bracket: Option<[f64; 2]>,
    pub evaluations: usize,
}

impl GcprFit {
    fn from_ols(spec: &ModelSpec, theta: Vec<f64>, ols: OlsFit) -> Self {
        Self {
            spec: spec.clone(),
            params: ParamVector {
                theta,
                tau: ols.tau,
                phi: ols.phi,
            },
            residuals: ols.residuals,
            rss: ols.rss,
            theta_profile: None,
            converged: true,
            bracket: None,
            evaluations: 1,
        }
    }

    /// Estimated free powers.
    pub fn free_theta(&self) -> Vec<f64> {
        self.spec.free_powers(&self.params.theta)
    }
}

/// Does the open interval `(a, b)` intersect an excluded band around a fixed
/// power?
fn crosses_gap(spec: &ModelSpec, a: f64, b: f64) -> bool {
    let gap = spec.space.min_gap;
    spec.trends.iter().any(|t| match t {
        TrendTerm::Fixed(p) => p + gap > a && p - gap < b,
        TrendTerm::Free => false,
    })
}

/// Estimate a GCPR with at most one free trend power: grid scan, then
/// golden-section refinement inside the bracketing grid cell.
pub fn fit_gcpr(spec: &ModelSpec, data: &Dataset, grid: &GridSpec) -> Result<GcprFit> {
    let problem = Concentrated::new(spec, data)?;
    match spec.n_free() {
        0 => {
            let theta = spec.full_powers(&[])?;
            let ols = problem.solve(&theta)?;
            Ok(GcprFit::from_ols(spec, theta, ols))
        }
        1 => fit_single_free(spec, &problem, grid),
        n => Err(GcprError::InvalidInput(format!(
            "grid estimation handles one free trend power, the model has {n}; use fit_gcpr_multistart"
        ))),
    }
}

fn fit_single_free(spec: &ModelSpec, problem: &Concentrated<'_>, grid: &GridSpec) -> Result<GcprFit> {
    let feasible: Vec<f64> = grid
        .candidates(spec)?
        .into_iter()
        .filter(|&th| {
            spec.full_powers(&[th])
                .map(|full| validate_theta(spec, &full).is_empty())
                .unwrap_or(false)
        })
        .collect();
    if feasible.is_empty() {
        return Err(GcprError::EmptyGrid(
            "no grid point lies inside the parameter space".into(),
        ));
    }
    let rss: Vec<f64> = feasible
        .par_iter()
        .map(|&th| problem.rss_free(&[th]))
        .collect::<Result<Vec<_>>>()?;
    if rss.iter().any(|v| v.is_nan()) {
        return Err(GcprError::NonFinite("residual sum of squares on the grid".into()));
    }
    let mut best = 0;
    for (i, &v) in rss.iter().enumerate() {
        if v < rss[best] {
            best = i;
        }
    }
    if !rss[best].is_finite() {
        return Err(GcprError::RankDeficient { column: 0 });
    }

    let centre = feasible[best];
    let left = if best > 0 && !crosses_gap(spec, feasible[best - 1], centre) {
        feasible[best - 1]
    } else {
        centre
    };
    let right = if best + 1 < feasible.len() && !crosses_gap(spec, centre, feasible[best + 1]) {
        feasible[best + 1]
    } else {
        centre
    };
    let refined = golden_section(
        |th| problem.rss_free(&[th]),
        left,
        right,
        (centre, rss[best]),
        grid.refine_tol,
    )?;
    let theta = spec.full_powers(&[refined.x])?;
    let ols = problem.solve(&theta)?;
    let mut fit = GcprFit::from_ols(spec, theta, ols);
    fit.bracket = Some([left, right]);
    fit.converged = refined.width <= grid.refine_tol || left == right;
    fit.evaluations = feasible.len() + refined.evaluations + 1;
    if grid.keep_profile {
        fit.theta_profile = Some(
            feasible
                .iter()
                .zip(&rss)
                .map(|(&theta, &rss)| ProfilePoint { theta, rss })
                .collect(),
        );
    }
    Ok(fit)
}

/// Latin-hypercube starts in `[lo, hi]^dim`.
fn latin_hypercube(dim: usize, n: usize, lo: f64, hi: f64, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut columns: Vec<Vec<f64>> = (0..dim)
        .map(|_| {
            let mut strata: Vec<usize> = (0..n).collect();
            strata.shuffle(rng);
            strata
                .into_iter()
                .map(|s| lo + (hi - lo) * (s as f64 + rng.gen::<f64>()) / n as f64)
                .collect()
        })
        .collect();
    (0..n).map(|i| columns.iter_mut().map(|c| c[i]).collect()).collect()
}

/// Estimate a GCPR with two or more free powers by Nelder-Mead on the
/// concentrated RSS from Latin-hypercube starts. Points outside the parameter
/// space evaluate to `+inf`.
pub fn fit_gcpr_multistart(spec: &ModelSpec, data: &Dataset, starts: usize, seed: u64) -> Result<GcprFit> {
    let d_free = spec.n_free();
    if d_free < 2 {
        return Err(GcprError::InvalidInput(format!(
            "multistart estimation needs at least two free powers, the model has {d_free}"
        )));
    }
    if starts == 0 {
        return Err(GcprError::InvalidInput("at least one start is required".into()));
    }
    let problem = Concentrated::new(spec, data)?;
    let objective = |free: &[f64]| -> f64 {
        let Ok(full) = spec.full_powers(free) else {
            return f64::INFINITY;
        };
        if !validate_theta(spec, &full).is_empty() {
            return f64::INFINITY;
        }
        match problem.rss(&full) {
            Ok(v) if v.is_finite() => v,
            _ => f64::INFINITY,
        }
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lo, hi) = (spec.space.lower, spec.space.upper);
    let points = latin_hypercube(d_free, starts, lo, hi, &mut rng);
    let step = 0.1 * (hi - lo);

    let results: Vec<_> = points
        .par_iter()
        .filter_map(|start| {
            let mut s = start.clone();
            s.sort_by(|a, b| a.total_cmp(b));
            objective(&s)
                .is_finite()
                .then(|| nelder_mead(objective, &s, step, 1e-10, 4000))
        })
        .collect();
    let best = results
        .into_iter()
        .filter(|r| r.fx.is_finite())
        .min_by(|a, b| a.fx.total_cmp(&b.fx))
        .ok_or_else(|| GcprError::Optimizer("all starting points are infeasible".into()))?;
    let theta = spec.full_powers(&best.x)?;
    let ols = problem.solve(&theta)?;
    let mut fit = GcprFit::from_ols(spec, theta, ols);
    fit.converged = best.converged;
    fit.evaluations = best.iterations;
    Ok(fit)
}

/// RSS profile of `y = tau1 + tau2 t + phi1 x + phi2 x^theta + u` over a grid
/// of theta values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StochasticPowerProfile {
    pub points: Vec<ProfilePoint>,
    /// Set when the regressor had non-positive values and `|x|^theta` was used.
    pub used_abs: bool,
}

/// Width of the excluded neighbourhood of `theta = 1` (where `x^theta`
/// duplicates the linear term).
pub const XPOW_EXCLUSION: f64 = 0.05;

pub fn rss_profile_stochastic_power(data: &Dataset, grid: &[f64]) -> Result<StochasticPowerProfile> {
    if data.n_regressors() != 1 {
        return Err(GcprError::InvalidInput(format!(
            "the flexible stochastic power profile needs exactly one regressor, got {}",
            data.n_regressors()
        )));
    }
    if grid.is_empty() {
        return Err(GcprError::EmptyGrid("no theta values supplied".into()));
    }
    if let Some(th) = grid
        .iter()
        .find(|th| !th.is_finite() || (*th - 1.0).abs() < XPOW_EXCLUSION)
    {
        return Err(GcprError::InvalidInput(format!(
            "grid value {th} lies within {XPOW_EXCLUSION} of 1 (collinear with x)"
        )));
    }
    let t_len = data.len();
    if t_len < 6 {
        return Err(GcprError::DimensionMismatch(format!(
            "sample length {t_len} is too short for a four-regressor profile"
        )));
    }
    let x = &data.x[0];
    let used_abs = x.iter().any(|&v| v <= 0.0);
    let scale = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return Err(GcprError::Degenerate("regressor is identically zero".into()));
    }
    let y = DVector::from_column_slice(&data.y);
    let tf = t_len as f64;
    let points = grid
        .par_iter()
        .map(|&theta| {
            let z = nalgebra::DMatrix::from_fn(t_len, 4, |t, c| match c {
                0 => 1.0,
                1 => (t + 1) as f64 / tf,
                2 => x[t] / scale,
                _ => (x[t].abs() / scale).powf(theta),
            });
            least_squares(&z, &y).map(|ls| ProfilePoint { theta, rss: ls.rss })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(StochasticPowerProfile { points, used_abs })
}

/// Concentrated RSS over a grid of values for the single free trend power.
/// Rank-deficient points get `rss = inf`; points outside the parameter space
/// are rejected.
pub fn rss_profile_trend(spec: &ModelSpec, data: &Dataset, grid: &[f64]) -> Result<Vec<ProfilePoint>> {
    if spec.n_free() != 1 {
        return Err(GcprError::InvalidInput(format!(
            "the trend-power profile needs exactly one free power, the model has {}",
            spec.n_free()
        )));
    }
    if grid.is_empty() {
        return Err(GcprError::EmptyGrid("no theta values supplied".into()));
    }
    let problem = Concentrated::new(spec, data)?;
    grid.iter()
        .map(|&theta| {
            let full = spec.full_powers(&[theta])?;
            if let Some(v) = validate_theta(spec, &full).first() {
                return Err(GcprError::InvalidTheta(format!("grid value {theta}: {v}")));
            }
            Ok(ProfilePoint {
                theta,
                rss: problem.rss(&full)?,
            })
        })
        .collect()
}

/// Residuals of an OLS regression of `series` on a constant and a linear trend.
pub fn detrend(series: &[f64]) -> Result<Vec<f64>> {
    let n = series.len();
    if n < 3 {
        return Err(GcprError::InvalidInput(format!(
            "detrending needs at least 3 observations, got {n}"
        )));
    }
    let nf = n as f64;
    let z = nalgebra::DMatrix::from_fn(n, 2, |t, c| if c == 0 { 1.0 } else { (t + 1) as f64 / nf });
    let ls = least_squares(&z, &DVector::from_column_slice(series))?;
    Ok(ls.residuals.iter().copied().collect())
}
