//! Model specification, parameter-space checks, design matrices and the
//! trend-dependent scaling matrices.
//!
//! A model is
//!
//! ```text
//! y_t = sum_i tau_i t^{theta_i} + sum_i sum_{j=1..p_i} phi_ij x_it^j + u_t
//! ```
//!
//! where some trend powers are fixed and the rest are estimated. All design
//! columns are stored rescaled, `(t/T)^theta` and `(x/sqrt(T))^j`, and the exact
//! unscaling factors `T^theta` and `T^{j/2}` are kept alongside so that reported
//! coefficients always refer to the raw regressors `t^theta` and `x^j`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{GcprError, Result};

/// Largest admissible `|power * ln(horizon)|` before a power is treated as an
/// overflow.
pub const MAX_LOG_POWER: f64 = 700.0;

/// Slack used when comparing trend powers against bounds and gaps, so that
/// grid points such as `0.05 + 90 * 0.01` are not rejected by rounding.
pub const THETA_TOL: f64 = 1e-9;

/// A deterministic trend `t^theta` with either a fixed or an estimated power.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrendTerm {
    Fixed(f64),
    Free,
}

impl TrendTerm {
    pub fn is_free(&self) -> bool {
        matches!(self, TrendTerm::Free)
    }
}

/// Bounds for the free trend powers and the minimal spacing between
/// consecutive powers (fixed or free).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamSpace {
    pub lower: f64,
    pub upper: f64,
    pub min_gap: f64,
}

impl Default for ParamSpace {
    fn default() -> Self {
        Self {
            lower: 0.05,
            upper: 10.0,
            min_gap: 0.05,
        }
    }
}

/// Which trends and which polynomial orders of the integrated regressors enter
/// the regression.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub trends: Vec<TrendTerm>,
    pub regressor_orders: Vec<usize>,
    pub space: ParamSpace,
}

impl ModelSpec {
    pub fn new(trends: Vec<TrendTerm>, regressor_orders: Vec<usize>, space: ParamSpace) -> Result<Self> {
        if trends.is_empty() && regressor_orders.is_empty() {
            return Err(GcprError::InvalidInput(
                "a model needs at least one trend or regressor".into(),
            ));
        }
        if let Some(pos) = regressor_orders.iter().position(|&p| p == 0) {
            return Err(GcprError::InvalidInput(format!(
                "polynomial order of regressor {} must be at least 1",
                pos + 1
            )));
        }
        if !(space.lower > -0.5) || !(space.upper > space.lower) || !space.upper.is_finite() {
            return Err(GcprError::InvalidInput(format!(
                "parameter space needs -1/2 < lower < upper < inf, got [{}, {}]",
                space.lower, space.upper
            )));
        }
        if !(space.min_gap > 0.0) {
            return Err(GcprError::InvalidInput(format!(
                "minimum gap between trend powers must be positive, got {}",
                space.min_gap
            )));
        }
        for t in &trends {
            if let TrendTerm::Fixed(p) = t {
                if !p.is_finite() || *p <= -0.5 {
                    return Err(GcprError::InvalidInput(format!(
                        "fixed trend power {p} must be finite and > -1/2"
                    )));
                }
            }
        }
        Ok(Self {
            trends,
            regressor_orders,
            space,
        })
    }

    /// `y = tau1 + tau2 t + phi1 x + phi2 x^2`.
    pub fn m1() -> Self {
        Self::preset(vec![TrendTerm::Fixed(0.0), TrendTerm::Fixed(1.0)], 2)
    }

    /// M1 plus a quadratic trend with the power fixed at 2.
    pub fn m2() -> Self {
        Self::preset(
            vec![TrendTerm::Fixed(0.0), TrendTerm::Fixed(1.0), TrendTerm::Fixed(2.0)],
            2,
        )
    }

    /// M1 plus a power-law trend with an estimated power.
    pub fn m3() -> Self {
        Self::preset(vec![TrendTerm::Fixed(0.0), TrendTerm::Fixed(1.0), TrendTerm::Free], 2)
    }

    /// Linear cointegration around a flexible time trend.
    pub fn m4() -> Self {
        Self::preset(vec![TrendTerm::Fixed(0.0), TrendTerm::Fixed(1.0), TrendTerm::Free], 1)
    }

    fn preset(trends: Vec<TrendTerm>, order: usize) -> Self {
        Self {
            trends,
            regressor_orders: vec![order],
            space: ParamSpace::default(),
        }
    }

    pub fn with_space(mut self, space: ParamSpace) -> Self {
        self.space = space;
        self
    }

    /// Number of trend terms `d`.
    pub fn n_trends(&self) -> usize {
        self.trends.len()
    }

    pub fn n_free(&self) -> usize {
        self.trends.iter().filter(|t| t.is_free()).count()
    }

    /// Positions (within the trend list) of the free powers.
    pub fn free_indices(&self) -> Vec<usize> {
        self.trends
            .iter()
            .enumerate()
            .filter_map(|(i, t)| t.is_free().then_some(i))
            .collect()
    }

    /// Number of integrated regressors `m`.
    pub fn n_regressors(&self) -> usize {
        self.regressor_orders.len()
    }

    /// Total number of polynomial terms `p`.
    pub fn n_poly(&self) -> usize {
        self.regressor_orders.iter().sum()
    }

    /// Number of linear coefficients `d + p`.
    pub fn n_coef(&self) -> usize {
        self.n_trends() + self.n_poly()
    }

    /// Length of the full parameter vector (free powers, trend coefficients,
    /// polynomial coefficients).
    pub fn n_params(&self) -> usize {
        self.n_free() + self.n_coef()
    }

    /// Smallest sample length for which the model can be estimated.
    pub fn min_sample(&self) -> usize {
        self.n_coef() + 2
    }

    /// Expand a vector of free powers into all `d` trend powers.
    pub fn full_powers(&self, free: &[f64]) -> Result<Vec<f64>> {
        if free.len() != self.n_free() {
            return Err(GcprError::DimensionMismatch(format!(
                "expected {} free trend powers, got {}",
                self.n_free(),
                free.len()
            )));
        }
        let mut it = free.iter();
        Ok(self
            .trends
            .iter()
            .map(|t| match t {
                TrendTerm::Fixed(p) => *p,
                TrendTerm::Free => *it.next().expect("length checked"),
            })
            .collect())
    }

    /// The free entries of a full power vector.
    pub fn free_powers(&self, full: &[f64]) -> Vec<f64> {
        self.trends
            .iter()
            .zip(full)
            .filter_map(|(t, &p)| t.is_free().then_some(p))
            .collect()
    }

    /// Copy of the specification with every free power fixed at the given
    /// value (used for theta-informed comparators).
    pub fn with_fixed_powers(&self, full: &[f64]) -> Result<Self> {
        if full.len() != self.n_trends() {
            return Err(GcprError::DimensionMismatch(format!(
                "expected {} trend powers, got {}",
                self.n_trends(),
                full.len()
            )));
        }
        Ok(Self {
            trends: full.iter().map(|&p| TrendTerm::Fixed(p)).collect(),
            regressor_orders: self.regressor_orders.clone(),
            space: self.space,
        })
    }

    /// Human-readable labels for the parameter vector, in order
    /// `(theta_free, tau, phi)`.
    pub fn param_labels(&self) -> Vec<String> {
        let mut labels = Vec::with_capacity(self.n_params());
        for i in self.free_indices() {
            labels.push(format!("theta{}", i + 1));
        }
        for i in 0..self.n_trends() {
            labels.push(format!("tau{}", i + 1));
        }
        let m = self.n_regressors();
        for (i, &p) in self.regressor_orders.iter().enumerate() {
            for j in 1..=p {
                if m == 1 {
                    labels.push(format!("phi{j}"));
                } else {
                    labels.push(format!("phi{}_{}", i + 1, j));
                }
            }
        }
        labels
    }

    /// Index of a coordinate within the `(theta_free, tau, phi)` vector.
    pub fn coordinate_index(&self, coord: Coordinate) -> Result<usize> {
        let nf = self.n_free();
        let d = self.n_trends();
        match coord {
            Coordinate::Theta(i) => self
                .free_indices()
                .iter()
                .position(|&k| k == i)
                .ok_or_else(|| GcprError::InvalidInput(format!("trend {} has no free power", i + 1))),
            Coordinate::Tau(i) if i < d => Ok(nf + i),
            Coordinate::Phi { regressor, power }
                if regressor < self.n_regressors() && power >= 1 && power <= self.regressor_orders[regressor] =>
            {
                let offset: usize = self.regressor_orders[..regressor].iter().sum();
                Ok(nf + d + offset + power - 1)
            }
            other => Err(GcprError::InvalidInput(format!(
                "coordinate {other:?} is out of range for this model"
            ))),
        }
    }
}

/// Addresses one element of the parameter vector. Indices are zero-based;
/// `power` is the polynomial order (1-based, as in `x^power`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Coordinate {
    Theta(usize),
    Tau(usize),
    Phi { regressor: usize, power: usize },
}

/// Parameters `(theta, tau, phi)`. `theta` holds all `d` trend powers
/// including the fixed ones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamVector {
    pub theta: Vec<f64>,
    pub tau: Vec<f64>,
    pub phi: Vec<f64>,
}

impl ParamVector {
    /// Stack into `(theta_free, tau, phi)` following `spec`.
    pub fn stacked(&self, spec: &ModelSpec) -> DVector<f64> {
        let free = spec.free_powers(&self.theta);
        DVector::from_iterator(
            spec.n_params(),
            free.iter().chain(self.tau.iter()).chain(self.phi.iter()).copied(),
        )
    }
}

/// One violated constraint of the trend-power parameter space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ThetaViolation {
    Length { expected: usize, got: usize },
    NonFinite { trend: usize },
    FixedMismatch { trend: usize, fixed: f64, got: f64 },
    BelowLower { trend: usize, value: f64, bound: f64 },
    AboveUpper { trend: usize, value: f64, bound: f64 },
    Gap { low: f64, high: f64, min_gap: f64 },
}

impl std::fmt::Display for ThetaViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Length { expected, got } => {
                write!(f, "expected {expected} trend powers, got {got}")
            }
            Self::NonFinite { trend } => write!(f, "power of trend {} is not finite", trend + 1),
            Self::FixedMismatch { trend, fixed, got } => {
                write!(f, "trend {} is fixed at {fixed} but {got} was supplied", trend + 1)
            }
            Self::BelowLower { trend, value, bound } => {
                write!(f, "power {value} of trend {} is below {bound}", trend + 1)
            }
            Self::AboveUpper { trend, value, bound } => {
                write!(f, "power {value} of trend {} is above {bound}", trend + 1)
            }
            Self::Gap { low, high, min_gap } => {
                write!(f, "powers {low} and {high} are closer than {min_gap}")
            }
        }
    }
}

/// Check a full vector of trend powers against the parameter space. Returns
/// every violated constraint; an empty list means the point is admissible.
///
/// Bounds apply to the free powers. The spacing constraint applies to every
/// pair of consecutive powers after sorting, fixed or free.
pub fn validate_theta(spec: &ModelSpec, theta: &[f64]) -> Vec<ThetaViolation> {
    let d = spec.n_trends();
    if theta.len() != d {
        return vec![ThetaViolation::Length {
            expected: d,
            got: theta.len(),
        }];
    }
    let mut out = Vec::new();
    for (i, (term, &value)) in spec.trends.iter().zip(theta).enumerate() {
        if !value.is_finite() {
            out.push(ThetaViolation::NonFinite { trend: i });
            continue;
        }
        match term {
            TrendTerm::Fixed(p) => {
                if *p != value {
                    out.push(ThetaViolation::FixedMismatch {
                        trend: i,
                        fixed: *p,
                        got: value,
                    });
                }
            }
            TrendTerm::Free => {
                if value < spec.space.lower - THETA_TOL {
                    out.push(ThetaViolation::BelowLower {
                        trend: i,
                        value,
                        bound: spec.space.lower,
                    });
                }
                if value > spec.space.upper + THETA_TOL {
                    out.push(ThetaViolation::AboveUpper {
                        trend: i,
                        value,
                        bound: spec.space.upper,
                    });
                }
            }
        }
    }
    let mut sorted: Vec<f64> = theta.iter().copied().filter(|v| v.is_finite()).collect();
    sorted.sort_by(|a, b| a.total_cmp(b));
    for w in sorted.windows(2) {
        if w[1] - w[0] < spec.space.min_gap - THETA_TOL {
            out.push(ThetaViolation::Gap {
                low: w[0],
                high: w[1],
                min_gap: spec.space.min_gap,
            });
        }
    }
    out
}

pub(crate) fn ensure_valid_theta(spec: &ModelSpec, theta: &[f64]) -> Result<()> {
    let violations = validate_theta(spec, theta);
    if violations.is_empty() {
        Ok(())
    } else {
        let msg = violations
            .iter()
            .map(ToString::to_string)
            .collect::<Vec<_>>()
            .join("; ");
        Err(GcprError::InvalidTheta(msg))
    }
}

/// `horizon^power` computed through logs, refusing anything that would leave
/// the double range.
pub fn guarded_power(horizon: f64, power: f64) -> Result<f64> {
    let log = power * horizon.ln();
    if !log.is_finite() || log.abs() > MAX_LOG_POWER {
        return Err(GcprError::Overflow { power, horizon });
    }
    Ok(log.exp())
}

/// Rescaled regressor matrix for a given set of trend powers.
#[derive(Debug, Clone)]
pub struct Design {
    /// `T x (d + p)`; trend columns `(t/T)^theta_i`, then `(x_i/sqrt(T))^j`.
    pub matrix: DMatrix<f64>,
    /// Per-column factors: a raw column equals the scaled column times its
    /// factor (`T^theta_i` or `T^{j/2}`).
    pub unscale: Vec<f64>,
}

impl Design {
    /// Convert coefficients estimated on the scaled design back to the raw
    /// regressors.
    pub fn unscale_coefficients(&self, scaled: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(scaled.len(), scaled.iter().zip(&self.unscale).map(|(c, f)| c / f))
    }
}

/// Caches the theta-independent pieces of the design so repeated builds over a
/// grid only recompute the trend columns.
#[derive(Debug, Clone)]
pub struct DesignBuilder<'a> {
    spec: &'a ModelSpec,
    rel_time: Vec<f64>,
    stochastic: Vec<(Vec<f64>, f64)>,
    sample_len: usize,
}

impl<'a> DesignBuilder<'a> {
    pub fn new(spec: &'a ModelSpec, data: &Dataset) -> Result<Self> {
        if data.n_regressors() != spec.n_regressors() {
            return Err(GcprError::DimensionMismatch(format!(
                "model has {} regressors, data has {}",
                spec.n_regressors(),
                data.n_regressors()
            )));
        }
        let t_len = data.len();
        if t_len < spec.min_sample() {
            return Err(GcprError::DimensionMismatch(format!(
                "sample length {} is below the minimum {} for this model",
                t_len,
                spec.min_sample()
            )));
        }
        let tf = t_len as f64;
        let rel_time = (1..=t_len).map(|t| t as f64 / tf).collect();
        let root = tf.sqrt();
        let mut stochastic = Vec::with_capacity(spec.n_poly());
        for (series, &order) in data.x.iter().zip(&spec.regressor_orders) {
            for j in 1..=order {
                let col = series.iter().map(|x| (x / root).powi(j as i32)).collect();
                stochastic.push((col, guarded_power(tf, j as f64 / 2.0)?));
            }
        }
        Ok(Self {
            spec,
            rel_time,
            stochastic,
            sample_len: t_len,
        })
    }

    pub fn sample_len(&self) -> usize {
        self.sample_len
    }

    pub fn build(&self, theta: &[f64]) -> Result<Design> {
        ensure_valid_theta(self.spec, theta)?;
        self.build_unchecked(theta)
    }

    /// Build without the parameter-space check (still guards overflow).
    pub(crate) fn build_unchecked(&self, theta: &[f64]) -> Result<Design> {
        let t_len = self.sample_len;
        let tf = t_len as f64;
        let k = theta.len() + self.stochastic.len();
        let mut matrix = DMatrix::zeros(t_len, k);
        let mut unscale = Vec::with_capacity(k);
        for (c, &power) in theta.iter().enumerate() {
            unscale.push(guarded_power(tf, power)?);
            let mut col = matrix.column_mut(c);
            if power == 0.0 {
                col.fill(1.0);
            } else {
                for (dst, r) in col.iter_mut().zip(&self.rel_time) {
                    *dst = r.powf(power);
                }
            }
        }
        for (c, (values, factor)) in self.stochastic.iter().enumerate() {
            matrix.column_mut(theta.len() + c).copy_from_slice(values.as_slice());
            unscale.push(*factor);
        }
        Ok(Design { matrix, unscale })
    }
}

/// Rescaled design matrix `Z(theta)` with its unscaling factors.
pub fn build_design_matrix(spec: &ModelSpec, data: &Dataset, theta: &[f64]) -> Result<Design> {
    DesignBuilder::new(spec, data)?.build(theta)
}

/// The scaling matrices `D_d`, `D_s`, `L_tau` and `G` evaluated at `(theta,
/// tau)` and a horizon (sample length for mapping back to estimates, path
/// length for simulated draws).
///
/// Rows and columns follow the parameter order `(theta_free, tau, phi)`; only
/// free powers carry a theta block and a `ln(horizon)` coupling.
#[derive(Debug, Clone)]
pub struct ScalingMatrices {
    pub d_trend: DVector<f64>,
    pub d_stochastic: DVector<f64>,
    pub l_tau: DMatrix<f64>,
    pub g: DMatrix<f64>,
    pub theta: Vec<f64>,
    pub tau: Vec<f64>,
    pub horizon: f64,
    free: Vec<usize>,
}

impl ScalingMatrices {
    /// Block-diagonal `sqrt(h) * diag(D_free, D_d, D_s)`.
    pub fn d_block(&self) -> DMatrix<f64> {
        let nf = self.free.len();
        let d = self.d_trend.len();
        let root = self.horizon.sqrt();
        let mut diag = Vec::with_capacity(nf + d + self.d_stochastic.len());
        diag.extend(self.free.iter().map(|&i| root * self.d_trend[i]));
        diag.extend(self.d_trend.iter().map(|v| root * v));
        diag.extend(self.d_stochastic.iter().map(|v| root * v));
        DMatrix::from_diagonal(&DVector::from_vec(diag))
    }

    /// `G` recomputed as `D_block * (L_tau')^{-1}` through a generic inverse.
    pub fn reconstruct_g(&self) -> Option<DMatrix<f64>> {
        let lt_inv = self.l_tau.transpose().try_inverse()?;
        Some(self.d_block() * lt_inv)
    }

    /// Closed-form `G^{-1} = L_tau' * D_block^{-1}`.
    pub fn g_inverse(&self) -> DMatrix<f64> {
        let d_inv = DMatrix::from_diagonal(&self.d_block().diagonal().map(|v| 1.0 / v));
        self.l_tau.transpose() * d_inv
    }

    /// Apply `G^{-1}` to a vector without forming any matrix.
    pub fn apply_inverse(&self, v: &DVector<f64>) -> DVector<f64> {
        let nf = self.free.len();
        let d = self.d_trend.len();
        let root = self.horizon.sqrt();
        let ln_h = self.horizon.ln();
        let mut out = DVector::zeros(v.len());
        for (r, &i) in self.free.iter().enumerate() {
            out[r] = v[r] / (root * self.d_trend[i]);
        }
        for i in 0..d {
            out[nf + i] = v[nf + i] / (root * self.d_trend[i]);
        }
        for (r, &i) in self.free.iter().enumerate() {
            out[nf + i] -= self.tau[i] * ln_h * out[r];
        }
        for (j, s) in self.d_stochastic.iter().enumerate() {
            out[nf + d + j] = v[nf + d + j] / (root * s);
        }
        out
    }
}

/// Scaling matrices at `(theta, tau)` for the given horizon. `theta` holds
/// all `d` powers; `tau` all `d` trend coefficients.
pub fn scaling_matrices(spec: &ModelSpec, theta: &[f64], tau: &[f64], horizon: f64) -> Result<ScalingMatrices> {
    let d = spec.n_trends();
    if theta.len() != d || tau.len() != d {
        return Err(GcprError::DimensionMismatch(format!(
            "expected {d} trend powers and coefficients, got {} and {}",
            theta.len(),
            tau.len()
        )));
    }
    if !(horizon > 1.0) || !horizon.is_finite() {
        return Err(GcprError::InvalidInput(format!(
            "scaling horizon must be a finite number above 1, got {horizon}"
        )));
    }
    let free = spec.free_indices();
    let nf = free.len();
    let p = spec.n_poly();
    let k = nf + d + p;
    let d_trend = DVector::from_vec(
        theta
            .iter()
            .map(|&th| guarded_power(horizon, th))
            .collect::<Result<Vec<_>>>()?,
    );
    let mut d_stoch = Vec::with_capacity(p);
    for &order in &spec.regressor_orders {
        for j in 1..=order {
            d_stoch.push(guarded_power(horizon, j as f64 / 2.0)?);
        }
    }
    let d_stochastic = DVector::from_vec(d_stoch);
    let ln_h = horizon.ln();
    let root = horizon.sqrt();

    let mut l_tau = DMatrix::identity(k, k);
    for (r, &i) in free.iter().enumerate() {
        l_tau[(r, nf + i)] = -tau[i] * ln_h;
    }

    let mut g = DMatrix::zeros(k, k);
    for (r, &i) in free.iter().enumerate() {
        g[(r, r)] = root * d_trend[i];
        g[(nf + i, r)] = root * d_trend[i] * tau[i] * ln_h;
    }
    for i in 0..d {
        g[(nf + i, nf + i)] = root * d_trend[i];
    }
    for j in 0..p {
        g[(nf + d + j, nf + d + j)] = root * d_stochastic[j];
    }
    if g.iter().any(|v| !v.is_finite()) {
        return Err(GcprError::NonFinite("scaling matrix G".into()));
    }
    Ok(ScalingMatrices {
        d_trend,
        d_stochastic,
        l_tau,
        g,
        theta: theta.to_vec(),
        tau: tau.to_vec(),
        horizon,
        free,
    })
}
