//! Subsampling KPSS-type cointegration test with a Bonferroni decision rule
//! and minimum-volatility block-size selection.

use std::ops::Range;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{GcprError, Result};
use crate::lrv::{LrvSet, SeriesStart};
use crate::wsq;

/// Endogeneity-corrected residuals `u+_t = u_t - Omega_uv Omega_vv^{-1} dx_t`.
pub fn fm_residuals_from(residuals: &[f64], data: &Dataset, lrv: &LrvSet, start: SeriesStart) -> Result<Vec<f64>> {
    let v = crate::lrv::vector_series(residuals, data, start)?;
    if lrv.m() != data.n_regressors() {
        return Err(GcprError::DimensionMismatch(format!(
            "long-run covariance is for {} regressors, data has {}",
            lrv.m(),
            data.n_regressors()
        )));
    }
    let coef = lrv.endogeneity_coefficients()?;
    Ok((0..v.nrows())
        .map(|t| v[(t, 0)] - (0..lrv.m()).map(|i| coef[i] * v[(t, i + 1)]).sum::<f64>())
        .collect())
}

/// `u+_t` for `t = 2..T` from an NLS fit.
pub fn fm_residuals(fit: &crate::nls::GcprFit, data: &Dataset, lrv: &LrvSet) -> Result<Vec<f64>> {
    fm_residuals_from(&fit.residuals, data, lrv, SeriesStart::Second)
}

/// `K = Omega_{u.v}^{-1} q^{-2} sum_t (sum_{i<=t} u+_i)^2` on one segment.
pub fn kpss_statistic(segment: &[f64], omega_u_dot_v: f64) -> Result<f64> {
    if !(omega_u_dot_v > 0.0) || !omega_u_dot_v.is_finite() {
        return Err(GcprError::Degenerate(format!(
            "conditional long-run variance must be positive, got {omega_u_dot_v}"
        )));
    }
    if segment.is_empty() {
        return Err(GcprError::InvalidInput("empty segment".into()));
    }
    let q = segment.len() as f64;
    let mut partial = 0.0;
    let mut acc = 0.0;
    for &u in segment {
        partial += u;
        acc += partial * partial;
    }
    Ok(acc / (q * q * omega_u_dot_v))
}

/// `floor(n/q)` blocks of length `q`, alternating between the start and the
/// end of the sample (0-based index ranges).
pub fn subsample_blocks(n: usize, q: usize) -> Vec<Range<usize>> {
    if q == 0 || q > n {
        return Vec::new();
    }
    (0..n / q)
        .map(|i| {
            let k = i / 2;
            if i % 2 == 0 {
                k * q..(k + 1) * q
            } else {
                n - (k + 1) * q..n - k * q
            }
        })
        .collect()
}

pub use crate::wsq::critical_value;

/// Maximum block statistic at block length `q`.
pub fn max_block_statistic(u_plus: &[f64], omega_u_dot_v: f64, q: usize) -> Result<(Vec<f64>, f64)> {
    let stats = subsample_blocks(u_plus.len(), q)
        .into_iter()
        .map(|r| kpss_statistic(&u_plus[r], omega_u_dot_v))
        .collect::<Result<Vec<_>>>()?;
    let max = stats.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok((stats, max))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VolatilityPoint {
    pub q: usize,
    pub blocks: usize,
    pub max_stat: f64,
    pub volatility: f64,
}

/// About fifteen evenly spaced block lengths between `ceil(1.5 n^{1/3})`
/// and `floor(n/4)`.
pub fn default_q_grid(n: usize) -> Result<Vec<usize>> {
    let lo = ((1.5 * (n as f64).cbrt()).ceil() as usize).max(4);
    let hi = n / 4;
    if hi < lo {
        return Err(GcprError::InvalidInput(format!(
            "sample of {n} residuals is too short for block-size selection"
        )));
    }
    let mut grid: Vec<usize> = (0..15)
        .map(|i| (lo as f64 + (hi - lo) as f64 * i as f64 / 14.0).round() as usize)
        .collect();
    grid.dedup();
    Ok(grid)
}

pub const DEFAULT_WINDOW: usize = 2;

fn std_dev(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

/// Pick the candidate whose neighbourhood of `window` candidates on each
/// side (shrunk at the edges) has the smallest standard deviation of
/// the maximum block statistic. Ties go to the smaller `q`.
pub fn select_min_volatility(s: &[f64], window: usize) -> (usize, Vec<f64>) {
    let n = s.len();
    let vols: Vec<f64> = (0..n)
        .map(|i| std_dev(&s[i.saturating_sub(window)..(i + window + 1).min(n)]))
        .collect();
    let mut best = 0;
    for i in 1..n {
        if vols[i] < vols[best] {
            best = i;
        }
    }
    (best, vols)
}

pub fn min_volatility_q(
    u_plus: &[f64],
    omega_u_dot_v: f64,
    q_grid: &[usize],
    window: usize,
) -> Result<(usize, Vec<VolatilityPoint>)> {
    let n = u_plus.len();
    let mut grid: Vec<usize> = q_grid.iter().copied().filter(|&q| q >= 4 && q <= n / 2).collect();
    grid.sort_unstable();
    grid.dedup();
    if grid.is_empty() {
        return Err(GcprError::EmptyGrid(format!(
            "no block length in the grid satisfies 4 <= q <= {}",
            n / 2
        )));
    }
    let maxima = grid
        .par_iter()
        .map(|&q| max_block_statistic(u_plus, omega_u_dot_v, q).map(|(_, m)| m))
        .collect::<Result<Vec<_>>>()?;
    let (best, vols) = select_min_volatility(&maxima, window);
    let trace = grid
        .iter()
        .zip(maxima.iter().zip(&vols))
        .map(|(&q, (&max_stat, &volatility))| VolatilityPoint {
            q,
            blocks: n / q,
            max_stat,
            volatility,
        })
        .collect();
    Ok((grid[best], trace))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KpssResult {
    pub q_chosen: usize,
    /// Number of blocks `M = floor(n / q)`.
    pub blocks: usize,
    pub block_stats: Vec<f64>,
    pub max_stat: f64,
    pub critical: f64,
    pub alpha: f64,
    pub reject: bool,
    pub omega_u_dot_v: f64,
    pub q_grid: Vec<usize>,
    pub volatility_trace: Vec<VolatilityPoint>,
}

/// Full test on corrected residuals. `Omega_{u.v}` is held at its
/// full-sample value for every block.
pub fn kpss_test(
    u_plus: &[f64],
    omega_u_dot_v: f64,
    alpha: f64,
    q_grid: Option<&[usize]>,
    window: usize,
) -> Result<KpssResult> {
    if u_plus.iter().all(|&u| u == 0.0) || !(omega_u_dot_v > 0.0) {
        return Err(GcprError::Degenerate(
            "residuals have zero variance; the stationarity test is undefined".into(),
        ));
    }
    let grid = match q_grid {
        Some(g) => g.to_vec(),
        None => default_q_grid(u_plus.len())?,
    };
    let (q, trace) = min_volatility_q(u_plus, omega_u_dot_v, &grid, window)?;
    let (block_stats, max_stat) = max_block_statistic(u_plus, omega_u_dot_v, q)?;
    let blocks = block_stats.len();
    let critical = wsq::critical_value(alpha, blocks)?;
    Ok(KpssResult {
        q_chosen: q,
        blocks,
        block_stats,
        max_stat,
        critical,
        alpha,
        reject: max_stat > critical,
        omega_u_dot_v,
        q_grid: grid,
        volatility_trace: trace,
    })
}

/// Composition: corrected residuals from the fit, block-size selection and
/// the Bonferroni decision.
pub fn run_kpss(
    fit: &crate::nls::GcprFit,
    data: &Dataset,
    lrv: &LrvSet,
    alpha: f64,
    q_grid: Option<&[usize]>,
) -> Result<KpssResult> {
    let u_plus = fm_residuals(fit, data, lrv)?;
    let scale = data.y.iter().map(|v| v * v).sum::<f64>().sqrt();
    let norm = u_plus.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm <= 1e-10 * scale.max(f64::MIN_POSITIVE) {
        return Err(GcprError::Degenerate(
            "residuals vanish up to rounding; the model fits the data exactly".into(),
        ));
    }
    kpss_test(&u_plus, lrv.omega_u_dot_v, alpha, q_grid, DEFAULT_WINDOW)
}
