//! Single power-law trend `y_t = tau t^theta + u_t` with i.i.d. errors, where
//! the limit of `G(gamma_0, T)(gamma_hat - gamma_0)` is Gaussian with
//! covariance `Omega_uu (2 theta + 1)^3 [[2 tau^2, -tau (2 theta + 1)],
//! [-tau (2 theta + 1), (2 theta + 1)^2]]^{-1}`.

use nalgebra::{DMatrix, DVector, Matrix2};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::data::Dataset;
use crate::error::{GcprError, Result};
use crate::lrv::LrvSet;
use crate::model::{scaling_matrices, ModelSpec, ParamSpace, ParamVector, TrendTerm};
use crate::nls::{fit_gcpr, GcprFit, GridSpec};
use crate::rng::{mix_seed, stream_rng};
use crate::siminf::{run_sim_inference, SimConfig};

/// Closed-form limiting covariance.
pub fn closed_form_covariance(theta: f64, tau: f64, omega_uu: f64) -> Matrix2<f64> {
    let k = 2.0 * theta + 1.0;
    let m = Matrix2::new(2.0 * tau * tau, -tau * k, -tau * k, k * k);
    m.try_inverse().expect("nonsingular for tau != 0") * (omega_uu * k.powi(3))
}

pub fn spec() -> ModelSpec {
    ModelSpec::new(vec![TrendTerm::Free], vec![], ParamSpace::default()).expect("valid")
}

fn sample_covariance(rows: &DMatrix<f64>) -> Matrix2<f64> {
    let n = rows.nrows() as f64;
    let mean = rows.row_mean();
    let mut cov = Matrix2::zeros();
    for r in rows.row_iter() {
        let d = [r[0] - mean[0], r[1] - mean[1]];
        for i in 0..2 {
            for j in 0..2 {
                cov[(i, j)] += d[i] * d[j];
            }
        }
    }
    cov / (n - 1.0)
}

/// Covariance of `J` simulated draws of length `n` at the true parameters,
/// with the true `Omega_uu` injected.
pub fn draw_covariance(theta: f64, tau: f64, omega_uu: f64, n: usize, draws: usize, seed: u64) -> Result<Matrix2<f64>> {
    let spec = spec();
    let fit = GcprFit {
        spec: spec.clone(),
        params: ParamVector {
            theta: vec![theta],
            tau: vec![tau],
            phi: vec![],
        },
        residuals: vec![0.0; n],
        rss: 0.0,
        theta_profile: None,
        converged: true,
        bracket: None,
        evaluations: 0,
    };
    let s = DMatrix::from_element(1, 1, omega_uu);
    let lrv = LrvSet::from_parts(s.clone(), s)?;
    let cfg = SimConfig {
        draws,
        path_len: Some(n),
        seed,
        ..SimConfig::default()
    };
    let sim = run_sim_inference(&fit, &lrv, &cfg)?;
    Ok(sample_covariance(&sim.draws))
}

/// Monte Carlo covariance of `G(gamma_0, T)(gamma_hat - gamma_0)` for the NLS
/// estimator, N(0,1) errors.
pub fn estimator_covariance(
    theta: f64,
    tau: f64,
    t_len: usize,
    reps: usize,
    grid: &GridSpec,
    seed: u64,
) -> Result<(Matrix2<f64>, usize)> {
    let spec = spec();
    let g = scaling_matrices(&spec, &[theta], &[tau], t_len as f64)?.g;
    let results: Vec<Option<[f64; 2]>> = (0..reps as u64)
        .into_par_iter()
        .map(|rep| {
            let mut rng = stream_rng(mix_seed(&[seed, 0xE1, rep]), 0);
            let y: Vec<f64> = (1..=t_len)
                .map(|t| {
                    let e: f64 = rng.sample(StandardNormal);
                    tau * (t as f64).powf(theta) + e
                })
                .collect();
            let data = Dataset::new(y, vec![]).ok()?;
            let fit = fit_gcpr(&spec, &data, grid).ok()?;
            let dev = DVector::from_vec(vec![fit.params.theta[0] - theta, fit.params.tau[0] - tau]);
            let scaled = &g * dev;
            Some([scaled[0], scaled[1]])
        })
        .collect();
    let ok: Vec<[f64; 2]> = results.iter().flatten().copied().collect();
    if ok.len() < 2 {
        return Err(GcprError::Degenerate("too few successful replications".into()));
    }
    let rows = DMatrix::from_fn(ok.len(), 2, |r, c| ok[r][c]);
    Ok((sample_covariance(&rows), reps - ok.len()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_at_unit_values() {
        let c = closed_form_covariance(1.0, 1.0, 1.0);
        let expected = Matrix2::new(27.0, 9.0, 9.0, 6.0);
        assert!((c - expected).abs().max() < 1e-12);
    }
}
