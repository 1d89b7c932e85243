//! Helpers shared by the property and acceptance suites.
#![allow(dead_code)]

use gcpr::data::Dataset;
use gcpr::fmols::{fmols_fit, ThetaSource};
use gcpr::kpss::kpss_statistic;
use gcpr::lrv::{estimate_lrv, kernel_weight, residual_vector_series, Bandwidth, Kernel, LrvSet};
use gcpr::model::{build_design_matrix, scaling_matrices, ModelSpec, ParamVector};
use gcpr::montecarlo::{parse_scope, table_experiment, McConfig, TableKind};
use gcpr::nls::{fit_gcpr, ols_given_theta, rss_profile_trend, GcprFit, GridSpec};
use gcpr::rng::stream_rng;
use gcpr::siminf::{run_sim_inference, simulate_draw, SimConfig};
use gcpr::wsq::QuantileTable;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

pub fn random_series(n: usize, k: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = stream_rng(seed, 0);
    let mut v = DMatrix::zeros(n, k);
    for r in 0..n {
        for c in 0..k {
            let e: f64 = rng.sample(StandardNormal);
            v[(r, c)] = e + if r > 0 { 0.5 * v[(r - 1, c)] } else { 0.0 };
        }
    }
    v
}

/// `(t, y, x)` with `x` a random walk and a power trend in `y`.
pub fn gcpr_data(t_len: usize, theta: f64, seed: u64) -> Dataset {
    let mut rng = stream_rng(seed, 1);
    let mut x = 0.0;
    let mut xs = Vec::with_capacity(t_len);
    let mut ys = Vec::with_capacity(t_len);
    for i in 0..t_len {
        let t = (i + 1) as f64;
        let v: f64 = rng.sample(StandardNormal);
        let u: f64 = rng.sample(StandardNormal);
        x += v;
        xs.push(x);
        ys.push(1.0 + 0.05 * t - 2e-3 * t.powf(theta) + 2.0 * x - 0.05 * x * x + u);
    }
    Dataset::new(ys, vec![xs]).unwrap()
}

pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

/// Literal recipe: `J = {G'^{-1} [sum f f'] G^{-1}}^{-1} {G'^{-1} [sum f mu] + B}`
/// with unnormalized derivatives `f_n = [(tau .* n^theta) ln n, n^theta, s_n]`.
pub fn literal_draw(
    spec: &ModelSpec,
    params: &ParamVector,
    lrv: &LrvSet,
    n: usize,
    seed: u64,
    stream: u64,
) -> DVector<f64> {
    let mut rng = stream_rng(seed, stream);
    let m = spec.n_regressors();
    let free = spec.free_indices();
    let k = spec.n_params();
    let chol = lrv.omega.clone().cholesky().unwrap().l();
    let mut chi = vec![0.0; m];
    let mut sff = DMatrix::<f64>::zeros(k, k);
    let mut sfm = DVector::<f64>::zeros(k);
    let mut avg = vec![vec![0.0; 8]; m];
    let nn = n as f64;
    for step in 1..=n {
        let e = DVector::from_fn(m + 1, |_, _| rng.sample::<f64, _>(StandardNormal));
        let w = &chol * e;
        for i in 0..m {
            chi[i] += w[i + 1];
        }
        let t = step as f64;
        let mut f = Vec::with_capacity(k);
        for &i in &free {
            f.push(params.tau[i] * t.powf(params.theta[i]) * t.ln());
        }
        for &th in &params.theta {
            f.push(t.powf(th));
        }
        for (i, &p) in spec.regressor_orders.iter().enumerate() {
            for j in 1..=p {
                f.push(chi[i].powi(j as i32));
                avg[i][j - 1] += (chi[i] / nn.sqrt()).powi(j as i32 - 1) / nn;
            }
        }
        let f = DVector::from_vec(f);
        sff += &f * f.transpose();
        sfm += &f * w[0];
    }
    let g = scaling_matrices(spec, &params.theta, &params.tau, nn).unwrap().g;
    let g_inv = g.clone().try_inverse().unwrap();
    let a = g_inv.transpose() * sff * &g_inv;
    let mut b = g_inv.transpose() * sfm;
    let dm = lrv.delta_minus_vu();
    let mut col = free.len() + spec.n_trends();
    for (i, &p) in spec.regressor_orders.iter().enumerate() {
        for j in 1..=p {
            b[col] += j as f64 * avg[i][j - 1] * dm[i];
            col += 1;
        }
    }
    a.try_inverse().unwrap() * b
}

pub fn synthetic_fit(spec: &ModelSpec, params: ParamVector, t_len: usize) -> GcprFit {
    GcprFit {
        spec: spec.clone(),
        params,
        residuals: vec![0.0; t_len],
        rss: 0.0,
        theta_profile: None,
        converged: true,
        bracket: None,
        evaluations: 0,
    }
}

/// `Err(message)` unless `cond` holds.
macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        let holds: bool = $cond;
        if !holds {
            return Err(format!($($msg)+));
        }
    };
}

pub type Check = Result<(), String>;

/// (a) `Omega = Delta + Delta' - Sigma` and `Delta^- = Sigma - Delta'`.
pub fn check_lrv_identity(n: usize, k: usize, seed: u64, kernel: Kernel, b: f64) -> Check {
    let v = random_series(n, k, seed);
    let lrv = estimate_lrv(&v, kernel, Bandwidth::Fixed(b)).map_err(|e| e.to_string())?;
    let rebuilt = &lrv.delta + lrv.delta.transpose() - &lrv.sigma;
    ensure!(
        (rebuilt - &lrv.omega).abs().max() <= 1e-12 * lrv.omega.abs().max().max(1.0),
        "Omega != Delta + Delta' - Sigma"
    );
    let dm = &lrv.sigma - lrv.delta.transpose();
    ensure!(
        (dm - &lrv.delta_minus).abs().max() <= 1e-12 * lrv.sigma.abs().max().max(1.0),
        "Delta^- != Sigma - Delta'"
    );
    Ok(())
}

/// (b) Kernel sums against explicit triple loops.
pub fn check_lrv_brute_force(n: usize, k: usize, seed: u64, kernel: Kernel, b: f64) -> Check {
    let v = random_series(n, k, seed);
    let lrv = estimate_lrv(&v, kernel, Bandwidth::Fixed(b)).map_err(|e| e.to_string())?;
    let nf = n as f64;
    let b_used = lrv.bandwidth.unwrap();
    let mut sigma = DMatrix::<f64>::zeros(k, k);
    let mut delta = DMatrix::<f64>::zeros(k, k);
    for r in 0..k {
        for c in 0..k {
            let mut s = 0.0;
            for t in 0..n {
                s += v[(t, r)] * v[(t, c)];
            }
            sigma[(r, c)] = s / nf;
            let mut d = s / nf;
            for h in 1..n {
                let mut g = 0.0;
                for t in 0..n - h {
                    g += v[(t, r)] * v[(t + h, c)];
                }
                d += kernel_weight(kernel, h as f64 / b_used) * g / nf;
            }
            delta[(r, c)] = d;
        }
    }
    let scale = sigma.abs().max().max(1.0);
    ensure!((&sigma - &lrv.sigma).abs().max() <= 1e-12 * scale, "Sigma differs");
    ensure!((&delta - &lrv.delta).abs().max() <= 1e-12 * scale * nf, "Delta differs");
    Ok(())
}

/// (c) KPSS statistic against `(q^2 omega)^{-1} sum_t (sum_{s<=t} u_s)^2`.
pub fn check_kpss_double_sum(u: &[f64], omega: f64) -> Check {
    let q = u.len() as f64;
    let mut literal = 0.0;
    for t in 0..u.len() {
        let s: f64 = u[..=t].iter().sum::<f64>() / q.sqrt();
        literal += s * s;
    }
    literal /= q * omega;
    let k = kpss_statistic(u, omega).map_err(|e| e.to_string())?;
    ensure!(close(k, literal, 1e-12), "{k} vs literal {literal}");
    ensure!(k >= 0.0, "negative statistic");
    Ok(())
}

/// (d) OLS residuals are orthogonal to every design column.
pub fn check_ols_orthogonal(seed: u64, theta: f64) -> Check {
    let data = gcpr_data(60, 2.0, seed);
    let spec = ModelSpec::m3();
    let full = spec.full_powers(&[theta]).map_err(|e| e.to_string())?;
    let ols = ols_given_theta(&spec, &data, &full).map_err(|e| e.to_string())?;
    let design = build_design_matrix(&spec, &data, &full).map_err(|e| e.to_string())?;
    let e = DVector::from_column_slice(&ols.residuals);
    let scale = e.norm();
    for c in 0..design.matrix.ncols() {
        let col = design.matrix.column(c);
        ensure!(
            col.dot(&e).abs() <= 1e-9 * scale * col.norm(),
            "column {c} not orthogonal"
        );
    }
    let rss: f64 = ols.residuals.iter().map(|r| r * r).sum();
    ensure!(close(rss, ols.rss, 1e-10), "rss {} vs residuals {rss}", ols.rss);
    Ok(())
}

/// (d) The fitted RSS is not beaten by any point of a profile grid.
pub fn check_profile_minimum(seed: u64) -> Check {
    let data = gcpr_data(80, 2.0, seed);
    let spec = ModelSpec::m3();
    let grid: Vec<f64> = (0..=60).map(|i| 1.1 + 0.05 * i as f64).collect();
    let fit = fit_gcpr(&spec, &data, &GridSpec::between(1.05, 4.5, 0.01)).map_err(|e| e.to_string())?;
    for p in rss_profile_trend(&spec, &data, &grid).map_err(|e| e.to_string())? {
        ensure!(
            fit.rss <= p.rss * (1.0 + 1e-10),
            "theta {} rss {} < {}",
            p.theta,
            p.rss,
            fit.rss
        );
    }
    Ok(())
}

/// (e) With `Omega = Delta = I` FM-OLS is OLS on the rescaled design.
pub fn check_fmols_is_ols(seed: u64) -> Check {
    let data = gcpr_data(50, 2.0, seed);
    let spec = ModelSpec::m2();
    let ident = DMatrix::identity(2, 2);
    let lrv = LrvSet::from_parts(ident.clone(), ident).map_err(|e| e.to_string())?;
    let fm = fmols_fit(&spec, &data, &[0.0, 1.0, 2.0], ThetaSource::Supplied, &lrv).map_err(|e| e.to_string())?;
    let n = data.len() - 1;
    let z = DMatrix::from_fn(n, 5, |r, c| {
        let t = (r + 2) as f64;
        let x = data.x[0][r + 1];
        [1.0, t / 50.0, (t / 50.0).powi(2), x / 50f64.sqrt(), x * x / 50.0][c]
    });
    let y = DVector::from_column_slice(&data.y[1..]);
    let c = z.svd(true, true).solve(&y, 1e-14)?;
    let raw = [c[0], c[1] / 50.0, c[2] / 2500.0, c[3] / 50f64.sqrt(), c[4] / 50.0];
    let got: Vec<f64> = fm.tau_plus.iter().chain(&fm.phi_plus).copied().collect();
    for (a, b) in got.iter().zip(raw.iter()) {
        ensure!(close(*a, *b, 1e-8), "{a} vs {b}");
    }
    ensure!(fm.bias_correction.iter().all(|v| *v == 0.0), "nonzero bias correction");
    Ok(())
}

/// (f) `simulate_draw` for M3 against the literal recipe at N = 16.
pub fn check_draw_recipe(seed: u64, stream: u64, theta: f64, tau3: f64, rho: f64, dm: f64) -> Check {
    let spec = ModelSpec::m3();
    let params = ParamVector {
        theta: vec![0.0, 1.0, theta],
        tau: vec![0.3, -0.2, tau3],
        phi: vec![1.0, 0.5],
    };
    let sigma = DMatrix::from_row_slice(2, 2, &[1.0, rho, rho, 1.0]);
    let mut delta = sigma.clone();
    delta[(0, 1)] -= dm;
    let lrv = LrvSet::from_parts(sigma, delta).map_err(|e| e.to_string())?;
    let n = 16;
    let fit = synthetic_fit(&spec, params.clone(), n);
    let got = simulate_draw(&fit, &lrv, n, seed, stream).map_err(|e| e.to_string())?;
    let want = literal_draw(&spec, &params, &lrv, n, seed, stream);
    for (a, b) in got.iter().zip(want.iter()) {
        ensure!(close(*a, *b, 1e-6), "{a} vs {b}");
    }
    Ok(())
}

/// (g) Fits, LRV, simulated draws and a Monte Carlo cell are identical on
/// one and four worker threads.
pub fn check_thread_invariance() -> Check {
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| {
            let data = gcpr_data(80, 2.0, 17);
            let spec = ModelSpec::m3();
            let fit = fit_gcpr(&spec, &data, &GridSpec::default()).unwrap();
            let v = residual_vector_series(&fit, &data).unwrap();
            let lrv = estimate_lrv(&v, Kernel::Bartlett, Bandwidth::Auto).unwrap();
            let sim = run_sim_inference(&fit, &lrv, &SimConfig::with_draws(64, 5)).unwrap();
            let cfg = McConfig {
                reps: 8,
                draws: 19,
                seed: 3,
                ..McConfig::default()
            };
            let scope = parse_scope("C:rho=0.5:T=50", &TableKind::Size2.default_scope()).unwrap();
            let table = table_experiment(TableKind::Size2, &scope, &cfg).unwrap();
            (fit, lrv, sim, table)
        })
    };
    let (f1, l1, s1, t1) = run(1);
    let (f4, l4, s4, t4) = run(4);
    ensure!(f1 == f4, "fits differ");
    ensure!(l1 == l4, "LRV estimates differ");
    ensure!(s1 == s4, "simulated draws differ");
    ensure!(t1 == t4, "Monte Carlo cells differ");
    Ok(())
}

/// (h) Mean of the shipped `int W^2` quantile table, via
/// `E X = int_0^inf P(X > x) dx`.
pub fn wsq_table_mean() -> f64 {
    let rows = QuantileTable::shipped().rows();
    let mut by_q: Vec<(f64, f64)> = rows.iter().map(|&(p, q)| (q, p)).collect();
    by_q.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut mean = by_q[0].0;
    for w in by_q.windows(2) {
        mean += (w[1].0 - w[0].0) * 0.5 * (w[0].1 + w[1].1);
    }
    mean
}
