use gcpr::kpss::{kpss_test, run_kpss, DEFAULT_WINDOW};
use gcpr::lrv::{estimate_lrv, residual_vector_series, vector_series, Bandwidth, Kernel, LrvSet, SeriesStart};
use gcpr::model::{Coordinate, ModelSpec};
use gcpr::montecarlo::single_trend::{closed_form_covariance, draw_covariance};
use gcpr::montecarlo::{
    draw_var_matrix, generate_gcpr_sample, generate_var1_errors, spurious_trend_rejects, true_lrv, DgpConfig,
    SerialSetting,
};
use gcpr::nls::{fit_gcpr, GridSpec};
use gcpr::rng::stream_rng;
use gcpr::siminf::{confidence_interval, run_sim_inference, test_coefficient, Sides, SimConfig, SimDraws};
use rand::Rng;
use rand_distr::StandardNormal;

#[test]
fn true_lrv_agrees_with_long_sample_estimate() {
    let mut rng = stream_rng(0, 0);
    let a = draw_var_matrix(SerialSetting::B, &mut rng);
    let (u, v) = generate_var1_errors(&a, 0.5, 1_000_000, 50, &mut rng);
    let series = nalgebra::DMatrix::from_fn(u.len(), 2, |r, c| if c == 0 { u[r] } else { v[r] });
    let est = estimate_lrv(&series, Kernel::Bartlett, Bandwidth::Auto).unwrap();
    let truth = true_lrv(&a, 0.5).unwrap();
    for r in 0..2 {
        for c in 0..2 {
            let (e, t) = (est.omega[(r, c)], truth.omega[(r, c)]);
            assert!((e - t).abs() <= 0.03 * t.abs().max(0.1), "omega[{r},{c}]: {e} vs {t}");
        }
    }
}

#[test]
fn nls_recovers_trend_power_on_simulated_sample() {
    let cfg = DgpConfig::cell(SerialSetting::A, 0.0, 500);
    let (data, _) = generate_gcpr_sample(&cfg, None, &mut stream_rng(8, 0)).unwrap();
    let fit = fit_gcpr(&ModelSpec::m3(), &data, &GridSpec::default()).unwrap();
    assert!((fit.params.theta[2] - 2.0).abs() < 0.1, "theta {}", fit.params.theta[2]);
    assert!((fit.params.phi[0] - 5.0).abs() < 0.2);
    assert!(fit.converged);
}

#[test]
fn simulated_inference_end_to_end() {
    let cfg = DgpConfig::cell(SerialSetting::B, 0.25, 200);
    let (data, _) = generate_gcpr_sample(&cfg, None, &mut stream_rng(9, 0)).unwrap();
    let spec = ModelSpec::m3();
    let fit = fit_gcpr(&spec, &data, &GridSpec::default()).unwrap();
    let lrv = estimate_lrv(
        &residual_vector_series(&fit, &data).unwrap(),
        Kernel::Bartlett,
        Bandwidth::Auto,
    )
    .unwrap();
    let draws = run_sim_inference(&fit, &lrv, &SimConfig::with_draws(199, 4)).unwrap();
    assert_eq!(draws.draws.shape(), (199, spec.n_params()));

    let k = spec.coordinate_index(Coordinate::Theta(2)).unwrap();
    let ci = confidence_interval(&draws, &fit, k, 0.05, Some(spec.space.lower)).unwrap();
    assert!(ci.lower < ci.estimate && ci.estimate < ci.upper);

    let kp = spec
        .coordinate_index(Coordinate::Phi { regressor: 0, power: 2 })
        .unwrap();
    let t = test_coefficient(&draws, &fit, kp, 0.0, Sides::TwoSided, 0.05).unwrap();
    assert!((0.0..=1.0).contains(&t.p_value));
    // phi1 = 5 is far from zero.
    let k1 = spec
        .coordinate_index(Coordinate::Phi { regressor: 0, power: 1 })
        .unwrap();
    assert!(
        test_coefficient(&draws, &fit, k1, 0.0, Sides::TwoSided, 0.05)
            .unwrap()
            .reject
    );

    let json = serde_json::to_string(&draws).unwrap();
    let back: SimDraws = serde_json::from_str(&json).unwrap();
    assert_eq!(back.labels, draws.labels);
    let lrv_back: LrvSet = serde_json::from_str(&serde_json::to_string(&lrv).unwrap()).unwrap();
    assert_eq!(lrv_back, lrv);
}

#[test]
fn kpss_accepts_stationary_and_rejects_spurious() {
    let cfg = DgpConfig::cell(SerialSetting::A, 0.0, 200);
    let (data, _) = generate_gcpr_sample(&cfg, None, &mut stream_rng(10, 0)).unwrap();
    let fit = fit_gcpr(&ModelSpec::m3(), &data, &GridSpec::default()).unwrap();
    let lrv = estimate_lrv(
        &residual_vector_series(&fit, &data).unwrap(),
        Kernel::Bartlett,
        Bandwidth::Auto,
    )
    .unwrap();
    let r = run_kpss(&fit, &data, &lrv, 0.05, None).unwrap();
    assert!(!r.reject);
    assert_eq!(r.blocks, 199 / r.q_chosen);
    assert_eq!(r.max_stat, r.block_stats.iter().copied().fold(f64::MIN, f64::max));

    let mut rejected = 0;
    for rep in 0..500 {
        let mut rng = stream_rng(11, rep);
        let mut acc = 0.0;
        let walk: Vec<f64> = (0..200)
            .map(|_| {
                acc += rng.sample::<f64, _>(StandardNormal);
                acc
            })
            .collect();
        if kpss_test(&walk, 1.0, 0.05, None, DEFAULT_WINDOW).unwrap().reject {
            rejected += 1;
        }
    }
    assert!(rejected >= 250, "random walk rejected {rejected} / 500");
}

#[test]
fn fm_residuals_without_endogeneity_are_plain_residuals() {
    let cfg = DgpConfig::cell(SerialSetting::A, 0.0, 60);
    let (data, _) = generate_gcpr_sample(&cfg, None, &mut stream_rng(12, 0)).unwrap();
    let fit = fit_gcpr(&ModelSpec::m3(), &data, &GridSpec::default()).unwrap();
    let ident = nalgebra::DMatrix::identity(2, 2);
    let lrv = LrvSet::from_parts(ident.clone(), ident).unwrap();
    let up = gcpr::kpss::fm_residuals(&fit, &data, &lrv).unwrap();
    assert_eq!(up, fit.residuals[1..].to_vec());
    let v = vector_series(&fit.residuals, &data, SeriesStart::Second).unwrap();
    assert_eq!(v.nrows(), 59);
}

#[test]
fn single_trend_draws_match_closed_form() {
    let cov = draw_covariance(1.0, 1.0, 1.0, 2000, 2000, 77).unwrap();
    let want = closed_form_covariance(1.0, 1.0, 1.0);
    for r in 0..2 {
        for c in 0..2 {
            let rel = (cov[(r, c)] - want[(r, c)]).abs() / want[(r, c)].abs();
            assert!(rel < 0.12, "[{r},{c}] {} vs {}", cov[(r, c)], want[(r, c)]);
        }
    }
}

#[test]
fn large_omitted_trend_is_mostly_detected() {
    let z = -1.6448536269514722;
    let mut hits = 0;
    for rep in 0..400 {
        if spurious_trend_rejects(1e-2, 200, &mut stream_rng(13, rep), z).unwrap() {
            hits += 1;
        }
    }
    assert!(hits as f64 / 400.0 >= 0.70, "{hits} / 400");
}

#[test]
fn kpss_size_on_iid_noise_is_below_nominal() {
    let mut rejected = 0;
    for rep in 0..1000 {
        let mut rng = stream_rng(14, rep);
        let u: Vec<f64> = (0..200).map(|_| rng.sample(StandardNormal)).collect();
        if kpss_test(&u, 1.0, 0.05, None, DEFAULT_WINDOW).unwrap().reject {
            rejected += 1;
        }
    }
    let rate = rejected as f64 / 1000.0;
    assert!(rate > 0.0 && rate < 0.05, "iid rejection rate {rate}");
}
