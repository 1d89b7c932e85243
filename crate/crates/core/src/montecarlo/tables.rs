//! Monte Carlo experiments: size of the linear-cointegration test, coverage
//! of the trend-power interval, size of the subsampling stationarity test,
//! power curves, and the spurious-trend t-test.
//!
//! Every replication is keyed by `(seed, table, setting, rho, T, rep)` so a
//! cell can be rerun on its own and results do not depend on thread count.
//! All estimators of a table share the sample of a replication; power curves
//! reuse the same errors across `phi2`.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use nalgebra::{DMatrix, Matrix2};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::dgp::{build_sample, draw_var_matrix, generate_var1_errors, true_lrv, DgpConfig, SerialSetting};
use crate::data::Dataset;
use crate::error::{GcprError, Result};
use crate::fmols::{fmols_fit, fmols_t_stat_phi, ThetaSource};
use crate::kpss::run_kpss;
use crate::linalg::OrthoFactor;
use crate::lrv::{estimate_lrv, vector_series, Bandwidth, Kernel, LrvSet, SeriesStart};
use crate::model::{Coordinate, ModelSpec};
use crate::nls::{fit_gcpr, GcprFit, GridSpec};
use crate::rng::{mix_seed, stream_rng};
use crate::siminf::{confidence_interval, run_sim_inference, test_coefficient, Sides, SimConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TableKind {
    /// Spurious-trend t-test (`--table 1`).
    Table1,
    /// Size of the `phi2 = 0` test (`--table 2`).
    Size2,
    /// Coverage and length of the trend-power interval (`--table 4`).
    Coverage4,
    /// Size of the stationarity test (`--table 5`).
    Kpss5,
    /// Power of the `phi2 = 0` test (`--table power`).
    Power,
}

impl TableKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "1" => Ok(Self::Table1),
            "2" => Ok(Self::Size2),
            "4" => Ok(Self::Coverage4),
            "5" => Ok(Self::Kpss5),
            "power" => Ok(Self::Power),
            other => Err(GcprError::InvalidInput(format!(
                "unknown table `{other}` (expected 1, 2, 4, 5 or power)"
            ))),
        }
    }

    fn id(self) -> u64 {
        self as u64 + 1
    }

    pub fn default_estimators(self) -> Vec<Estimator> {
        match self {
            Self::Table1 => vec![Estimator::SpuriousT],
            Self::Size2 => vec![
                Estimator::SimNls,
                Estimator::SimNlsTheta0,
                Estimator::Fmols,
                Estimator::FmolsTheta0,
            ],
            Self::Coverage4 => vec![Estimator::Coverage, Estimator::CoverageOmega, Estimator::Length],
            Self::Kpss5 => vec![Estimator::Kpss, Estimator::KpssTheta0],
            Self::Power => vec![Estimator::SimNls],
        }
    }

    pub fn default_scope(self) -> Scope {
        match self {
            Self::Power => Scope {
                settings: SerialSetting::ALL.to_vec(),
                rhos: vec![0.5],
                t_lens: vec![100, 200, 300],
            },
            Self::Table1 => Scope {
                settings: vec![SerialSetting::A],
                rhos: vec![0.0],
                t_lens: vec![100, 200],
            },
            _ => Scope {
                settings: SerialSetting::ALL.to_vec(),
                rhos: vec![0.0, 0.25, 0.5],
                t_lens: vec![100, 200, 500],
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    SimNls,
    SimNlsTheta0,
    Fmols,
    FmolsTheta0,
    Coverage,
    CoverageOmega,
    Length,
    Kpss,
    KpssTheta0,
    SpuriousT,
}

impl Estimator {
    pub fn label(self) -> &'static str {
        match self {
            Self::SimNls => "SimNLS",
            Self::SimNlsTheta0 => "SimNLS(theta0)",
            Self::Fmols => "FMOLS",
            Self::FmolsTheta0 => "FMOLS(theta0)",
            Self::Coverage => "Coverage",
            Self::CoverageOmega => "Coverage(Omega)",
            Self::Length => "Length",
            Self::Kpss => "KPSS",
            Self::KpssTheta0 => "KPSS(theta0)",
            Self::SpuriousT => "t-test",
        }
    }

    /// Whether the cell value is a percentage of indicator outcomes.
    fn is_rate(self) -> bool {
        !matches!(self, Self::Length)
    }
}

/// Settings x correlations x sample sizes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scope {
    pub settings: Vec<SerialSetting>,
    pub rhos: Vec<f64>,
    pub t_lens: Vec<usize>,
}

/// Parse `SETTINGS[:rho=R1,R2][:T=T1,T2]`, e.g. `A:rho=0:T=100` or `AD`.
/// Omitted parts fall back to `defaults`; `*` selects all settings.
pub fn parse_scope(text: &str, defaults: &Scope) -> Result<Scope> {
    let bad = |msg: String| GcprError::InvalidInput(format!("invalid scope `{text}`: {msg}"));
    let mut scope = defaults.clone();
    for (i, part) in text.split(':').enumerate() {
        let part = part.trim();
        if part.is_empty() {
            return Err(bad("empty component".into()));
        }
        if let Some(v) = part.strip_prefix("rho=") {
            scope.rhos = v
                .split(',')
                .map(|r| {
                    r.trim()
                        .parse::<f64>()
                        .ok()
                        .filter(|r| *r > -1.0 && *r < 1.0)
                        .ok_or_else(|| bad(format!("bad rho `{r}`")))
                })
                .collect::<Result<_>>()?;
        } else if let Some(v) = part.strip_prefix("T=") {
            scope.t_lens = v
                .split(',')
                .map(|t| {
                    t.trim()
                        .parse::<usize>()
                        .ok()
                        .filter(|t| *t >= 20)
                        .ok_or_else(|| bad(format!("bad sample size `{t}` (minimum 20)")))
                })
                .collect::<Result<_>>()?;
        } else if i == 0 {
            if part != "*" {
                let mut set = BTreeSet::new();
                for ch in part.chars().filter(|c| *c != ',') {
                    set.insert(
                        ch.to_string()
                            .parse::<SerialSetting>()
                            .map_err(|_| bad(format!("unknown setting `{ch}`")))?,
                    );
                }
                scope.settings = set.into_iter().collect();
            }
        } else {
            return Err(bad(format!("unrecognised component `{part}`")));
        }
    }
    if scope.settings.is_empty() || scope.rhos.is_empty() || scope.t_lens.is_empty() {
        return Err(bad("selects no cells".into()));
    }
    Ok(scope)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub reps: usize,
    /// Simulated draws per replication.
    pub draws: usize,
    pub seed: u64,
    pub alpha: f64,
    pub kernel: Kernel,
    pub grid: GridSpec,
    pub redraw_rotation: bool,
    pub phi2_grid: Vec<f64>,
    /// Restrict the rows computed; `None` runs the table's default rows.
    pub estimators: Option<Vec<Estimator>>,
    /// Table 1 only: trend coefficients.
    pub tau0_grid: Vec<f64>,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            reps: 2000,
            draws: 399,
            seed: 0,
            alpha: 0.05,
            kernel: Kernel::Bartlett,
            grid: GridSpec::default(),
            redraw_rotation: true,
            phi2_grid: vec![0.025, 0.05, 0.075, 0.1, 0.125, 0.15],
            estimators: None,
            tau0_grid: (0..=6).map(|k| k as f64 * 1e-4).collect(),
        }
    }
}

impl McConfig {
    /// Replication counts used in the original study.
    pub fn full_scale(mut self) -> Self {
        self.reps = 25_000;
        self.draws = 999;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub setting: SerialSetting,
    pub rho: f64,
    pub t_len: usize,
    pub row: Estimator,
    /// `phi2` for power curves, `tau0` for the spurious-trend table.
    pub param: Option<f64>,
    /// Percentage for rates, average for lengths.
    pub value: f64,
    pub se: f64,
    pub reps_used: usize,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableReport {
    pub kind: TableKind,
    pub scope: Scope,
    pub config: McConfig,
    pub cells: Vec<Cell>,
}

impl TableReport {
    pub fn cell(&self, setting: SerialSetting, rho: f64, t_len: usize, row: Estimator) -> Option<&Cell> {
        self.cells
            .iter()
            .find(|c| c.setting == setting && c.rho == rho && c.t_len == t_len && c.row == row && c.param.is_none())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("table,setting,rho,T,row,param,value,se,reps,failures\n");
        for c in &self.cells {
            let _ = writeln!(
                out,
                "{:?},{},{},{},{},{},{},{},{},{}",
                self.kind,
                c.setting,
                c.rho,
                c.t_len,
                c.row.label(),
                c.param.map(|p| p.to_string()).unwrap_or_default(),
                c.value,
                c.se,
                c.reps_used,
                c.failures
            );
        }
        out
    }

    /// `phi2,power,T` rows (plus setting and standard error) for power curves.
    pub fn power_csv(&self) -> String {
        let mut out = String::from("phi2,power,T,setting,rho,se\n");
        for c in self.cells.iter().filter(|c| c.param.is_some()) {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                c.param.unwrap_or_default(),
                c.value,
                c.t_len,
                c.setting,
                c.rho,
                c.se
            );
        }
        out
    }

    /// Plain-text layout: one block per sample size, rows per estimator,
    /// columns per setting and correlation.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:?}: reps={} draws={} seed={} alpha={}",
            self.kind, self.config.reps, self.config.draws, self.config.seed, self.config.alpha
        );
        match self.kind {
            TableKind::Table1 | TableKind::Power => {
                let params: Vec<f64> = dedup_f64(self.cells.iter().filter_map(|c| c.param));
                let mut header = format!("{:<24}", if self.kind == TableKind::Table1 { "tau0" } else { "phi2" });
                for p in &params {
                    let _ = write!(header, "{:>10}", format!("{p}"));
                }
                let _ = writeln!(out, "{header}");
                let mut keys: Vec<(SerialSetting, u64, usize)> = self
                    .cells
                    .iter()
                    .map(|c| (c.setting, c.rho.to_bits(), c.t_len))
                    .collect();
                keys.sort_by_key(|k| (k.0, k.2));
                keys.dedup();
                for (s, rho, t) in keys {
                    let label = if self.kind == TableKind::Table1 {
                        format!("T={t}")
                    } else {
                        format!("({s}) rho={} T={t}", f64::from_bits(rho))
                    };
                    let mut line = format!("{label:<24}");
                    for p in &params {
                        let v = self
                            .cells
                            .iter()
                            .find(|c| c.setting == s && c.rho.to_bits() == rho && c.t_len == t && c.param == Some(*p));
                        let _ = write!(line, "{:>10}", v.map(|c| format!("{:.2}", c.value)).unwrap_or_default());
                    }
                    let _ = writeln!(out, "{line}");
                }
            }
            _ => {
                let cols: Vec<(SerialSetting, f64)> = self
                    .scope
                    .settings
                    .iter()
                    .flat_map(|&s| self.scope.rhos.iter().map(move |&r| (s, r)))
                    .collect();
                let mut header = format!("{:<18}", "");
                for (s, r) in &cols {
                    let _ = write!(header, "{:>10}", format!("({s}) {r:.2}"));
                }
                let rows = self
                    .config
                    .estimators
                    .clone()
                    .unwrap_or_else(|| self.kind.default_estimators());
                for &t in &self.scope.t_lens {
                    let _ = writeln!(out, "T={t}");
                    let _ = writeln!(out, "{header}");
                    for &row in &rows {
                        let mut line = format!("{:<18}", row.label());
                        for &(s, r) in &cols {
                            let v = self.cell(s, r, t, row);
                            let _ = write!(line, "{:>10}", v.map(|c| format!("{:.2}", c.value)).unwrap_or_default());
                        }
                        let _ = writeln!(out, "{line}");
                    }
                }
            }
        }
        out
    }
}

fn dedup_f64(it: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut v: Vec<f64> = it.collect();
    v.sort_by(|a, b| a.total_cmp(b));
    v.dedup();
    v
}

fn summarize(values: &[Option<f64>], rate: bool) -> (f64, f64, usize, usize) {
    let ok: Vec<f64> = values.iter().flatten().copied().collect();
    let n = ok.len();
    let failures = values.len() - n;
    if n == 0 {
        return (f64::NAN, f64::NAN, 0, failures);
    }
    let mean = ok.iter().sum::<f64>() / n as f64;
    if rate {
        let se = (mean * (1.0 - mean) / n as f64).sqrt();
        (100.0 * mean, 100.0 * se, n, failures)
    } else {
        let var = if n > 1 {
            ok.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64
        } else {
            0.0
        };
        (mean, (var / n as f64).sqrt(), n, failures)
    }
}

fn indicator(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

/// Everything a replication needs, computed on demand.
struct Replication<'a> {
    cfg: &'a McConfig,
    dgp: DgpConfig,
    spec: ModelSpec,
    spec0: ModelSpec,
    data: Dataset,
    a: Matrix2<f64>,
    seed: u64,
    nls: Option<Result<(GcprFit, LrvSet)>>,
    ols0: Option<Result<(GcprFit, LrvSet)>>,
}

impl<'a> Replication<'a> {
    fn fit_with_lrv(&self, spec: &ModelSpec) -> Result<(GcprFit, LrvSet)> {
        let fit = fit_gcpr(spec, &self.data, &self.cfg.grid)?;
        let v = vector_series(&fit.residuals, &self.data, SeriesStart::Second)?;
        let lrv = estimate_lrv(&v, self.cfg.kernel, Bandwidth::Auto)?;
        Ok((fit, lrv))
    }

    fn nls(&mut self) -> Result<(GcprFit, LrvSet)> {
        if self.nls.is_none() {
            let r = self.fit_with_lrv(&self.spec);
            self.nls = Some(r);
        }
        clone_result(self.nls.as_ref().expect("set"))
    }

    fn ols0(&mut self) -> Result<(GcprFit, LrvSet)> {
        if self.ols0.is_none() {
            let r = self.fit_with_lrv(&self.spec0);
            self.ols0 = Some(r);
        }
        clone_result(self.ols0.as_ref().expect("set"))
    }

    fn sim(&self, fit: &GcprFit, lrv: &LrvSet, tag: u64) -> Result<crate::siminf::SimDraws> {
        let cfg = SimConfig {
            draws: self.cfg.draws,
            alpha: self.cfg.alpha,
            seed: mix_seed(&[self.seed, tag]),
            ..SimConfig::default()
        };
        run_sim_inference(fit, lrv, &cfg)
    }

    fn phi2_index(spec: &ModelSpec) -> Result<usize> {
        spec.coordinate_index(Coordinate::Phi { regressor: 0, power: 2 })
    }

    fn sim_test(&mut self, theta0: bool) -> Result<f64> {
        let (fit, lrv) = if theta0 { self.ols0()? } else { self.nls()? };
        let draws = self.sim(&fit, &lrv, if theta0 { 2 } else { 1 })?;
        let k = Self::phi2_index(&fit.spec)?;
        let t = test_coefficient(&draws, &fit, k, 0.0, Sides::TwoSided, self.cfg.alpha)?;
        Ok(indicator(t.reject))
    }

    fn fmols_test(&mut self, theta0: bool) -> Result<f64> {
        let (fit, lrv) = if theta0 { self.ols0()? } else { self.nls()? };
        let source = if theta0 {
            ThetaSource::Supplied
        } else {
            ThetaSource::Estimated
        };
        let fm = fmols_fit(&self.spec, &self.data, &fit.params.theta, source, &lrv)?;
        let t = fmols_t_stat_phi(&fm, &lrv, 0, 2)?;
        let z = Normal::new(0.0, 1.0)
            .expect("valid")
            .inverse_cdf(1.0 - self.cfg.alpha / 2.0);
        Ok(indicator(t.abs() > z))
    }

    /// `(covers, length)` of the trend-power interval.
    fn interval(&mut self, true_omega: bool) -> Result<(f64, f64)> {
        let (fit, est_lrv) = self.nls()?;
        let lrv = if true_omega {
            true_lrv(&self.a, self.dgp.rho)?
        } else {
            est_lrv
        };
        let draws = self.sim(&fit, &lrv, if true_omega { 4 } else { 3 })?;
        let k = fit.spec.coordinate_index(Coordinate::Theta(2))?;
        let ci = confidence_interval(&draws, &fit, k, self.cfg.alpha, None)?;
        let covers = ci.lower <= self.dgp.theta0 && self.dgp.theta0 <= ci.upper;
        Ok((indicator(covers), ci.upper - ci.lower))
    }

    fn kpss(&mut self, theta0: bool) -> Result<f64> {
        let (fit, lrv) = if theta0 { self.ols0()? } else { self.nls()? };
        let r = run_kpss(&fit, &self.data, &lrv, self.cfg.alpha, None)?;
        Ok(indicator(r.reject))
    }

    fn evaluate(&mut self, e: Estimator) -> Option<f64> {
        let r = match e {
            Estimator::SimNls => self.sim_test(false),
            Estimator::SimNlsTheta0 => self.sim_test(true),
            Estimator::Fmols => self.fmols_test(false),
            Estimator::FmolsTheta0 => self.fmols_test(true),
            Estimator::Coverage => self.interval(false).map(|r| r.0),
            Estimator::CoverageOmega => self.interval(true).map(|r| r.0),
            Estimator::Length => self.interval(false).map(|r| r.1),
            Estimator::Kpss => self.kpss(false),
            Estimator::KpssTheta0 => self.kpss(true),
            Estimator::SpuriousT => Err(GcprError::InvalidInput("not a table-2..5 row".into())),
        };
        r.ok()
    }
}

fn clone_result<T: Clone>(r: &Result<T>) -> Result<T> {
    match r {
        Ok(v) => Ok(v.clone()),
        Err(e) => Err(GcprError::Optimizer(e.to_string())),
    }
}

fn rep_seed(cfg: &McConfig, kind: TableKind, s: SerialSetting, rho: f64, t: usize, rep: u64) -> u64 {
    mix_seed(&[cfg.seed, kind.id(), s.index(), rho.to_bits(), t as u64, rep])
}

fn gcpr_spec() -> ModelSpec {
    ModelSpec::m3()
}

/// Run a table-2/4/5 or power experiment over a scope.
pub fn table_experiment(kind: TableKind, scope: &Scope, cfg: &McConfig) -> Result<TableReport> {
    if kind == TableKind::Table1 {
        return table1_experiment(scope, cfg);
    }
    if cfg.reps == 0 {
        return Err(GcprError::InvalidInput("at least one replication is required".into()));
    }
    let rows = cfg.estimators.clone().unwrap_or_else(|| kind.default_estimators());
    let spec = gcpr_spec();
    let mut cells = Vec::new();
    for &setting in &scope.settings {
        for &rho in &scope.rhos {
            for &t_len in &scope.t_lens {
                let dgp = DgpConfig {
                    redraw_rotation: cfg.redraw_rotation,
                    ..DgpConfig::cell(setting, rho, t_len)
                };
                let spec0 = spec.with_fixed_powers(&[0.0, 1.0, dgp.theta0])?;
                let fixed_a = {
                    let mut rng = stream_rng(rep_seed(cfg, kind, setting, rho, t_len, u64::MAX), 0);
                    draw_var_matrix(setting, &mut rng)
                };
                let phis: Vec<Option<f64>> = if kind == TableKind::Power {
                    cfg.phi2_grid.iter().map(|&p| Some(p)).collect()
                } else {
                    vec![None]
                };
                let outcomes: Vec<Vec<Vec<Option<f64>>>> = (0..cfg.reps as u64)
                    .into_par_iter()
                    .map(|rep| {
                        let seed = rep_seed(cfg, kind, setting, rho, t_len, rep);
                        let mut rng = stream_rng(seed, 0);
                        let a = if dgp.redraw_rotation {
                            draw_var_matrix(setting, &mut rng)
                        } else {
                            fixed_a
                        };
                        let (u, v) = generate_var1_errors(&a, rho, t_len, dgp.presample, &mut rng);
                        phis.iter()
                            .map(|phi| {
                                let mut d = dgp.clone();
                                if let Some(p) = phi {
                                    d.phi0[1] = *p;
                                }
                                let Ok(data) = build_sample(&d, &u, &v) else {
                                    return vec![None; rows.len()];
                                };
                                let mut r = Replication {
                                    cfg,
                                    dgp: d,
                                    spec: spec.clone(),
                                    spec0: spec0.clone(),
                                    data,
                                    a,
                                    seed,
                                    nls: None,
                                    ols0: None,
                                };
                                rows.iter().map(|&e| r.evaluate(e)).collect()
                            })
                            .collect()
                    })
                    .collect();
                for (pi, phi) in phis.iter().enumerate() {
                    for (ri, &row) in rows.iter().enumerate() {
                        let values: Vec<Option<f64>> = outcomes.iter().map(|o| o[pi][ri]).collect();
                        let (value, se, used, failures) = summarize(&values, row.is_rate());
                        cells.push(Cell {
                            setting,
                            rho,
                            t_len,
                            row,
                            param: *phi,
                            value,
                            se,
                            reps_used: used,
                            failures,
                        });
                    }
                }
            }
        }
    }
    Ok(TableReport {
        kind,
        scope: scope.clone(),
        config: cfg.clone(),
        cells,
    })
}

/// One-sided t-test of `phi2 >= 0` in `y = c1 + c2 t + c3 x + c4 x^2` when the
/// data follow `y = -tau0 t^2 + u` with an independent random walk `x`.
/// Returns whether the null is rejected at the 5% normal quantile.
pub fn spurious_trend_rejects(tau0: f64, t_len: usize, rng: &mut impl Rng, z: f64) -> Result<bool> {
    let tf = t_len as f64;
    let root = tf.sqrt();
    let mut x = 0.0;
    let mut y = Vec::with_capacity(t_len);
    let mut z_mat = DMatrix::zeros(t_len, 4);
    for i in 0..t_len {
        let t = (i + 1) as f64;
        let u: f64 = rng.sample(StandardNormal);
        let v: f64 = rng.sample(StandardNormal);
        x += v;
        y.push(-tau0 * t * t + u);
        z_mat[(i, 0)] = 1.0;
        z_mat[(i, 1)] = t / tf;
        z_mat[(i, 2)] = x / root;
        z_mat[(i, 3)] = (x / root).powi(2);
    }
    let y = nalgebra::DVector::from_vec(y);
    let f = OrthoFactor::new(&z_mat)?;
    let c = f.solve_r(&f.q_tr_mul(&y))?;
    let rss = (&y - &z_mat * &c).norm_squared();
    let var = rss / tf * f.inverse_gram_diagonal()?[3];
    Ok(c[3] / var.sqrt() < z)
}

/// Spurious-trend t-test over `cfg.tau0_grid` x `scope.t_lens`.
pub fn table1_experiment(scope: &Scope, cfg: &McConfig) -> Result<TableReport> {
    if cfg.reps < 100 {
        return Err(GcprError::InvalidInput(format!(
            "the t-test table needs at least 100 replications, got {}",
            cfg.reps
        )));
    }
    let z = Normal::new(0.0, 1.0).expect("valid").inverse_cdf(cfg.alpha);
    let mut cells = Vec::new();
    for &t_len in &scope.t_lens {
        for &tau0 in &cfg.tau0_grid {
            let values: Vec<Option<f64>> = (0..cfg.reps as u64)
                .into_par_iter()
                .map(|rep| {
                    let seed = mix_seed(&[cfg.seed, TableKind::Table1.id(), tau0.to_bits(), t_len as u64, rep]);
                    let mut rng = stream_rng(seed, 0);
                    spurious_trend_rejects(tau0, t_len, &mut rng, z).ok().map(indicator)
                })
                .collect();
            let (value, se, used, failures) = summarize(&values, true);
            cells.push(Cell {
                setting: SerialSetting::A,
                rho: 0.0,
                t_len,
                row: Estimator::SpuriousT,
                param: Some(tau0),
                value,
                se,
                reps_used: used,
                failures,
            });
        }
    }
    Ok(TableReport {
        kind: TableKind::Table1,
        scope: scope.clone(),
        config: cfg.clone(),
        cells,
    })
}
