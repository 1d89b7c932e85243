use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::Parser;
use serde::Serialize;

use gcpr::data::Dataset;
use gcpr::error::{GcprError, Result};
use gcpr::kpss::{run_kpss, KpssResult};
use gcpr::lrv::{estimate_lrv, residual_vector_series, Bandwidth, Kernel, LrvSet};
use gcpr::model::{ModelSpec, ParamSpace, TrendTerm};
use gcpr::montecarlo::{parse_scope, table_experiment, McConfig, TableKind, TableReport};
use gcpr::nls::{
    fit_gcpr, profile_csv, rss_profile_stochastic_power, rss_profile_trend, GcprFit, GridSpec, ProfilePoint,
};
use gcpr::siminf::{
    confidence_interval, run_sim_inference, stars, test_coefficient, ConfidenceInterval, Sides, SimConfig,
};

use crate::manifest::{DatasetRef, RunManifest};
use crate::{Cli, Command, Format, KpssArgs, LrvArgs, McArgs, ModelArgs, OutputArgs, Preset, ProfileArgs, ProfileKind};

/// Draw counts below this give unusable tail quantiles.
const MIN_DRAWS: usize = 99;

/// Command-line arguments as recorded in manifests: `--threads` is dropped
/// because results do not depend on it.
pub fn replay_argv(args: &[String]) -> Vec<String> {
    let mut out = Vec::with_capacity(args.len());
    let mut skip = false;
    for a in args {
        if skip {
            skip = false;
            continue;
        }
        if a == "--threads" {
            skip = true;
            continue;
        }
        if a.starts_with("--threads=") {
            continue;
        }
        out.push(a.clone());
    }
    out
}

pub fn run(command: Command, argv: Vec<String>) -> Result<()> {
    match command {
        Command::Fit(a) => fit(&a.model, &a.output, argv),
        Command::Infer(a) => infer(&a, argv),
        Command::Kpss(a) => kpss(&a, argv),
        Command::Mc(a) => mc(&a, argv),
        Command::Profile(a) => profile(&a, argv),
        Command::Replay(a) => replay(&a.report),
    }
}

fn replay(path: &Path) -> Result<()> {
    let text = std::fs::read_to_string(path)?;
    let manifest: RunManifest = if let Some(rest) = text.strip_prefix("# manifest: ") {
        let line = rest.lines().next().unwrap_or_default();
        serde_json::from_str(line).map_err(|e| GcprError::InvalidInput(format!("bad manifest: {e}")))?
    } else {
        let v: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| GcprError::InvalidInput(format!("bad report: {e}")))?;
        serde_json::from_value(v.get("manifest").cloned().unwrap_or_default())
            .map_err(|e| GcprError::InvalidInput(format!("bad manifest: {e}")))?
    };
    let mut full = vec!["gcpr".to_string()];
    full.extend(manifest.argv.iter().cloned());
    let cli = Cli::try_parse_from(&full).map_err(|e| GcprError::InvalidInput(e.to_string()))?;
    if matches!(cli.command, Command::Replay(_)) {
        return Err(GcprError::InvalidInput("a manifest cannot replay a replay".into()));
    }
    run(cli.command, manifest.argv)
}

fn parse_trend(s: &str) -> Result<TrendTerm> {
    let s = s.trim();
    if s.eq_ignore_ascii_case("free") {
        return Ok(TrendTerm::Free);
    }
    s.parse::<f64>()
        .map(TrendTerm::Fixed)
        .map_err(|_| GcprError::InvalidInput(format!("trend power `{s}` is neither a number nor `free`")))
}

fn build_spec(args: &ModelArgs, data: &Dataset) -> Result<ModelSpec> {
    let preset = args.model.map(|p| match p {
        Preset::M1 => ModelSpec::m1(),
        Preset::M2 => ModelSpec::m2(),
        Preset::M3 => ModelSpec::m3(),
        Preset::M4 => ModelSpec::m4(),
    });
    let trends = match (&args.trend, &preset) {
        (Some(t), _) => t.iter().map(|s| parse_trend(s)).collect::<Result<Vec<_>>>()?,
        (None, Some(p)) => p.trends.clone(),
        (None, None) => {
            return Err(GcprError::InvalidInput(
                "specify a model with --model or --trend/--xpow".into(),
            ))
        }
    };
    let orders = match (&args.xpow, &preset) {
        (Some(x), _) => x.clone(),
        (None, Some(p)) => p.regressor_orders.clone(),
        (None, None) if data.n_regressors() == 0 => Vec::new(),
        (None, None) => {
            return Err(GcprError::InvalidInput(format!(
                "the data have {} regressors; give their polynomial orders with --xpow",
                data.n_regressors()
            )))
        }
    };
    if orders.len() != data.n_regressors() {
        return Err(GcprError::DimensionMismatch(format!(
            "model has {} regressors, data have {}",
            orders.len(),
            data.n_regressors()
        )));
    }
    let d = ParamSpace::default();
    let space = ParamSpace {
        lower: args.theta_lower.unwrap_or(d.lower),
        upper: args.theta_upper.unwrap_or(d.upper),
        min_gap: args.min_gap.unwrap_or(d.min_gap),
    };
    ModelSpec::new(trends, orders, space)
}

fn grid_spec(args: &ModelArgs) -> GridSpec {
    GridSpec {
        step: args.grid_step,
        ..GridSpec::default()
    }
}

struct Loaded {
    data: Dataset,
    spec: ModelSpec,
    manifest: RunManifest,
}

fn load(command: &str, args: &ModelArgs, argv: Vec<String>) -> Result<Loaded> {
    let data = Dataset::from_csv_path(&args.data)?;
    let spec = build_spec(args, &data)?;
    let mut manifest = RunManifest::new(command, argv);
    manifest.dataset = Some(DatasetRef::of(&args.data)?);
    manifest.spec = Some(spec.clone());
    Ok(Loaded { data, spec, manifest })
}

fn lrv_options(args: &LrvArgs) -> Result<(Kernel, Bandwidth)> {
    let kernel: Kernel = args.kernel.parse()?;
    let bw = if args.bandwidth.eq_ignore_ascii_case("auto") {
        Bandwidth::Auto
    } else {
        let b: f64 = args
            .bandwidth
            .parse()
            .ok()
            .filter(|b: &f64| *b > 0.0 && b.is_finite())
            .ok_or_else(|| {
                GcprError::InvalidInput(format!(
                    "bandwidth `{}` is not `auto` or a positive number",
                    args.bandwidth
                ))
            })?;
        Bandwidth::Fixed(b)
    };
    Ok((kernel, bw))
}

fn estimate(fit: &GcprFit, data: &Dataset, args: &LrvArgs) -> Result<LrvSet> {
    let (kernel, bw) = lrv_options(args)?;
    if data.n_regressors() == 0 {
        return Err(GcprError::InvalidInput(
            "long-run covariances need at least one integrated regressor".into(),
        ));
    }
    estimate_lrv(&residual_vector_series(fit, data)?, kernel, bw)
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(name);
    std::fs::write(&path, contents)?;
    Ok(path)
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("report serializes");
    s.push('\n');
    s
}

/// Print to stdout and, with `--out`, write `<name>.json` and `<name>.txt`.
fn emit<T: Serialize>(out: &OutputArgs, name: &str, report: &T, manifest: &RunManifest, text: &str) -> Result<()> {
    let json = to_json(report);
    if let Some(dir) = &out.out {
        write_file(dir, &format!("{name}.json"), &json)?;
        write_file(
            dir,
            &format!("{name}.txt"),
            &format!("{}{text}", manifest.comment_line()),
        )?;
    }
    match out.format {
        Format::Json => print!("{json}"),
        Format::Text => print!("{text}"),
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct Estimate {
    label: String,
    value: f64,
}

#[derive(Debug, Serialize)]
struct FitSummary {
    theta: Vec<f64>,
    estimates: Vec<Estimate>,
    rss: f64,
    n_obs: usize,
    converged: bool,
    bracket: Option<[f64; 2]>,
    evaluations: usize,
}

impl FitSummary {
    fn of(fit: &GcprFit) -> Self {
        let stacked = fit.params.stacked(&fit.spec);
        Self {
            theta: fit.params.theta.clone(),
            estimates: fit
                .spec
                .param_labels()
                .into_iter()
                .zip(stacked.iter())
                .map(|(label, &value)| Estimate { label, value })
                .collect(),
            rss: fit.rss,
            n_obs: fit.residuals.len(),
            converged: fit.converged,
            bracket: fit.bracket,
            evaluations: fit.evaluations,
        }
    }

    fn text(&self, spec: &ModelSpec) -> String {
        let mut s = String::new();
        let trends: Vec<String> = spec
            .trends
            .iter()
            .map(|t| match t {
                TrendTerm::Fixed(p) => format!("{p}"),
                TrendTerm::Free => "free".into(),
            })
            .collect();
        let _ = writeln!(
            s,
            "trends: [{}]  xpow: {:?}  T = {}",
            trends.join(", "),
            spec.regressor_orders,
            self.n_obs
        );
        for e in &self.estimates {
            let _ = writeln!(s, "{:<10} {:>16.6}", e.label, e.value);
        }
        let _ = writeln!(s, "{:<10} {:>16.6}", "rss", self.rss);
        s
    }
}

#[derive(Debug, Serialize)]
struct FitReport {
    manifest: RunManifest,
    fit: FitSummary,
    residuals_path: Option<String>,
}

fn fit(args: &ModelArgs, out: &OutputArgs, argv: Vec<String>) -> Result<()> {
    let Loaded { data, spec, manifest } = load("fit", args, argv)?;
    let fit = fit_gcpr(&spec, &data, &grid_spec(args))?;
    let residuals_path = match &out.out {
        Some(dir) => {
            let mut csv = manifest.comment_line();
            csv.push_str("t,residual\n");
            for (t, r) in data.labels.iter().zip(&fit.residuals) {
                let _ = writeln!(csv, "{t},{r}");
            }
            Some(write_file(dir, "residuals.csv", &csv)?.display().to_string())
        }
        None => None,
    };
    let summary = FitSummary::of(&fit);
    let text = summary.text(&spec);
    let report = FitReport {
        manifest: manifest.clone(),
        fit: summary,
        residuals_path,
    };
    emit(out, "fit", &report, &manifest, &text)
}

#[derive(Debug, Serialize)]
struct TestLine {
    label: String,
    statistic: f64,
    p_value: f64,
    stars: String,
    reject: bool,
}

#[derive(Debug, Serialize)]
struct InferReport {
    manifest: RunManifest,
    fit: FitSummary,
    lrv: LrvSet,
    path_len: usize,
    retried_draws: usize,
    intervals: Vec<ConfidenceInterval>,
    tests: Vec<TestLine>,
}

fn infer(args: &crate::InferArgs, argv: Vec<String>) -> Result<()> {
    if args.draws < MIN_DRAWS {
        return Err(GcprError::InvalidInput(format!(
            "at least {MIN_DRAWS} draws are required, got {}",
            args.draws
        )));
    }
    let Loaded {
        data,
        spec,
        mut manifest,
    } = load("infer", &args.model, argv)?;
    let fit = fit_gcpr(&spec, &data, &grid_spec(&args.model))?;
    let lrv = estimate(&fit, &data, &args.lrv)?;
    let cfg = SimConfig {
        draws: args.draws,
        path_len: args.path_len,
        alpha: args.alpha,
        seed: args.seed,
        ..SimConfig::default()
    };
    manifest.sim_config = Some(cfg.clone());
    manifest.seed = Some(args.seed);
    let draws = run_sim_inference(&fit, &lrv, &cfg)?;
    let nf = spec.n_free();
    let mut intervals = Vec::new();
    let mut tests = Vec::new();
    for k in 0..spec.n_params() {
        let floor = (k < nf).then_some(spec.space.lower);
        intervals.push(confidence_interval(&draws, &fit, k, args.alpha, floor)?);
        if k >= nf {
            let t = test_coefficient(&draws, &fit, k, 0.0, Sides::TwoSided, args.alpha)?;
            tests.push(TestLine {
                label: t.label,
                statistic: t.statistic,
                p_value: t.p_value,
                stars: stars(t.p_value).to_string(),
                reject: t.reject,
            });
        }
    }
    let summary = FitSummary::of(&fit);
    let mut text = summary.text(&spec);
    let _ = writeln!(
        text,
        "\n{:<10} {:>14} {:>14} {:>14} {:>10}",
        "coef",
        "estimate",
        format!("lower {:.0}%", 100.0 * (1.0 - args.alpha)),
        "upper",
        "p-value"
    );
    for ci in &intervals {
        let test = tests.iter().find(|t| t.label == ci.label);
        let _ = writeln!(
            text,
            "{:<10} {:>14.6} {:>14.6}{} {:>13.6} {:>10}",
            ci.label,
            ci.estimate,
            ci.lower,
            if ci.truncated { "*" } else { " " },
            ci.upper,
            test.map(|t| format!("{:.4}{}", t.p_value, t.stars)).unwrap_or_default()
        );
    }
    if intervals.iter().any(|c| c.truncated) {
        let _ = writeln!(
            text,
            "* lower endpoint truncated at the parameter-space bound {}",
            spec.space.lower
        );
    }
    let report = InferReport {
        manifest: manifest.clone(),
        fit: summary,
        lrv,
        path_len: draws.path_len,
        retried_draws: draws.retried,
        intervals,
        tests,
    };
    emit(&args.output, "infer", &report, &manifest, &text)
}

#[derive(Debug, Serialize)]
struct KpssReport {
    manifest: RunManifest,
    fit: FitSummary,
    test: KpssResult,
}

fn kpss(args: &KpssArgs, argv: Vec<String>) -> Result<()> {
    let Loaded {
        data,
        spec,
        mut manifest,
    } = load("kpss", &args.model, argv)?;
    let fit = fit_gcpr(&spec, &data, &grid_spec(&args.model))?;
    let lrv = estimate(&fit, &data, &args.lrv)?;
    let result = run_kpss(&fit, &data, &lrv, args.alpha, args.q_grid.as_deref())?;
    manifest.q_grid = Some(result.q_grid.clone());
    let summary = FitSummary::of(&fit);
    let mut text = summary.text(&spec);
    let _ = writeln!(
        text,
        "\nblock size q = {}  blocks M = {}\nmax statistic = {:.6}  critical value ({}%) = {:.6}  {}",
        result.q_chosen,
        result.blocks,
        result.max_stat,
        100.0 * args.alpha,
        result.critical,
        if result.reject { "reject" } else { "do not reject" }
    );
    let report = KpssReport {
        manifest: manifest.clone(),
        fit: summary,
        test: result,
    };
    emit(&args.output, "kpss", &report, &manifest, &text)
}

#[derive(Debug, Serialize)]
struct McReport<'a> {
    manifest: RunManifest,
    table: &'a TableReport,
}

fn mc(args: &McArgs, argv: Vec<String>) -> Result<()> {
    let kind = TableKind::parse(&args.table)?;
    let scope = match &args.scope {
        Some(s) => parse_scope(s, &kind.default_scope())?,
        None => kind.default_scope(),
    };
    let mut cfg = McConfig {
        seed: args.seed,
        alpha: args.alpha,
        redraw_rotation: !args.fixed_rotation,
        ..McConfig::default()
    };
    if args.full_scale {
        cfg = cfg.full_scale();
    }
    if let Some(r) = args.reps {
        cfg.reps = r;
    }
    if let Some(j) = args.draws {
        cfg.draws = j;
    }
    if kind != TableKind::Table1 && cfg.draws < MIN_DRAWS {
        return Err(GcprError::InvalidInput(format!(
            "at least {MIN_DRAWS} draws are required, got {}",
            cfg.draws
        )));
    }
    let mut manifest = RunManifest::new("mc", argv);
    manifest.seed = Some(args.seed);
    let report = table_experiment(kind, &scope, &cfg)?;
    let text = report.to_text();
    let name = match kind {
        TableKind::Power => "power".to_string(),
        _ => format!("table{}", args.table),
    };
    if let Some(dir) = &args.output.out {
        write_file(
            dir,
            &format!("{name}.csv"),
            &format!("{}{}", manifest.comment_line(), report.to_csv()),
        )?;
        if kind == TableKind::Power {
            write_file(
                dir,
                "power_curve.csv",
                &format!("{}{}", manifest.comment_line(), report.power_csv()),
            )?;
        }
    }
    let wrapped = McReport {
        manifest: manifest.clone(),
        table: &report,
    };
    emit(&args.output, &name, &wrapped, &manifest, &text)
}

fn parse_grid(s: &str) -> Result<Vec<f64>> {
    let bad = || GcprError::InvalidInput(format!("grid `{s}` is not `lo:hi:step` or a comma list"));
    if s.contains(':') {
        let parts: Vec<f64> = s
            .split(':')
            .map(|p| p.trim().parse::<f64>().map_err(|_| bad()))
            .collect::<Result<_>>()?;
        let [lo, hi, step] = parts[..] else {
            return Err(bad());
        };
        let valid = step > 0.0 && hi >= lo;
        if !valid {
            return Err(bad());
        }
        let n = ((hi - lo) / step + 1e-9).floor() as usize;
        Ok((0..=n)
            .map(|i| ((lo + i as f64 * step) * 1e10).round() / 1e10)
            .collect())
    } else {
        s.split(',')
            .map(|p| p.trim().parse::<f64>().map_err(|_| bad()))
            .collect()
    }
}

fn profile(args: &ProfileArgs, argv: Vec<String>) -> Result<()> {
    let grid = parse_grid(&args.grid)?;
    let data = Dataset::from_csv_path(&args.model.data)?;
    let mut manifest = RunManifest::new("profile", argv);
    manifest.dataset = Some(DatasetRef::of(&args.model.data)?);
    let points: Vec<ProfilePoint> = match args.kind {
        ProfileKind::Trend => {
            let spec = build_spec(&args.model, &data)?;
            manifest.spec = Some(spec.clone());
            rss_profile_trend(&spec, &data, &grid)?
        }
        ProfileKind::Xpow => {
            let p = rss_profile_stochastic_power(&data, &grid)?;
            if p.used_abs {
                eprintln!("note: the regressor takes non-positive values; |x|^theta was used");
            }
            p.points
        }
    };
    let csv = profile_csv(&points);
    match &args.out {
        Some(path) => {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            std::fs::write(path, format!("{}{csv}", manifest.comment_line()))?;
        }
        None => print!("{csv}"),
    }
    Ok(())
}
