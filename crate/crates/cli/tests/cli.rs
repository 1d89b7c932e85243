use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use gcpr::montecarlo::{generate_gcpr_sample, DgpConfig, SerialSetting};
use gcpr::rng::stream_rng;
use serde_json::Value;
use tempfile::TempDir;

fn gcpr(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gcpr"))
        .args(args)
        .current_dir(dir)
        .env_remove("GCPR_THREADS")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn ok(o: &Output) -> String {
    assert!(o.status.success(), "exit {:?}\n{}", o.status.code(), stderr(o));
    stdout(o)
}

/// Workspace with a simulated sample in `sample.csv`.
fn workspace(t_len: usize) -> TempDir {
    let dir = tempfile::tempdir().unwrap();
    let cfg = DgpConfig::cell(SerialSetting::A, 0.0, t_len);
    let (data, _) = generate_gcpr_sample(&cfg, None, &mut stream_rng(31, 0)).unwrap();
    std::fs::write(dir.path().join("sample.csv"), data.to_csv_string()).unwrap();
    dir
}

fn json(o: &Output) -> Value {
    serde_json::from_str(&ok(o)).expect("valid JSON on stdout")
}

fn schema(name: &str) -> Value {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("schemas")
        .join(format!("{name}.schema.json"));
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

/// Checks the subset of JSON Schema used by the shipped schemas: `type`,
/// `required`, `properties`, `items`, `enum` and `$ref` to a sibling file or
/// to a definition in `fit.schema.json`.
fn validate(value: &Value, schema: &Value, path: &str) -> Vec<String> {
    if let Some(r) = schema.get("$ref").and_then(Value::as_str) {
        let resolved = if r == "fit_summary" {
            self::schema("fit")["definitions"]["fit_summary"].clone()
        } else {
            self::schema(r)
        };
        return validate(value, &resolved, path);
    }
    let mut errs = Vec::new();
    if let Some(t) = schema.get("type") {
        let allowed: Vec<&str> = match t {
            Value::String(s) => vec![s.as_str()],
            Value::Array(a) => a.iter().filter_map(Value::as_str).collect(),
            _ => vec![],
        };
        let matches = allowed.iter().any(|t| match *t {
            "object" => value.is_object(),
            "array" => value.is_array(),
            "string" => value.is_string(),
            "number" => value.is_number(),
            "integer" => value.is_u64() || value.is_i64(),
            "boolean" => value.is_boolean(),
            "null" => value.is_null(),
            _ => false,
        });
        if !matches {
            errs.push(format!("{path}: expected {allowed:?}, got {value}"));
            return errs;
        }
    }
    if let Some(options) = schema.get("enum").and_then(Value::as_array) {
        if !options.contains(value) {
            errs.push(format!("{path}: {value} not in {options:?}"));
        }
    }
    if let Some(obj) = value.as_object() {
        for key in schema.get("required").and_then(Value::as_array).into_iter().flatten() {
            let key = key.as_str().unwrap();
            if !obj.contains_key(key) {
                errs.push(format!("{path}: missing `{key}`"));
            }
        }
        if let Some(props) = schema.get("properties").and_then(Value::as_object) {
            for (key, sub) in props {
                if let Some(v) = obj.get(key) {
                    errs.extend(validate(v, sub, &format!("{path}.{key}")));
                }
            }
        }
    }
    if let (Some(items), Some(arr)) = (schema.get("items"), value.as_array()) {
        for (i, v) in arr.iter().enumerate() {
            errs.extend(validate(v, items, &format!("{path}[{i}]")));
        }
    }
    errs
}

fn assert_schema(value: &Value, name: &str) {
    let errs = validate(value, &schema(name), "$");
    assert!(
        errs.is_empty(),
        "{name} report violates its schema:\n{}",
        errs.join("\n")
    );
}

#[test]
fn validator_rejects_mismatches() {
    let s = schema("fit");
    let errs = validate(&serde_json::json!({"manifest": {}, "fit": {"theta": "x"}}), &s, "$");
    assert!(errs.iter().any(|e| e.contains("missing `rss`")));
    assert!(errs.iter().any(|e| e.contains("$.fit.theta")));
    assert!(errs.iter().any(|e| e.contains("missing `argv`")));
}

#[test]
fn fit_m1_reports_estimates() {
    let ws = workspace(150);
    let out = json(&gcpr(
        ws.path(),
        &["fit", "sample.csv", "--model", "m1", "--format", "json"],
    ));
    assert_schema(&out, "fit");
    let labels: Vec<&str> = out["fit"]["estimates"]
        .as_array()
        .unwrap()
        .iter()
        .map(|e| e["label"].as_str().unwrap())
        .collect();
    assert_eq!(labels, ["tau1", "tau2", "phi1", "phi2"]);
    assert_eq!(out["fit"]["n_obs"], 150);
    assert_eq!(out["manifest"]["dataset"]["sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn fit_writes_report_files_and_residuals() {
    let ws = workspace(120);
    let text = ok(&gcpr(
        ws.path(),
        &["fit", "sample.csv", "--model", "m3", "--out", "res"],
    ));
    assert!(text.contains("theta3"), "{text}");
    let res = ws.path().join("res");
    let residuals = std::fs::read_to_string(res.join("residuals.csv")).unwrap();
    let mut lines = residuals.lines();
    assert!(lines.next().unwrap().starts_with("# manifest: {"));
    assert_eq!(lines.next(), Some("t,residual"));
    assert_eq!(lines.count(), 120);
    let report: Value = serde_json::from_str(&std::fs::read_to_string(res.join("fit.json")).unwrap()).unwrap();
    assert_schema(&report, "fit");
    assert!(res.join("fit.txt").exists());
}

#[test]
fn fit_m4_preset_estimates_linear_regressor() {
    let ws = workspace(150);
    let out = json(&gcpr(
        ws.path(),
        &["fit", "sample.csv", "--model", "m4", "--format", "json"],
    ));
    let labels: Vec<&str> = out["fit"]["estimates"]
        .as_array()
        .unwrap()
        .iter()
        .map(|e| e["label"].as_str().unwrap())
        .collect();
    assert_eq!(labels, ["theta3", "tau1", "tau2", "tau3", "phi1"]);
}

#[test]
fn custom_trend_list_is_accepted() {
    let ws = workspace(100);
    let out = json(&gcpr(
        ws.path(),
        &[
            "fit",
            "sample.csv",
            "--trend",
            "0,free",
            "--xpow",
            "2",
            "--format",
            "json",
        ],
    ));
    assert_eq!(out["fit"]["theta"].as_array().unwrap().len(), 2);
}

#[test]
fn malformed_csv_reports_line_number() {
    let ws = workspace(20);
    std::fs::write(ws.path().join("bad.csv"), "t,y,x1\n1,2,3\n2,4,5\n3,abc,1\n").unwrap();
    let o = gcpr(ws.path(), &["fit", "bad.csv", "--model", "m1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 4"), "{}", stderr(&o));

    std::fs::write(ws.path().join("hdr.csv"), "time,y,x1\n1,2,3\n").unwrap();
    let o = gcpr(ws.path(), &["fit", "hdr.csv", "--model", "m1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 1"));
}

#[test]
fn regressor_count_mismatch_is_rejected() {
    let ws = workspace(60);
    let o = gcpr(ws.path(), &["fit", "sample.csv", "--trend", "0,1", "--xpow", "2,1"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn infer_requires_seed_and_is_deterministic() {
    let ws = workspace(120);
    let o = gcpr(ws.path(), &["infer", "sample.csv", "--model", "m3"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--seed"));

    let args = [
        "infer",
        "sample.csv",
        "--model",
        "m3",
        "-J",
        "99",
        "--seed",
        "7",
        "--format",
        "json",
    ];
    let a = ok(&gcpr(ws.path(), &args));
    let b = ok(&gcpr(ws.path(), &args));
    assert_eq!(a, b);
    let v: Value = serde_json::from_str(&a).unwrap();
    assert_schema(&v, "infer");
    assert_eq!(v["intervals"].as_array().unwrap().len(), 6);
    assert_eq!(v["tests"].as_array().unwrap().len(), 5);
    assert_eq!(v["manifest"]["seed"], 7);

    let other = ok(&gcpr(
        ws.path(),
        &[
            "infer",
            "sample.csv",
            "--model",
            "m3",
            "-J",
            "99",
            "--seed",
            "8",
            "--format",
            "json",
        ],
    ));
    assert_ne!(a, other);
}

#[test]
fn infer_rejects_too_few_draws() {
    let ws = workspace(60);
    let o = gcpr(
        ws.path(),
        &["infer", "sample.csv", "--model", "m1", "-J", "50", "--seed", "1"],
    );
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn kpss_is_deterministic_and_matches_schema() {
    let ws = workspace(150);
    let args = ["kpss", "sample.csv", "--model", "m3", "--format", "json"];
    let a = ok(&gcpr(ws.path(), &args));
    assert_eq!(a, ok(&gcpr(ws.path(), &args)));
    let v: Value = serde_json::from_str(&a).unwrap();
    assert_schema(&v, "kpss");
    assert!(v["manifest"]["q_grid"].is_array());

    let fixed = json(&gcpr(
        ws.path(),
        &[
            "kpss",
            "sample.csv",
            "--model",
            "m3",
            "--q-grid",
            "10",
            "--format",
            "json",
        ],
    ));
    assert_eq!(fixed["test"]["q_chosen"], 10);
}

#[test]
fn kpss_on_exact_fit_exits_degenerate() {
    let ws = workspace(20);
    let mut csv = String::from("t,y,x1\n");
    let mut x = 0.0_f64;
    for t in 1..=120 {
        x += ((t * 7919) % 13) as f64 / 6.0 - 1.0;
        csv.push_str(&format!("{t},{},{x}\n", 1.0 + 0.5 * t as f64 + 2.0 * x + 0.3 * x * x));
    }
    std::fs::write(ws.path().join("exact.csv"), csv).unwrap();
    let o = gcpr(ws.path(), &["kpss", "exact.csv", "--model", "m1"]);
    assert_eq!(o.status.code(), Some(5), "{}", stderr(&o));
}

#[test]
fn mc_rejects_bad_scope_and_table() {
    let ws = workspace(20);
    for args in [
        ["mc", "--table", "2", "--scope", "Q", "--seed", "1"],
        ["mc", "--table", "2", "--scope", "A:T=5", "--seed", "1"],
        ["mc", "--table", "3", "--scope", "A", "--seed", "1"],
    ] {
        let o = gcpr(ws.path(), &args);
        assert_eq!(o.status.code(), Some(2), "{args:?}");
    }
    let o = gcpr(ws.path(), &["mc", "--table", "1", "--reps", "10", "--seed", "1"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn mc_single_cell_writes_csv() {
    let ws = workspace(20);
    let o = gcpr(
        ws.path(),
        &[
            "mc",
            "--table",
            "2",
            "--scope",
            "A:rho=0:T=100",
            "--reps",
            "8",
            "-J",
            "99",
            "--seed",
            "3",
            "--out",
            "mc",
            "--format",
            "json",
        ],
    );
    let v = json(&o);
    assert_schema(&v, "mc");
    let cells = v["table"]["cells"].as_array().unwrap();
    assert_eq!(cells.len(), 4);
    assert!(cells.iter().all(|c| c["t_len"] == 100 && c["setting"] == "A"));
    let csv = std::fs::read_to_string(ws.path().join("mc/table2.csv")).unwrap();
    let mut lines = csv.lines().skip(1);
    assert_eq!(
        lines.next(),
        Some("table,setting,rho,T,row,param,value,se,reps,failures")
    );
    assert_eq!(lines.count(), 4);
}

#[test]
fn table1_replay_reproduces_output() {
    let ws = workspace(20);
    let text = ok(&gcpr(
        ws.path(),
        &[
            "mc", "--table", "1", "--scope", "A:T=100", "--reps", "100", "--seed", "5", "--out", "t1",
        ],
    ));
    let csv_path = ws.path().join("t1/table1.csv");
    let first = std::fs::read(&csv_path).unwrap();
    assert!(String::from_utf8_lossy(&first).starts_with("# manifest: {"));

    let replayed = ok(&gcpr(ws.path(), &["replay", "t1/table1.csv"]));
    assert_eq!(replayed, text);
    assert_eq!(std::fs::read(&csv_path).unwrap(), first);

    let again = ok(&gcpr(ws.path(), &["replay", "t1/table1.json"]));
    assert_eq!(again, text);
}

#[test]
fn thread_count_does_not_change_results() {
    let ws = workspace(20);
    let base = [
        "mc",
        "--table",
        "2",
        "--scope",
        "B:rho=0.25:T=100",
        "--reps",
        "6",
        "-J",
        "99",
        "--seed",
        "9",
        "--format",
        "json",
    ];
    let run = |threads: &str| {
        let mut args = vec!["--threads", threads];
        args.extend(base);
        ok(&gcpr(ws.path(), &args))
    };
    assert_eq!(run("1"), run("4"));
    let o = gcpr(ws.path(), &["--threads", "0", "fit", "sample.csv", "--model", "m1"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn profile_grids() {
    let ws = workspace(100);
    let o = gcpr(
        ws.path(),
        &["profile", "sample.csv", "--kind", "xpow", "--grid", "0.5,1,1.5"],
    );
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));

    let single = ok(&gcpr(
        ws.path(),
        &[
            "profile",
            "sample.csv",
            "--model",
            "m3",
            "--kind",
            "trend",
            "--grid",
            "2",
        ],
    ));
    assert_eq!(single.lines().count(), 2, "{single}");

    let curve = ok(&gcpr(
        ws.path(),
        &[
            "profile",
            "sample.csv",
            "--model",
            "m3",
            "--kind",
            "trend",
            "--grid",
            "1.5:2.5:0.25",
        ],
    ));
    assert_eq!(curve.lines().count(), 6);

    ok(&gcpr(
        ws.path(),
        &[
            "profile",
            "sample.csv",
            "--kind",
            "xpow",
            "--grid",
            "1.5:2.5:0.5",
            "--out",
            "p/xpow.csv",
        ],
    ));
    let file = std::fs::read_to_string(ws.path().join("p/xpow.csv")).unwrap();
    assert!(file.starts_with("# manifest: {"));
    assert_eq!(file.lines().count(), 5);
}
