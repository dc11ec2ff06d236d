use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::{json, Value};
use tempfile::TempDir;

struct Run {
    code: i32,
    out: PathBuf,
    stderr: String,
    _dir: TempDir,
}

fn mixrank(cmd: &str, config: &Value) -> Run {
    let dir = tempfile::tempdir().unwrap();
    let config_path = dir.path().join("config.json");
    std::fs::write(&config_path, config.to_string()).unwrap();
    mixrank_raw(cmd, &config_path, dir)
}

fn mixrank_raw(cmd: &str, config_path: &Path, dir: TempDir) -> Run {
    let out = dir.path().join("out");
    let result = Command::new(env!("CARGO_BIN_EXE_mixrank"))
        .args([cmd, "--config"])
        .arg(config_path)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    Run {
        code: result.status.code().unwrap(),
        out,
        stderr: String::from_utf8_lossy(&result.stderr).into_owned(),
        _dir: dir,
    }
}

fn read(run: &Run, name: &str) -> String {
    std::fs::read_to_string(run.out.join(name)).unwrap_or_else(|e| panic!("{name}: {e}; stderr: {}", run.stderr))
}

fn csv(run: &Run, name: &str) -> (Vec<String>, Vec<Vec<String>>) {
    let text = read(run, name);
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines.map(|l| l.split(',').map(String::from).collect()).collect();
    (header, rows)
}

fn json_file(run: &Run, name: &str) -> Value {
    serde_json::from_str(&read(run, name)).unwrap()
}

fn num(s: &str) -> f64 {
    s.parse().unwrap()
}

#[test]
fn dim_small_budgets() {
    let run = mixrank(
        "dim",
        &json!({ "n": [1, 1], "sigma": 1.0, "budgets": [2, 0, 1, 3], "index_sets": true }),
    );
    assert_eq!(run.code, 0, "{}", run.stderr);
    let (header, rows) = csv(&run, "dim.csv");
    assert_eq!(header, ["J", "exact_dim", "bound", "ratio"]);
    let exact: Vec<(f64, u64)> = rows.iter().map(|r| (num(&r[0]), r[1].parse().unwrap())).collect();
    // By hand with dim W_0 = dim W_1 = 1, dim W_j = 2^{j-1}: J=2 adds (0,2), (2,0), (1,1).
    assert_eq!(exact[0], (0.0, 1));
    assert_eq!(exact[1], (1.0, 3));
    assert_eq!(exact[2], (2.0, 8));
    assert_eq!(exact[3], (3.0, 20));
    let sets = json_file(&run, "index_sets.json");
    assert_eq!(sets[0]["indices"], json!([[0, 0]]));
    assert_eq!(sets[1]["indices"], json!([[0, 0], [0, 1], [1, 0]]));
}

#[test]
fn dim_ratio_bounded_for_unequal_dimensions() {
    let budgets: Vec<u32> = (4..=12).collect();
    let run = mixrank("dim", &json!({ "n": [1, 2], "sigma": 1.0, "budgets": budgets }));
    assert_eq!(run.code, 0, "{}", run.stderr);
    let (_, rows) = csv(&run, "dim.csv");
    let ratios: Vec<f64> = rows.iter().map(|r| num(&r[3])).collect();
    let lo = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = ratios.iter().copied().fold(0.0, f64::max);
    assert!(lo > 0.1 && hi < 10.0, "{ratios:?}");
}

#[test]
fn decay_separable_matches_closed_form() {
    let cfg = json!({
        "level": 7,
        "max_rank": 40,
        "window": { "min": 3, "max": 24 },
        "runs": [{ "name": "sep", "oracle": { "kind": "separable", "p": 2.0, "terms": 32 },
                   "prediction": { "n": [1, 1], "s": [1.5, 1.5] } }]
    });
    let run = mixrank("decay", &cfg);
    assert_eq!(run.code, 0, "{}", run.stderr);
    let (header, rows) = csv(&run, "decay_sep.csv");
    assert_eq!(header, ["rank", "error", "predicted"]);
    assert_eq!(rows.len(), 40);
    for row in &rows {
        let (e, p) = (num(&row[1]), num(&row[2]));
        assert!((e - p).abs() <= 1e-6 * p + 1e-12, "rank {}: {e} vs {p}", row[0]);
    }
    // At and beyond K terms the closed-form error vanishes.
    assert_eq!(num(&rows[31][2]), 0.0);
    assert!(num(&rows[35][1]) < 1e-12);
    let report = json_file(&run, "decay.json");
    assert_eq!(report[0]["rate_prediction"]["beta"], json!(3.0));
    let slope = report[0]["fit"]["exponent"].as_f64().unwrap();
    // Tails of k^{−2} decay like R^{−3/2}.
    assert!((slope - 1.5).abs() < 0.2, "{slope}");
}

#[test]
fn decay_mixed_slope_exceeds_isotropic() {
    let cfg = json!({
        "level": 8,
        "max_rank": 32,
        "runs": [
            { "name": "mixed", "oracle": { "kind": "separable", "p": 2.55, "terms": 128 } },
            { "name": "kink", "oracle": { "kind": "kink", "gamma": 0.5 } }
        ]
    });
    let run = mixrank("decay", &cfg);
    assert_eq!(run.code, 0, "{}", run.stderr);
    let report = json_file(&run, "decay.json");
    let mixed = report[0]["fit"]["exponent"].as_f64().unwrap();
    let kink = report[1]["fit"]["exponent"].as_f64().unwrap();
    assert!(mixed > kink, "{mixed} vs {kink}");
    assert_eq!(report[1]["predicted_column"], "fitted model");
}

#[test]
fn sparse_convergence_dof_matches_dim() {
    let budgets: Vec<u32> = (2..=7).collect();
    let conv = mixrank(
        "sparse-convergence",
        &json!({ "function": { "kind": "sin_product" }, "sigma": 1.0, "budgets": budgets, "ref_level": 9, "log_power": 0.5 }),
    );
    assert_eq!(conv.code, 0, "{}", conv.stderr);
    let dim = mixrank("dim", &json!({ "n": [1, 1], "sigma": 1.0, "budgets": budgets }));
    let (header, conv_rows) = csv(&conv, "sparse_convergence.csv");
    assert_eq!(header, ["J", "dof", "error"]);
    let (_, dim_rows) = csv(&dim, "dim.csv");
    for (c, d) in conv_rows.iter().zip(&dim_rows) {
        assert_eq!(c[0], d[0]);
        assert_eq!(c[1], d[1]);
    }
    let errors: Vec<f64> = conv_rows.iter().map(|r| num(&r[2])).collect();
    assert!(errors.windows(2).all(|w| w[1] < w[0]), "{errors:?}");
    let report = json_file(&conv, "sparse_convergence.json");
    assert!(report["fit"]["exponent"].as_f64().is_some());
}

#[test]
fn sparse_convergence_exact_function_has_zero_error() {
    let run = mixrank(
        "sparse-convergence",
        &json!({ "function": { "kind": "constant", "value": 2.5 }, "budgets": [0, 1, 2, 3, 4, 5, 6], "ref_level": 7 }),
    );
    assert_eq!(run.code, 0, "{}", run.stderr);
    let (_, rows) = csv(&run, "sparse_convergence.csv");
    assert!(rows.iter().all(|r| num(&r[2]) < 1e-12));
    assert_eq!(json_file(&run, "sparse_convergence.json")["fit"], Value::Null);
}

#[test]
fn tt_schedule_ranks_and_storage() {
    let cfg = json!({
        "input": { "kind": "oracle", "level": 4,
                   "oracle": { "kind": "synthetic", "s": [1.0, 1.0, 1.0], "delta": 0.05, "modes": 8, "seed": 7 } },
        "policy": { "kind": "schedule" },
        "eps": [0.1]
    });
    let run = mixrank("tt", &cfg);
    assert_eq!(run.code, 0, "{}", run.stderr);
    let report = json_file(&run, "tt.json");
    let r0 = &report["runs"][0];
    assert_eq!(r0["schedule"]["ranks"], json!([4, 10]));
    assert_eq!(r0["ranks"], json!([4, 10]));
    assert_eq!(r0["schedule_storage_continuous"], json!(44));
    assert_eq!(r0["storage"]["continuous"], json!(44));
    assert_eq!(r0["storage"]["discrete"], json!(16 * 4 + 4 * 16 * 10 + 10 * 16));
    let error = r0["error"].as_f64().unwrap();
    let bound = r0["bound"].as_f64().unwrap();
    assert!(error <= bound + 1e-12);

    let (header, rows) = csv(&run, "tt.csv");
    assert_eq!(
        header,
        [
            "run",
            "eps",
            "ranks",
            "storage_continuous",
            "storage_discrete",
            "error",
            "bound"
        ]
    );
    assert_eq!(rows[0][2], "4 10");
    assert_eq!(rows[0][3], "44");

    let container = run.out.join("tt_0.mxtt");
    let bytes = std::fs::read(&container).unwrap();
    assert_eq!(&bytes[..4], b"MXTT");
    let sidecar: Value = serde_json::from_str(&std::fs::read_to_string(run.out.join("tt_0.json")).unwrap()).unwrap();
    assert_eq!(sidecar["ranks"], json!([1, 4, 10, 1]));
}

#[test]
fn tt_rank_one_input() {
    let cfg = json!({
        "input": { "kind": "rank_one", "factors": [[1.0, -2.0, 0.5], [0.0, 3.0], [1.0, 1.0, 1.0, 2.0]] },
        "policy": { "kind": "full" }
    });
    let run = mixrank("tt", &cfg);
    assert_eq!(run.code, 0, "{}", run.stderr);
    let r0 = &json_file(&run, "tt.json")["runs"][0];
    assert_eq!(r0["ranks"], json!([1, 1]));
    assert!(r0["error"].as_f64().unwrap() < 1e-12);
}

#[test]
fn tt_synthetic_sweep_within_constant() {
    let eps = [0.3, 0.1, 0.03];
    let cfg = json!({
        "input": { "kind": "oracle", "level": 3,
                   "oracle": { "kind": "synthetic", "s": [1.0, 1.0, 1.0, 1.0], "delta": 0.05, "modes": 8, "seed": 11 } },
        "policy": { "kind": "schedule" },
        "eps": eps
    });
    let run = mixrank("tt", &cfg);
    assert_eq!(run.code, 0, "{}", run.stderr);
    let report = json_file(&run, "tt.json");
    for (r, e) in report["runs"].as_array().unwrap().iter().zip(eps) {
        assert!(r["error"].as_f64().unwrap() <= 10.0 * 2.0 * e);
    }
}

#[test]
fn rates_worked_values() {
    let run = mixrank(
        "rates",
        &json!({ "n": [1, 1], "s": [4.0, 1.0], "eps": 0.01, "budget": 6 }),
    );
    assert_eq!(run.code, 0, "{}", run.stderr);
    let r = json_file(&run, "rates.json");
    assert_eq!(r["optimal_sigma"], json!(2.0));
    assert_eq!(r["sigma"], json!(2.0));

    let run = mixrank("rates", &json!({ "n": [1, 1], "s": [1.0, 1.0] }));
    let r = json_file(&run, "rates.json");
    assert_eq!(r["beta_mixed"], json!(2.0));
    assert_eq!(r["beta_isotropic"], json!(1.0));

    let run = mixrank(
        "rates",
        &json!({ "n": [1, 1, 1, 1], "s": [2.0, 1.0, 1.0, 2.0], "eps": 0.1 }),
    );
    assert_eq!(run.code, 0, "{}", run.stderr);
    let r = json_file(&run, "rates.json");
    assert_eq!(r["schedule"]["beta"], json!([3.0, 1.0, 2.0]));
    assert_eq!(r["beta_mixed"], Value::Null);
}

#[test]
fn exit_codes() {
    // Malformed JSON and unknown fields are config errors.
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, "{ not json").unwrap();
    assert_eq!(mixrank_raw("dim", &path, dir).code, 2);
    assert_eq!(
        mixrank("dim", &json!({ "n": [1, 1], "budgets": [1], "extra": 1 })).code,
        2
    );
    // Semantic validation.
    assert_eq!(
        mixrank("dim", &json!({ "n": [1, 1], "sigma": -1.0, "budgets": [1] })).code,
        2
    );
    assert_eq!(mixrank("rates", &json!({ "n": [1], "s": [1.0] })).code, 2);
    let missing = tempfile::tempdir().unwrap();
    let nowhere = missing.path().join("absent.json");
    assert_eq!(mixrank_raw("rates", &nowhere, missing).code, 2);
    // The dense reference refuses matrices beyond its size limit.
    let big =
        json!({ "level": 13, "max_rank": 8, "runs": [{ "name": "k", "oracle": { "kind": "kink", "gamma": 1.0 } }] });
    let run = mixrank("decay", &big);
    assert_eq!(run.code, 4, "{}", run.stderr);
}

#[test]
fn reruns_are_byte_identical() {
    let cfg = json!({
        "input": { "kind": "oracle", "level": 3,
                   "oracle": { "kind": "synthetic", "s": [1.0, 2.0, 1.0], "delta": 0.1, "modes": 6, "seed": 3 } },
        "policy": { "kind": "total_tolerance" },
        "eps": [0.05, 0.2]
    });
    let a = mixrank("tt", &cfg);
    let b = mixrank("tt", &cfg);
    assert_eq!(a.code, 0, "{}", a.stderr);
    for name in ["tt.csv", "tt.json", "tt_0.json", "tt_1.json", "config.json"] {
        assert_eq!(read(&a, name), read(&b, name), "{name}");
    }
    for name in ["tt_0.mxtt", "tt_1.mxtt"] {
        assert_eq!(
            std::fs::read(a.out.join(name)).unwrap(),
            std::fs::read(b.out.join(name)).unwrap()
        );
    }
    let conv = json!({ "function": { "kind": "sin_product" }, "budgets": [2, 3, 4, 5, 6], "ref_level": 8 });
    let a = mixrank("sparse-convergence", &conv);
    let b = mixrank("sparse-convergence", &conv);
    assert_eq!(read(&a, "sparse_convergence.csv"), read(&b, "sparse_convergence.csv"));
}
