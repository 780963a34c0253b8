use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_renewal-pricer");

fn run(args: &[&str]) -> (Output, Value) {
    let out = Command::new(BIN).args(args).output().unwrap();
    let doc = serde_json::from_slice(&out.stdout).unwrap_or(Value::Null);
    (out, doc)
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_owned()
}

fn merton_config(strike: f64) -> String {
    format!(
        r#"{{
            "model": {{
                "durations": {{"family": "exponential", "rate": 10}},
                "returns": {{"family": "normal", "mean": 0, "sd": 0.01}}
            }},
            "pricing": {{"maturity": 1, "spot": 100, "payoff": {{"kind": "call", "strike": {strike}}}}}
        }}"#
    )
}

#[test]
fn malformed_config_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "bad.json",
        r#"{"model": {"durations": {"family": "exponential", "rte": 1},
            "returns": {"family": "normal", "mean": 0, "sd": 0.01}},
            "pricing": {"maturity": 1, "payoff": {"kind": "call", "strike": 1}}}"#,
    );
    let (out, doc) = run(&["price", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(doc["error"]["kind"], "config");
    assert!(doc["error"]["field"]
        .as_str()
        .unwrap()
        .starts_with("model.durations"));
}

#[test]
fn invalid_parameter_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "neg.json",
        &merton_config(100.0).replace("\"rate\": 10", "\"rate\": -1"),
    );
    let (out, doc) = run(&["price", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2), "{doc}");
    assert_eq!(doc["schema_version"], 1);
}

#[test]
fn price_matches_merton_subcommand() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "m.json", &merton_config(100.0));
    let (out, doc) = run(&["price", "--config", &cfg]);
    assert!(out.status.success(), "{doc}");
    let (_, merton) = run(&[
        "merton", "--s0", "100", "--k", "100", "--lambda", "10", "--mu", "0", "--sigma", "0.01",
        "--tau", "1",
    ]);
    let (a, b) = (
        doc["price"].as_f64().unwrap(),
        merton["price"].as_f64().unwrap(),
    );
    assert!(((a - b) / b).abs() < 1e-4, "{a} vs {b}");
    assert_eq!(doc["case"], "renewal");
    assert_eq!(doc["command"], "price");
}

#[test]
fn tiny_strike_call_is_worth_the_spot() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "k.json", &merton_config(1e-10));
    let (out, doc) = run(&["price", "--config", &cfg]);
    assert!(out.status.success(), "{doc}");
    assert!(
        (doc["price_per_spot"].as_f64().unwrap() - 1.0).abs() < 1e-9,
        "{doc}"
    );
}

#[test]
fn counting_and_residual_documents() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "m.json", &merton_config(100.0));
    let (out, doc) = run(&["counting", "--config", &cfg]);
    assert!(out.status.success(), "{doc}");
    let total: f64 = doc["probs"]
        .as_array()
        .unwrap()
        .iter()
        .map(|p| p.as_f64().unwrap())
        .sum();
    assert!((total - 1.0).abs() < 1e-9);

    let (out, doc) = run(&["residual", "--config", &cfg, "--t", "0.5", "--nt", "3"]);
    assert!(out.status.success(), "{doc}");
    let u = doc["u"].as_array().unwrap();
    let cdf = doc["cdf"].as_array().unwrap();
    assert_eq!(u.len(), cdf.len());
}

#[test]
fn fitted_fragment_pastes_into_a_config() {
    let dir = tempfile::tempdir().unwrap();
    let mut ticks = String::from("t_seconds,price\n");
    let (mut t, mut price) = (0.0f64, 100.0f64);
    for i in 0..400 {
        t += 0.2 + 0.1 * ((i * 7919) % 13) as f64;
        price *= 1.0 + 1e-4 * (((i * 104_729) % 9) as f64 - 4.0);
        ticks.push_str(&format!("{t},{price}\n"));
    }
    let input = write(dir.path(), "ticks.csv", &ticks);
    let (out, durations) = run(&[
        "fit",
        "--input",
        &input,
        "--family",
        "weibull",
        "--target",
        "durations",
    ]);
    assert!(out.status.success(), "{durations}");
    let (out, returns) = run(&[
        "fit", "--input", &input, "--family", "laplace", "--target", "returns",
    ]);
    assert!(out.status.success(), "{returns}");

    let config = serde_json::json!({
        "model": {"durations": durations["model"], "returns": returns["model"]},
        "pricing": {"maturity": 20, "payoff": {"kind": "call", "strike": 1}},
        "numerics": {"h_time": 0.01},
    });
    let cfg = write(dir.path(), "fitted.json", &config.to_string());
    let (out, doc) = run(&["price", "--config", &cfg]);
    assert!(out.status.success(), "{doc}");
    assert!(doc["price"].as_f64().unwrap() > 0.0);
}

#[test]
fn unknown_fit_family_exits_with_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(
        dir.path(),
        "ticks.csv",
        "t_seconds,price\n0,1\n1,1.01\n2,1.0\n",
    );
    let (out, doc) = run(&[
        "fit", "--input", &input, "--family", "cauchy", "--target", "returns",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(doc["error"]["field"], "family");
}
