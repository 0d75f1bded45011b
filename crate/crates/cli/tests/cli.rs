use std::process::{Command, Output};

use bdbridge::data::{load_observations, parse_observations};
use bdbridge::models::LbdiParams;
use bdbridge::reference::lbdi_transition;
use serde_json::Value;

fn bdbridge(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bdbridge"))
        .args(args)
        .env_remove("BDBRIDGE_SEED")
        .output()
        .expect("binary runs")
}

fn json(args: &[&str]) -> Value {
    let out = bdbridge(args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn number(v: &Value) -> f64 {
    v.as_f64().unwrap()
}

#[test]
fn count_of_single_bridge() {
    let v = json(&["count", "--i", "1", "--j", "1", "--B", "2", "--l", "0", "--u", "3"]);
    assert_eq!(v["count"], 1);
    // one path, K = 4 uniform jump times on [0, 1]: density 4!
    assert!((number(&v["log_density"]) - 24f64.ln()).abs() < 1e-15);
}

#[test]
fn closed_form_transprob() {
    let v = json(&[
        "transprob", "--model", "lbdi", "--params", "lambda=0.8,mu=0.6,nu=1.2", "--i", "5", "--j", "5", "--t", "1", "--method",
        "closed",
    ]);
    let oracle = lbdi_transition(&LbdiParams::new(0.8, 0.6, 1.2).unwrap(), 5, 5, 1.0).unwrap();
    assert_eq!(number(&v["value"]), oracle);
    assert!((oracle - 0.113_755_470_876_26).abs() < 1e-12);
}

#[test]
fn igbs_transprob_agrees_with_closed_form() {
    let v = json(&[
        "transprob", "--model", "lbdi", "--params", "lambda=0.8,mu=0.6,nu=1.2", "--i", "5", "--j", "3", "--t", "1", "--n", "50000",
    ]);
    let oracle = lbdi_transition(&LbdiParams::new(0.8, 0.6, 1.2).unwrap(), 5, 3, 1.0).unwrap();
    assert!((number(&v["value"]) - oracle).abs() <= 3.0 * number(&v["std_error"]));
    assert_eq!(v["bset"][0], 0);
}

#[test]
fn exit_codes() {
    assert_eq!(bdbridge(&["count", "--i", "1", "--j", "1", "--frobnicate"]).status.code(), Some(1));
    assert_eq!(bdbridge(&["count", "--i", "1", "--j", "1", "--B", "2", "--l", "0", "--u", "1"]).status.code(), Some(2));
    assert_eq!(bdbridge(&["transprob", "--model", "lbdi", "--params", "rho=1", "--i", "1", "--j", "1", "--t", "1"]).status.code(), Some(1));
    assert_eq!(bdbridge(&["count", "--threads", "0", "--i", "1", "--j", "1", "--B", "0"]).status.code(), Some(1));
    assert_eq!(bdbridge(&["--help"]).status.code(), Some(0));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "time,S\n0,10\n1,11\n").unwrap();
    let out = bdbridge(&["filter", "--data", bad.to_str().unwrap(), "--params", "beta=0.01,gamma=0.3"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("row 2"));
}

#[test]
fn reruns_are_byte_identical_across_thread_counts() {
    let args = |threads: &'static str| {
        vec![
            "transprob", "--model", "sis", "--params", "n0=30,beta=0.003,gamma=1", "--i", "5", "--j", "2", "--t", "1", "--n", "30000",
            "--seed", "9", "--threads", threads,
        ]
    };
    let a = bdbridge(&args("1")).stdout;
    let b = bdbridge(&args("4")).stdout;
    assert!(!a.is_empty());
    assert_eq!(a, b);
}

#[test]
fn seed_comes_from_environment() {
    let base = ["transprob", "--model", "lbdi", "--params", "lambda=0.8,mu=0.6", "--i", "3", "--j", "3", "--t", "1", "--n", "2000"];
    let with_env = Command::new(env!("CARGO_BIN_EXE_bdbridge")).args(base).env("BDBRIDGE_SEED", "77").output().unwrap();
    let mut flagged = base.to_vec();
    flagged.extend(["--seed", "77"]);
    assert_eq!(with_env.stdout, bdbridge(&flagged).stdout);
    assert_ne!(with_env.stdout, bdbridge(&base).stdout);
}

#[test]
fn simulated_record_is_reingestible() {
    let out = bdbridge(&["simulate", "--model", "sir", "--params", "n0=60,beta=0.02,gamma=0.4", "--i", "2", "--times", "0:10:21"]);
    assert!(out.status.success());
    let obs = parse_observations(out.stdout.as_slice()).unwrap();
    assert_eq!(obs.times().len(), 21);
    assert_eq!(obs.susceptibles()[0], 58);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("obs.csv");
    std::fs::write(&path, &out.stdout).unwrap();
    let v = json(&["filter", "--data", path.to_str().unwrap(), "--params", "beta=0.02,gamma=0.4", "--i0", "2", "--m", "500"]);
    assert!(number(&v["loglik"]).is_finite());
    assert_eq!(v["per_step"].as_array().unwrap().len(), 20);
}

#[test]
fn single_record_has_zero_loglik() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("one.csv");
    std::fs::write(&path, "time,S\n0,40\n").unwrap();
    let v = json(&["filter", "--data", path.to_str().unwrap(), "--params", "beta=0.01,gamma=0.3"]);
    assert_eq!(number(&v["loglik"]), 0.0);
}

#[test]
fn sample_rows_are_valid_bridges() {
    let out = bdbridge(&["sample", "--i", "2", "--j", "3", "--B", "2", "--l", "0", "--u", "5", "--t", "2", "--n", "20"]);
    assert!(out.status.success());
    let mut rdr = csv::Reader::from_reader(out.stdout.as_slice());
    assert_eq!(rdr.headers().unwrap(), vec!["replicate_id", "k", "tau_k", "omega_k"]);
    let rows: Vec<(u64, usize, f64, i64)> = rdr.deserialize().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 20 * 4);
    for path in rows.chunks(4) {
        assert_eq!((path[0].3, path[3].3), (2, 3));
        assert!(path.windows(2).all(|w| w[0].2 < w[1].2 && (w[0].3 - w[1].3).abs() == 1));
        assert!(path.iter().all(|r| r.3 > 0 && r.3 < 5 && r.2 < 2.0));
    }
}

#[test]
fn fit_and_scan_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let surface = dir.path().join("surface.csv");
    let v = json(&[
        "fit", "--beta-range", "0.001:0.0025:3", "--gamma-range", "0.15:0.4:3", "--m", "500", "--replications", "1",
        "--refine-steps", "3", "--surface-csv", surface.to_str().unwrap(),
    ]);
    let beta = number(&v["beta_hat"]);
    assert!((0.0005..=0.003).contains(&beta));
    assert!(number(&v["ci_beta"]["lo"]) <= beta && beta <= number(&v["ci_beta"]["hi"]));
    assert!(v["ci_method"].as_str().unwrap().contains("profile"));
    let text = std::fs::read_to_string(&surface).unwrap();
    assert_eq!(text.lines().count(), 1 + 9);
    assert!(text.starts_with("beta,gamma,loglik,spread\n"));

    let out = bdbridge(&["scan-failure", "--beta-range", "0.001:0.004:2", "--gamma-range", "0.1:0.8:2", "--particles", "2000"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("beta,gamma,survival_min,loglik,failed_0p1,failed_0p01\n"));
    assert_eq!(text.lines().count(), 5);
}

#[test]
fn embedded_record_matches_data_file() {
    let file = load_observations(concat!(env!("CARGO_MANIFEST_DIR"), "/../core/data/shigellosis.csv")).unwrap();
    assert_eq!(file, bdbridge::data::shigellosis());
    assert_eq!((file.susceptibles()[0], file.susceptibles()[27]), (198, 157));
}
